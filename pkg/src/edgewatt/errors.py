"""Exception hierarchy shared by all edgewatt modules."""


class EdgewattError(Exception):
    """Base class for every error raised by this package."""


class ArchError(EdgewattError, ValueError):
    """Invalid layer/network description."""


class LoadOverflowError(EdgewattError, OverflowError):
    """A computational load exceeded the supported integer range."""


class TraceFormatError(EdgewattError, ValueError):
    """Malformed power-trace data or manifest."""


class DegenerateDesignError(EdgewattError, ValueError):
    """A least-squares design matrix is singular."""


class CalibrationGapError(EdgewattError, LookupError):
    """The device profile lacks a coefficient needed for a layer kind."""
