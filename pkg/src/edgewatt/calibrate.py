"""Fit device coefficients from aggregated energy measurements.

Conv layers: for every ofm value, regress mean energy on CLC through the
origin to get the slope ``H(ofm)``; then fit ``H(ofm) = a_c / ofm + b_c`` by
closed-form least squares. FC layers: regress mean energy on CLF through the
origin to get ``a_f``.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .arch import DeviceProfile, LayerKind, LayerSpec
from .errors import DegenerateDesignError
from .traces import ConfigEnergyStats

log = logging.getLogger(__name__)


class FitMeaning(enum.Enum):
    OFM_VS_SLOPE = "ofm_vs_slope"
    LOAD_VS_ENERGY = "load_vs_energy"


@dataclass(frozen=True)
class FitDataset:
    points: Tuple[Tuple[float, float], ...]
    meaning: FitMeaning

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)
        for x, y in pts:
            if not (x > 0 and math.isfinite(x)):
                raise ValueError(f"x values must be positive and finite, got {x}")
            if not math.isfinite(y):
                raise ValueError(f"y values must be finite, got {y}")

    @property
    def xs(self) -> List[float]:
        return [x for x, _ in self.points]

    @property
    def ys(self) -> List[float]:
        return [y for _, y in self.points]


@dataclass(frozen=True)
class SlopeSample:
    ofm: int
    slope_j_per_mac: float
    n_points: int
    r2: float


@dataclass(frozen=True)
class SkippedGroup:
    ofm: int
    n_points: int
    reason: str


@dataclass(frozen=True)
class HyperbolicFit:
    a_c: float
    b_c: float
    mse: float
    n: int

    def __call__(self, ofm: float) -> float:
        return self.a_c / ofm + self.b_c


@dataclass(frozen=True)
class FcFit:
    a_f: float
    mse: float
    n: int


def fit_slope_through_origin(data: FitDataset) -> Tuple[float, float]:
    """Least-squares slope of ``y = k x`` and its uncentred R^2.

    R^2 is ``1 - SS_res / sum(y^2)``, which lies in [0, 1] for this model;
    it is 1 when every y is zero.
    """
    xs, ys = data.xs, data.ys
    if len(xs) < 2:
        raise DegenerateDesignError(f"need at least 2 points, got {len(xs)}")
    sxx = math.fsum(x * x for x in xs)
    if sxx == 0:
        raise DegenerateDesignError("degenerate design: all x are zero")
    slope = math.fsum(x * y for x, y in zip(xs, ys)) / sxx
    syy = math.fsum(y * y for y in ys)
    if syy == 0:
        return slope, 1.0
    ss_res = math.fsum((y - slope * x) ** 2 for x, y in zip(xs, ys))
    return slope, min(1.0, max(0.0, 1.0 - ss_res / syy))


def group_by_ofm(
    stats: Sequence[ConfigEnergyStats], configs: Mapping[str, LayerSpec]
) -> Dict[int, List[ConfigEnergyStats]]:
    """Conv-layer stats keyed by ofm; FC configs are ignored."""
    groups: Dict[int, List[ConfigEnergyStats]] = defaultdict(list)
    for s in stats:
        try:
            layer = configs[s.config_id]
        except KeyError:
            raise ValueError(f"stats row {s.config_id!r} has no config in the manifest") from None
        if layer.kind is LayerKind.CONV2D:
            groups[layer.payload.ofm].append(s)
    return dict(sorted(groups.items()))


def per_ofm_slopes(
    groups: Mapping[int, Sequence[ConfigEnergyStats]],
) -> Tuple[List[SlopeSample], List[SkippedGroup]]:
    """Energy-vs-CLC slope for every ofm group.

    Groups with fewer than two distinct loads are skipped and returned in the
    second list rather than raising.
    """
    samples, skipped = [], []
    for ofm in sorted(groups):
        rows = groups[ofm]
        if len({s.computational_load for s in rows}) < 2:
            reason = "fewer than 2 distinct loads"
            log.warning("ofm=%d skipped: %s", ofm, reason)
            skipped.append(SkippedGroup(ofm, len(rows), reason))
            continue
        data = FitDataset(tuple((s.computational_load, s.mean_energy_j) for s in rows),
                          FitMeaning.LOAD_VS_ENERGY)
        slope, r2 = fit_slope_through_origin(data)
        samples.append(SlopeSample(ofm, slope, len(rows), r2))
    return samples, skipped


def hyperbolic_lsq(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """Closed-form minimiser of ``mean((a/x + b - y)**2)`` over (a, b)."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("x and y must have the same length")
    if n < 2 or len(set(xs)) < 2:
        raise DegenerateDesignError("degenerate design: need at least two distinct x values")
    inv = [1.0 / x for x in xs]
    s_inv = math.fsum(inv)
    s_inv2 = math.fsum(u * u for u in inv)
    s_y = math.fsum(ys)
    s_y_inv = math.fsum(y * u for y, u in zip(ys, inv))
    denom = s_inv2 - s_inv * s_inv / n
    if not denom > 0:
        raise DegenerateDesignError("degenerate design: singular normal equations")
    a = (s_y_inv - s_inv * s_y / n) / denom
    b = (s_y - a * s_inv) / n
    return a, b


def fit_hyperbolic(samples: Sequence[SlopeSample]) -> HyperbolicFit:
    xs = [float(s.ofm) for s in samples]
    ys = [s.slope_j_per_mac for s in samples]
    a, b = hyperbolic_lsq(xs, ys)
    mse = math.fsum((a / x + b - y) ** 2 for x, y in zip(xs, ys)) / len(xs)
    return HyperbolicFit(a, b, mse, len(xs))


def fit_fc(stats: Sequence[ConfigEnergyStats]) -> FcFit:
    """``a_f`` as the through-origin slope of mean energy over CLF."""
    if len({s.computational_load for s in stats}) < 2:
        raise DegenerateDesignError("degenerate design: FC fit needs at least 2 distinct loads")
    data = FitDataset(tuple((s.computational_load, s.mean_energy_j) for s in stats),
                      FitMeaning.LOAD_VS_ENERGY)
    a_f, _ = fit_slope_through_origin(data)
    mse = math.fsum((a_f * x - y) ** 2 for x, y in data.points) / len(data.points)
    return FcFit(a_f, mse, len(data.points))


def build_profile(hfit: HyperbolicFit, ffit: Optional[FcFit], device_id: str) -> DeviceProfile:
    return DeviceProfile(device_id, hfit.a_c, hfit.b_c, None if ffit is None else ffit.a_f)


@dataclass(frozen=True)
class Calibration:
    profile: DeviceProfile
    hyperbolic: HyperbolicFit
    per_ofm: Tuple[SlopeSample, ...]
    skipped: Tuple[SkippedGroup, ...]
    fc: Optional[FcFit]

    def report(self) -> dict:
        out = {"device_id": self.profile.device_id, "a_c": self.profile.a_c, "b_c": self.profile.b_c}
        if self.profile.a_f is not None:
            out["a_f"] = self.profile.a_f
        out["mse_hyperbolic"] = self.hyperbolic.mse
        out["per_ofm"] = [
            {"ofm": s.ofm, "slope": s.slope_j_per_mac, "r2": s.r2, "n_points": s.n_points}
            for s in self.per_ofm
        ]
        if self.fc is not None:
            out["fc"] = {"a_f": self.fc.a_f, "mse": self.fc.mse, "n": self.fc.n}
        if self.skipped:
            out["skipped_ofm"] = [
                {"ofm": g.ofm, "n_points": g.n_points, "reason": g.reason} for g in self.skipped
            ]
        return out


def calibrate(
    stats: Sequence[ConfigEnergyStats], configs: Mapping[str, LayerSpec], device_id: str
) -> Calibration:
    """Full calibration from per-config stats.

    The FC fit is attempted only when at least two FC configs are present;
    otherwise the profile has no ``a_f``.
    """
    samples, skipped = per_ofm_slopes(group_by_ofm(stats, configs))
    hfit = fit_hyperbolic(samples)
    fc_stats = [s for s in stats if configs[s.config_id].kind is LayerKind.FC]
    ffit = None
    if len({s.computational_load for s in fc_stats}) >= 2:
        ffit = fit_fc(fc_stats)
    elif fc_stats:
        log.warning("only one distinct FC load; a_f not fitted")
    return Calibration(build_profile(hfit, ffit, device_id), hfit, tuple(samples), tuple(skipped), ffit)
