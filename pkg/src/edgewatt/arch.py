"""Layer, network and device descriptions plus MAC-count arithmetic.

Loads are counted in multiply-accumulate operations (MACs):

* fully connected: ``i_size * o_size``
* convolution, per kernel: ``out_side**2 * ifm * ksize**2``
* convolution, whole layer: per-kernel load times ``ofm``

Only square inputs and kernels are representable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Union

from .errors import ArchError, LoadOverflowError

# Loads must fit an unsigned 64-bit integer so that they survive JSON/CSV
# round-trips through tools with native integer types.
MAX_LOAD = 2**64 - 1


class LayerKind(enum.Enum):
    FC = "fc"
    CONV2D = "conv2d"


class LoadMode(enum.Enum):
    EXACT = "exact"
    APPROX = "approx"


def _require_int(name: str, value: Any, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ArchError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ArchError(f"{name} must be >= {minimum}, got {value}")


@dataclass(frozen=True)
class FcLayerSpec:
    i_size: int
    o_size: int

    def __post_init__(self):
        _require_int("i_size", self.i_size, 1)
        _require_int("o_size", self.o_size, 1)


@dataclass(frozen=True)
class ConvLayerSpec:
    """Square 2-D convolution: ``i_size x i_size x ifm`` input, ``ofm`` kernels
    of ``ksize x ksize x ifm``."""

    i_size: int
    ifm: int
    ofm: int
    ksize: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        for name in ("i_size", "ifm", "ofm", "ksize", "stride"):
            _require_int(name, getattr(self, name), 1)
        _require_int("padding", self.padding, 0)
        if self.ksize > self.i_size + 2 * self.padding:
            raise ArchError(
                f"kernel size {self.ksize} exceeds padded input side "
                f"{self.i_size + 2 * self.padding}"
            )


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    payload: Union[FcLayerSpec, ConvLayerSpec]
    label: Optional[str] = None

    def __post_init__(self):
        expected = FcLayerSpec if self.kind is LayerKind.FC else ConvLayerSpec
        if not isinstance(self.payload, expected):
            raise ArchError(
                f"layer kind {self.kind.value} does not match payload "
                f"{type(self.payload).__name__}"
            )

    @classmethod
    def fc(cls, i_size: int, o_size: int, label: Optional[str] = None) -> "LayerSpec":
        return cls(LayerKind.FC, FcLayerSpec(i_size, o_size), label)

    @classmethod
    def conv(cls, i_size: int, ifm: int, ofm: int, ksize: int, stride: int = 1,
             padding: int = 0, label: Optional[str] = None) -> "LayerSpec":
        return cls(LayerKind.CONV2D, ConvLayerSpec(i_size, ifm, ofm, ksize, stride, padding), label)


@dataclass(frozen=True)
class NetworkArch:
    """Ordered feed-forward stack of FC / conv layers.

    ``skipped`` lists ``(file_index, kind)`` of layers dropped while parsing
    with ``skip_unknown=True``; it is empty for programmatic construction.
    """

    layers: tuple
    name: str = "network"
    skipped: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ArchError("a network needs at least one layer")
        for i, layer in enumerate(self.layers):
            if not isinstance(layer, LayerSpec):
                raise ArchError(f"layer {i} is not a LayerSpec: {layer!r}")

    def __len__(self):
        return len(self.layers)

    def split(self, at: int) -> tuple["NetworkArch", "NetworkArch"]:
        """Cut into a prefix ``[0, at)`` and a suffix ``[at, L)``."""
        if not 0 < at < len(self.layers):
            raise ValueError(f"split point must be interior, got {at}")
        return (NetworkArch(self.layers[:at], f"{self.name}[:{at}]"),
                NetworkArch(self.layers[at:], f"{self.name}[{at}:]"))


@dataclass(frozen=True)
class DeviceProfile:
    """Empirical energy coefficients of one board, in joules per MAC."""

    device_id: str
    a_c: float
    b_c: float
    a_f: Optional[float] = None

    def __post_init__(self):
        for name in ("a_c", "b_c", "a_f"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if not self.a_c > 0:
            raise ValueError(f"a_c must be > 0, got {self.a_c}")
        if not self.b_c >= 0:
            raise ValueError(f"b_c must be >= 0, got {self.b_c}")
        if self.a_f is not None and not self.a_f > 0:
            raise ValueError(f"a_f must be > 0 when present, got {self.a_f}")

    def scaled(self, factor: float) -> "DeviceProfile":
        a_f = None if self.a_f is None else self.a_f * factor
        return DeviceProfile(self.device_id, self.a_c * factor, self.b_c * factor, a_f)

    def to_dict(self) -> dict:
        out = {"device_id": self.device_id, "a_c": self.a_c, "b_c": self.b_c}
        if self.a_f is not None:
            out["a_f"] = self.a_f
        out["units"] = "J_per_MAC"
        return out

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "DeviceProfile":
        if not isinstance(doc, Mapping):
            raise ValueError("device profile must be a JSON object")
        missing = [k for k in ("device_id", "a_c", "b_c") if k not in doc]
        if missing:
            raise ValueError(f"device profile missing field(s): {', '.join(missing)}")
        units = doc.get("units", "J_per_MAC")
        if units != "J_per_MAC":
            raise ValueError(f"unsupported profile units {units!r}")
        a_f = doc.get("a_f")
        try:
            return cls(str(doc["device_id"]), float(doc["a_c"]), float(doc["b_c"]),
                       None if a_f is None else float(a_f))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"device profile {doc.get('device_id')!r}: {exc}") from None


# --- load arithmetic ------------------------------------------------------

def _checked(value: int) -> int:
    if value > MAX_LOAD:
        raise LoadOverflowError(f"load {value} exceeds the supported range (2**64 - 1)")
    return value


def clf(layer: FcLayerSpec) -> int:
    """MACs of a fully connected layer."""
    return _checked(layer.i_size * layer.o_size)


def conv_out_side(layer: ConvLayerSpec) -> int:
    padded = layer.i_size + 2 * layer.padding
    if layer.ksize > padded:
        raise ArchError(f"kernel size {layer.ksize} exceeds padded input side {padded}")
    return (padded - layer.ksize) // layer.stride + 1


def kclc(layer: ConvLayerSpec, mode: LoadMode = LoadMode.EXACT) -> Union[int, float]:
    """MACs needed to produce one output feature map.

    ``APPROX`` drops the kernel-border correction, ``(i_size/stride)**2``, and
    is only defined for unpadded layers. It returns a float.
    """
    mode = LoadMode(mode)
    if mode is LoadMode.EXACT:
        return _checked(conv_out_side(layer) ** 2 * layer.ifm * layer.ksize**2)
    if layer.padding:
        raise ArchError("approximate load is only defined for padding = 0")
    value = (layer.i_size / layer.stride) ** 2 * layer.ifm * layer.ksize**2
    if not value <= MAX_LOAD:
        raise LoadOverflowError(f"load {value} exceeds the supported range (2**64 - 1)")
    return value


def clc(layer: ConvLayerSpec, mode: LoadMode = LoadMode.EXACT) -> Union[int, float]:
    """MACs of the whole convolutional layer (all ``ofm`` kernels)."""
    per_kernel = kclc(layer, mode)
    if isinstance(per_kernel, int):
        return _checked(per_kernel * layer.ofm)
    value = per_kernel * layer.ofm
    if not value <= MAX_LOAD:
        raise LoadOverflowError(f"load {value} exceeds the supported range (2**64 - 1)")
    return value


def layer_load(layer: LayerSpec, mode: LoadMode = LoadMode.EXACT) -> Union[int, float]:
    if layer.kind is LayerKind.FC:
        return clf(layer.payload)
    return clc(layer.payload, mode)


# --- JSON ---------------------------------------------------------------

_FIELDS = {
    LayerKind.FC: ("i_size", "o_size"),
    LayerKind.CONV2D: ("i_size", "ifm", "ofm", "ksize", "stride", "padding"),
}
_OPTIONAL = {"padding", "label"}


class UnknownLayerKind(ArchError):
    def __init__(self, index, kind):
        super().__init__(f"layer {index}: unknown kind {kind!r} (expected 'fc' or 'conv2d')")
        self.index = index
        self.kind = kind


def layer_from_dict(doc: Mapping[str, Any], index: Any = 0) -> LayerSpec:
    """Parse one layer object; ``index`` only decorates error messages."""
    if not isinstance(doc, Mapping):
        raise ArchError(f"layer {index}: expected a JSON object, got {type(doc).__name__}")
    try:
        kind = LayerKind(doc.get("kind"))
    except ValueError:
        raise UnknownLayerKind(index, doc.get("kind")) from None
    allowed = set(_FIELDS[kind]) | {"kind", "label"}
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ArchError(f"layer {index}: unsupported field(s) {', '.join(extra)} "
                        "(only square inputs and kernels are supported)")
    values = {}
    for name in _FIELDS[kind]:
        if name not in doc:
            if name in _OPTIONAL:
                continue
            raise ArchError(f"layer {index}: missing field {name!r}")
        value = doc[name]
        if isinstance(value, (list, tuple)):
            raise ArchError(f"layer {index}: field {name!r} must be a single integer "
                            "(non-square shapes are unsupported)")
        values[name] = value
    label = doc.get("label")
    try:
        payload = FcLayerSpec(**values) if kind is LayerKind.FC else ConvLayerSpec(**values)
    except ArchError as exc:
        raise ArchError(f"layer {index}: {exc}") from None
    return LayerSpec(kind, payload, None if label is None else str(label))


def layer_to_dict(layer: LayerSpec) -> dict:
    out = {"kind": layer.kind.value}
    for name in _FIELDS[layer.kind]:
        out[name] = getattr(layer.payload, name)
    if layer.label is not None:
        out["label"] = layer.label
    return out


def network_from_dict(doc: Mapping[str, Any], skip_unknown: bool = False) -> NetworkArch:
    if not isinstance(doc, Mapping):
        raise ArchError("architecture must be a JSON object")
    layers_doc = doc.get("layers")
    if not isinstance(layers_doc, list):
        raise ArchError("architecture field 'layers' must be a list")
    layers, skipped = [], []
    for i, entry in enumerate(layers_doc):
        try:
            layers.append(layer_from_dict(entry, i))
        except UnknownLayerKind as exc:
            if not skip_unknown:
                raise
            skipped.append((i, exc.kind))
    return NetworkArch(tuple(layers), str(doc.get("name", "network")), tuple(skipped))


def network_to_dict(arch: NetworkArch) -> dict:
    return {"name": arch.name, "layers": [layer_to_dict(layer) for layer in arch.layers]}
