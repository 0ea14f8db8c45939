"""Per-layer and whole-network inference energy estimates.

A convolutional layer costs ``KCLC * (a_c + b_c * ofm)`` joules, a fully
connected layer ``CLF * a_f``. Network energy is the in-order sum over layers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, List, Mapping, Optional, Sequence, Tuple

from .arch import (
    ConvLayerSpec,
    DeviceProfile,
    FcLayerSpec,
    LayerKind,
    LoadMode,
    NetworkArch,
    clc,
    clf,
    kclc,
)
from .errors import CalibrationGapError


class LayerCalibrationGap(CalibrationGapError):
    """Raised by :func:`estimate_network` for the first layer it cannot price."""

    def __init__(self, index: int, kind: LayerKind, reason: str):
        super().__init__(f"layer {index} ({kind.value}): {reason}")
        self.index = index
        self.kind = kind
        self.reason = reason


@dataclass(frozen=True)
class LayerEnergy:
    index: int
    kind: LayerKind
    load: int
    energy_j: float


@dataclass(frozen=True)
class NetworkEstimate:
    network_name: str
    device_id: str
    per_layer: Tuple[LayerEnergy, ...]
    total_j: float

    def to_dict(self) -> dict:
        return {
            "network": self.network_name,
            "device_id": self.device_id,
            "total_j": self.total_j,
            "layers": [
                {"index": le.index, "kind": le.kind.value, "load": le.load, "energy_j": le.energy_j}
                for le in self.per_layer
            ],
            "cumulative": [e for _, e in cumulative_profile(self)],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "NetworkEstimate":
        layers = tuple(
            LayerEnergy(int(d["index"]), LayerKind(d["kind"]), int(d["load"]), float(d["energy_j"]))
            for d in doc["layers"]
        )
        return cls(str(doc["network"]), str(doc["device_id"]), layers, float(doc["total_j"]))


def energy_conv2d(layer: ConvLayerSpec, profile: DeviceProfile) -> float:
    return kclc(layer, LoadMode.EXACT) * (profile.a_c + profile.b_c * layer.ofm)


def energy_fc(layer: FcLayerSpec, profile: DeviceProfile) -> float:
    if profile.a_f is None:
        raise CalibrationGapError(
            f"device {profile.device_id!r} not calibrated for FC layers (a_f missing)"
        )
    return clf(layer) * profile.a_f


def estimate_network(arch: NetworkArch, profile: DeviceProfile) -> NetworkEstimate:
    per_layer = []
    total = 0.0
    for i, layer in enumerate(arch.layers):
        if layer.kind is LayerKind.CONV2D:
            load = clc(layer.payload, LoadMode.EXACT)
            energy = energy_conv2d(layer.payload, profile)
        else:
            load = clf(layer.payload)
            try:
                energy = energy_fc(layer.payload, profile)
            except CalibrationGapError:
                raise LayerCalibrationGap(
                    i, layer.kind, f"device {profile.device_id!r} not calibrated for FC layers"
                ) from None
        total = total + energy
        per_layer.append(LayerEnergy(i, layer.kind, load, energy))
    return NetworkEstimate(arch.name, profile.device_id, tuple(per_layer), total)


def cumulative_profile(estimate: NetworkEstimate) -> List[Tuple[int, float]]:
    """Energy spent up to and including each layer, i.e. the on-device cost of
    every possible split point."""
    out = []
    running = 0.0
    for le in estimate.per_layer:
        running = running + le.energy_j
        out.append((le.index, running))
    return out


@dataclass(frozen=True)
class DeviceComparison:
    device_id: str
    total_j: Optional[float]
    # per-layer energy relative to the reference (first estimable) device
    layer_ratios: Optional[Tuple[float, ...]]
    blocked_reason: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.blocked_reason is None


def compare_devices(arch: NetworkArch, profiles: Sequence[DeviceProfile]) -> List[DeviceComparison]:
    if not profiles:
        raise ValueError("compare_devices needs at least one profile")
    estimates: List[Any] = []
    for profile in profiles:
        try:
            estimates.append(estimate_network(arch, profile))
        except CalibrationGapError as exc:
            estimates.append(exc)
    reference = next((e for e in estimates if isinstance(e, NetworkEstimate)), None)
    rows = []
    for profile, est in zip(profiles, estimates):
        if isinstance(est, NetworkEstimate):
            ratios = tuple(
                le.energy_j / ref.energy_j for le, ref in zip(est.per_layer, reference.per_layer)
            )
            rows.append(DeviceComparison(profile.device_id, est.total_j, ratios))
        else:
            rows.append(DeviceComparison(profile.device_id, None, None, str(est)))
    return rows
