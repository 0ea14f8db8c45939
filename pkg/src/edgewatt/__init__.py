"""Empirical inference-energy model for neural networks on edge boards."""

__version__ = "0.1.0"

from .arch import (  # noqa: E402
    ConvLayerSpec,
    DeviceProfile,
    FcLayerSpec,
    LayerKind,
    LayerSpec,
    LoadMode,
    NetworkArch,
    clc,
    clf,
    conv_out_side,
    kclc,
)
from .estimate import compare_devices, cumulative_profile, energy_conv2d, energy_fc, estimate_network  # noqa: E402

__all__ = [
    "ConvLayerSpec", "DeviceProfile", "FcLayerSpec", "LayerKind", "LayerSpec", "LoadMode",
    "NetworkArch", "clc", "clf", "conv_out_side", "kclc", "compare_devices",
    "cumulative_profile", "energy_conv2d", "energy_fc", "estimate_network",
]
