"""Configuration grids for synthetic measurement campaigns."""

from __future__ import annotations

import itertools
import logging
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .arch import DeviceProfile, LayerKind, LayerSpec
from .traces import DEFAULT_DELTA_S, PowerTrace, TraceManifest, config_key, synthesize_traces

log = logging.getLogger(__name__)

DEFAULT_OFMS = tuple(2**k for k in range(10))  # 1 .. 512
DEFAULT_I_SIZES = (32, 64)
DEFAULT_IFMS = (8, 16)
DEFAULT_KSIZES = (3,)
DEFAULT_STRIDES = (1,)
DEFAULT_FC = ((256, 128), (512, 256), (1024, 512), (2048, 1024))
DEFAULT_MEAN_POWER_MW = 5000.0


def conv_grid(
    ofms: Sequence[int] = DEFAULT_OFMS,
    i_sizes: Sequence[int] = DEFAULT_I_SIZES,
    ifms: Sequence[int] = DEFAULT_IFMS,
    ksizes: Sequence[int] = DEFAULT_KSIZES,
    strides: Sequence[int] = DEFAULT_STRIDES,
) -> List[LayerSpec]:
    """Cartesian product of conv parameters, skipping kernels larger than the input."""
    out = []
    for ofm, i_size, ifm, k, s in itertools.product(ofms, i_sizes, ifms, ksizes, strides):
        if k <= i_size:
            out.append(LayerSpec.conv(i_size, ifm, ofm, k, s))
    return out


def fc_grid(shapes: Iterable[Tuple[int, int]] = DEFAULT_FC) -> List[LayerSpec]:
    return [LayerSpec.fc(i, o) for i, o in shapes]


def synthesize_campaign(
    configs: Sequence[LayerSpec],
    profile: DeviceProfile,
    n_runs: int = 50,
    mean_power_mw: float = DEFAULT_MEAN_POWER_MW,
    power_std_mw: float = 0.0,
    delta_s: float = DEFAULT_DELTA_S,
    seed: int = 0,
) -> Tuple[TraceManifest, List[PowerTrace]]:
    """Traces for every config, each config drawing from its own child seed.

    FC configs are dropped with a warning when the profile has no ``a_f``.
    """
    kept: Dict[str, LayerSpec] = {}
    for layer in configs:
        if layer.kind is LayerKind.FC and profile.a_f is None:
            log.warning("profile %s has no a_f; skipping FC config %s", profile.device_id, config_key(layer))
            continue
        cid = layer.label or config_key(layer)
        if cid in kept:
            raise ValueError(f"duplicate config id {cid!r}")
        kept[cid] = layer
    children = np.random.SeedSequence(seed).spawn(len(kept))
    traces: List[PowerTrace] = []
    for (cid, layer), child in zip(kept.items(), children):
        traces.extend(synthesize_traces(layer, profile, n_runs, mean_power_mw, power_std_mw,
                                        delta_s, child, config_id=cid))
    return TraceManifest(profile.device_id, delta_s, kept), traces
