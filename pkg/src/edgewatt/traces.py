"""Power-trace ingestion, energy integration and per-configuration statistics.

Traces are sampled at a fixed timeslot ``delta_s``; power is in milliwatts,
energy in joules. The energy of one run is ``T * mean_power`` with
``T = len(samples) * delta_s``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy import stats as sps

from .arch import (
    ArchError,
    DeviceProfile,
    LayerKind,
    LayerSpec,
    LoadMode,
    layer_from_dict,
    layer_load,
    layer_to_dict,
)
from .errors import TraceFormatError
from .estimate import energy_conv2d, energy_fc

log = logging.getLogger(__name__)

DEFAULT_DELTA_S = 1e-4
TRACE_HEADER = ("config_id", "run_id", "slot_idx", "power_mw")
STATS_HEADER = ("config_id", "n_runs", "load", "mean_energy_j", "std_energy_j", "ci99_j")
CI_LEVEL = 0.99


@dataclass(frozen=True)
class TraceManifest:
    device_id: str
    delta_s: float = DEFAULT_DELTA_S
    configs: Mapping[str, LayerSpec] = field(default_factory=dict)

    def __post_init__(self):
        if not (isinstance(self.delta_s, (int, float)) and self.delta_s > 0 and math.isfinite(self.delta_s)):
            raise TraceFormatError(f"delta_s must be a positive number, got {self.delta_s!r}")

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "delta_s": self.delta_s,
            "configs": {cid: layer_to_dict(layer) for cid, layer in self.configs.items()},
        }

    @classmethod
    def from_dict(cls, doc) -> "TraceManifest":
        if not isinstance(doc, Mapping):
            raise TraceFormatError("manifest must be a JSON object")
        configs_doc = doc.get("configs")
        if not isinstance(configs_doc, Mapping):
            raise TraceFormatError("manifest field 'configs' must be an object")
        configs = {}
        for cid, entry in configs_doc.items():
            try:
                configs[str(cid)] = layer_from_dict(entry, index=cid)
            except ArchError as exc:
                raise TraceFormatError(f"manifest config {exc}") from None
        return cls(str(doc.get("device_id", "unknown")), doc.get("delta_s", DEFAULT_DELTA_S), configs)


def read_manifest(path) -> TraceManifest:
    with open(path, encoding="utf-8") as fh:
        return TraceManifest.from_dict(json.load(fh))


def write_manifest(manifest: TraceManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2)
        fh.write("\n")


def _check_samples(samples: Sequence[float], where: str) -> None:
    if len(samples) == 0:
        raise TraceFormatError(f"{where}: trace has no samples")
    for i, p in enumerate(samples):
        if not (p >= 0 and math.isfinite(p)):
            raise TraceFormatError(f"{where}: invalid power {p!r} mW at slot {i}")


@dataclass(frozen=True)
class PowerTrace:
    config_id: str
    run_id: int
    samples: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(p) for p in self.samples))
        if self.run_id < 0:
            raise TraceFormatError(f"run_id must be non-negative, got {self.run_id}")
        _check_samples(self.samples, f"config {self.config_id!r} run {self.run_id}")


@dataclass(frozen=True)
class RunEnergy:
    config_id: str
    run_id: int
    duration_s: float
    avg_power_mw: float
    energy_j: float


@dataclass(frozen=True)
class ConfigEnergyStats:
    config_id: str
    n_runs: int
    mean_energy_j: float
    std_energy_j: float
    ci99_halfwidth_j: float
    computational_load: int


def integrate_run(trace: PowerTrace, delta_s: float = DEFAULT_DELTA_S, baseline_mw: float = 0.0) -> RunEnergy:
    """Integrate one run as ``duration * mean power``.

    The mean uses a correctly rounded sum, so the result does not depend on
    sample order. ``baseline_mw`` is subtracted from the mean power.
    """
    if not delta_s > 0:
        raise ValueError(f"delta_s must be > 0, got {delta_s}")
    samples = trace.samples
    _check_samples(samples, f"config {trace.config_id!r} run {trace.run_id}")
    n = len(samples)
    avg = math.fsum(samples) / n - baseline_mw
    if avg < 0:
        raise ValueError(
            f"config {trace.config_id!r} run {trace.run_id}: mean power is below the "
            f"baseline of {baseline_mw} mW"
        )
    duration = n * delta_s
    return RunEnergy(trace.config_id, trace.run_id, duration, avg, duration * avg / 1000)


def t_halfwidth_factor(n: int, level: float = CI_LEVEL) -> float:
    """Student-t multiplier over sqrt(n); the CI half-width is this times the
    sample standard deviation."""
    if n < 2:
        return 0.0
    return float(sps.t.ppf(0.5 + level / 2, n - 1)) / math.sqrt(n)


def aggregate_config(runs: Sequence[RunEnergy], config: LayerSpec) -> ConfigEnergyStats:
    if not runs:
        raise ValueError("cannot aggregate an empty run list")
    ids = {r.config_id for r in runs}
    if len(ids) != 1:
        raise ValueError(f"runs mix several configurations: {sorted(ids)}")
    energies = [r.energy_j for r in runs]
    n = len(energies)
    mean = statistics.mean(energies)
    std = statistics.stdev(energies) if n > 1 else 0.0
    return ConfigEnergyStats(
        runs[0].config_id, n, mean, std, t_halfwidth_factor(n) * std,
        layer_load(config, LoadMode.EXACT),
    )


def power_histogram(runs: Sequence[RunEnergy], bins: int) -> List[Tuple[float, float]]:
    """Density histogram of per-run average power: (bin centre in mW, density)."""
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if not runs:
        raise ValueError("power_histogram needs at least one run")
    powers = np.array([r.avg_power_mw for r in runs], dtype=float)
    density, edges = np.histogram(powers, bins=bins, density=True)
    centres = (edges[:-1] + edges[1:]) / 2
    return list(zip(centres.tolist(), density.tolist()))


# --- synthetic campaigns -------------------------------------------------

def config_key(layer: LayerSpec) -> str:
    p = layer.payload
    if layer.kind is LayerKind.FC:
        return f"fc_{p.i_size}x{p.o_size}"
    key = f"conv_i{p.i_size}_c{p.ifm}_o{p.ofm}_k{p.ksize}_s{p.stride}"
    return key + (f"_p{p.padding}" if p.padding else "")


def model_energy(config: LayerSpec, profile: DeviceProfile) -> float:
    if config.kind is LayerKind.CONV2D:
        return energy_conv2d(config.payload, profile)
    return energy_fc(config.payload, profile)


def synthesize_traces(
    config: LayerSpec,
    profile: DeviceProfile,
    n_runs: int,
    mean_power_mw: float,
    power_std_mw: float,
    delta_s: float = DEFAULT_DELTA_S,
    seed: Union[int, np.random.SeedSequence, None] = 0,
    config_id: Optional[str] = None,
) -> List[PowerTrace]:
    """Gaussian power traces whose expected energy equals the model energy.

    The slot count is ``round(E / (mean_power_mw * 1e-3 * delta_s))`` (at least
    one). Since that count is an integer, the power level is then nudged to
    ``E / (slots * delta_s)`` so a noiseless run integrates to ``E``;
    ``power_std_mw`` is scaled by the same factor to keep the relative spread.
    Draws are clipped at 0 mW.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    if not mean_power_mw > 0:
        raise ValueError(f"mean_power_mw must be > 0, got {mean_power_mw}")
    if power_std_mw < 0:
        raise ValueError(f"power_std_mw must be >= 0, got {power_std_mw}")
    if not delta_s > 0:
        raise ValueError(f"delta_s must be > 0, got {delta_s}")
    energy = model_energy(config, profile)
    if not energy > 0:
        raise ValueError(f"model energy must be > 0, got {energy}")
    slots = max(1, round(energy / (mean_power_mw * 1e-3 * delta_s)))
    level = energy / (slots * delta_s * 1e-3)
    std = power_std_mw * level / mean_power_mw
    rng = np.random.default_rng(seed)
    if std > 0:
        draws = np.maximum(rng.normal(level, std, size=(n_runs, slots)), 0.0)
    else:
        draws = np.full((n_runs, slots), level)
    cid = config_id or config.label or config_key(config)
    return [PowerTrace(cid, run, tuple(row)) for run, row in enumerate(draws.tolist())]


# --- CSV I/O --------------------------------------------------------------

def write_traces(traces: Iterable[PowerTrace], out: TextIO) -> None:
    """Write traces sorted by (config_id, run_id), one sample per row."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for tr in sorted(traces, key=lambda t: (t.config_id, t.run_id)):
        cid, rid = tr.config_id, tr.run_id
        writer.writerows((cid, rid, i, repr(p)) for i, p in enumerate(tr.samples))


def read_traces(src: TextIO, known_configs: Optional[Mapping[str, object]] = None) -> Iterator[PowerTrace]:
    """Stream :class:`PowerTrace` objects from a trace CSV.

    Rows must be sorted by (config_id, run_id, slot_idx) with slot indices
    gapless from 0 within each run.
    """
    reader = csv.reader(src)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
        raise TraceFormatError(f"trace CSV header must be {','.join(TRACE_HEADER)}, got {header}")
    key = None
    samples: List[float] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise TraceFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
        cid = row[0]
        try:
            rid, slot, power = int(row[1]), int(row[2]), float(row[3])
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
        if known_configs is not None and cid not in known_configs:
            raise TraceFormatError(f"line {lineno}: config_id {cid!r} not in manifest")
        if not (power >= 0 and math.isfinite(power)):
            raise TraceFormatError(
                f"line {lineno}: invalid power {power!r} mW at config {cid!r} run {rid} slot {slot}"
            )
        new_key = (cid, rid)
        if new_key != key:
            if key is not None:
                if new_key < key:
                    raise TraceFormatError(
                        f"line {lineno}: rows not sorted by (config_id, run_id): {new_key} after {key}"
                    )
                yield PowerTrace(key[0], key[1], samples)
            key, samples = new_key, []
        if slot != len(samples):
            raise TraceFormatError(
                f"line {lineno}: slot_idx gap in config {cid!r} run {rid}: "
                f"expected {len(samples)}, got {slot}"
            )
        samples.append(power)
    if key is not None:
        yield PowerTrace(key[0], key[1], samples)


def stats_from_traces(
    traces: Iterable[PowerTrace], manifest: TraceManifest, baseline_mw: float = 0.0
) -> List[ConfigEnergyStats]:
    """Integrate and aggregate traces, one stats row per config in input order."""
    grouped: Dict[str, List[RunEnergy]] = {}
    for tr in traces:
        if tr.config_id not in manifest.configs:
            raise TraceFormatError(f"config_id {tr.config_id!r} not in manifest")
        grouped.setdefault(tr.config_id, []).append(integrate_run(tr, manifest.delta_s, baseline_mw))
    return [aggregate_config(runs, manifest.configs[cid]) for cid, runs in grouped.items()]


def write_stats(rows: Iterable[ConfigEnergyStats], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(STATS_HEADER)
    for s in rows:
        writer.writerow((s.config_id, s.n_runs, s.computational_load, repr(s.mean_energy_j),
                         repr(s.std_energy_j), repr(s.ci99_halfwidth_j)))


def read_stats(src: TextIO) -> List[ConfigEnergyStats]:
    reader = csv.reader(src)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != STATS_HEADER:
        raise TraceFormatError(f"stats CSV header must be {','.join(STATS_HEADER)}, got {header}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(STATS_HEADER):
            raise TraceFormatError(f"line {lineno}: expected {len(STATS_HEADER)} fields, got {len(row)}")
        try:
            out.append(ConfigEnergyStats(row[0], int(row[1]), float(row[3]), float(row[4]),
                                         float(row[5]), int(row[2])))
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
    return out


def stats_to_csv_text(rows: Iterable[ConfigEnergyStats]) -> str:
    buf = io.StringIO()
    write_stats(rows, buf)
    return buf.getvalue()
