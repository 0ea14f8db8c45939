"""``edgewatt`` command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 device not calibrated for a requested layer kind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import List, Optional, Sequence

from . import __version__
from .arch import LayerKind, LoadMode, kclc, layer_load, network_from_dict
from .calibrate import calibrate
from .campaign import (
    DEFAULT_FC,
    DEFAULT_I_SIZES,
    DEFAULT_IFMS,
    DEFAULT_KSIZES,
    DEFAULT_MEAN_POWER_MW,
    DEFAULT_OFMS,
    DEFAULT_STRIDES,
    conv_grid,
    fc_grid,
    synthesize_campaign,
)
from .errors import CalibrationGapError, DegenerateDesignError, EdgewattError
from .estimate import LayerCalibrationGap, cumulative_profile, estimate_network
from .profiles import all_profiles, load_profile, resolve_device, save_profile
from .traces import (
    DEFAULT_DELTA_S,
    read_manifest,
    read_stats,
    read_traces,
    stats_from_traces,
    write_manifest,
    write_stats,
    write_traces,
)

log = logging.getLogger("edgewatt")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_UNCALIBRATED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _g(x: float) -> str:
    return f"{x:.6g}"


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _fc_list(text: str):
    out = []
    for item in text.split(","):
        try:
            i, o = item.lower().split("x")
            out.append((int(i), int(o)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"FC shape must look like 1024x512, got {item!r}") from None
    return out


def _profile_from_args(args):
    if args.profile:
        return load_profile(args.profile)
    if args.device:
        try:
            return resolve_device(args.device)
        except KeyError as exc:
            raise ValueError(exc.args[0]) from None
    raise UsageError("one of --profile or --device is required")


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- subcommands ----------------------------------------------------------

def cmd_estimate(args) -> int:
    arch = network_from_dict(_read_json(args.arch), skip_unknown=args.skip_unknown)
    profile = _profile_from_args(args)
    skipped = dict(arch.skipped)
    file_index = [i for i in range(len(arch.layers) + len(skipped)) if i not in skipped]
    for idx, kind in arch.skipped:
        log.warning("layer %d has unknown kind %r; counted as 0 J", idx, kind)
    try:
        est = estimate_network(arch, profile)
    except LayerCalibrationGap as exc:
        raise CalibrationGapError(f"layer {file_index[exc.index]} ({exc.kind.value}): {exc.reason}") from None

    if args.format == "json":
        doc = est.to_dict()
        if skipped:
            doc["skipped"] = [{"index": i, "kind": k} for i, k in arch.skipped]
            for entry in doc["layers"]:
                entry["index"] = file_index[entry["index"]]
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
        return EXIT_OK

    rows = []
    for le, (_, cum) in zip(est.per_layer, cumulative_profile(est)):
        rows.append((file_index[le.index], le.kind.value, le.load, le.energy_j, cum))
    for idx, kind in arch.skipped:
        rows.append((idx, f"skipped:{kind}", 0, 0.0, None))
    rows.sort(key=lambda r: r[0])

    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("index", "kind", "load", "energy_j", "cumulative_j"))
        for idx, kind, load, energy, cum in rows:
            writer.writerow((idx, kind, load, repr(energy), "" if cum is None else repr(cum)))
        writer.writerow(("total", "", sum(le.load for le in est.per_layer), repr(est.total_j), ""))
        sys.stdout.write(buf.getvalue())
        return EXIT_OK

    body = [(str(i), k, str(l), _g(e), "-" if c is None else _g(c)) for i, k, l, e, c in rows]
    print(f"network: {est.network_name}   device: {est.device_id}")
    print(_table(("index", "kind", "load_mac", "energy_j", "cumulative_j"), body))
    print(f"total_j: {_g(est.total_j)}")
    return EXIT_OK


def cmd_load(args) -> int:
    arch = network_from_dict(_read_json(args.arch), skip_unknown=args.skip_unknown)
    mode = LoadMode(args.mode)
    rows = []
    for i, layer in enumerate(arch.layers):
        per_kernel = kclc(layer.payload, mode) if layer.kind is LayerKind.CONV2D else None
        rows.append({"index": i, "kind": layer.kind.value, "kclc": per_kernel,
                     "load": layer_load(layer, mode)})
    total = sum(r["load"] for r in rows)
    if args.format == "json":
        print(json.dumps({"network": arch.name, "mode": mode.value, "layers": rows, "total": total}, indent=2))
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("index", "kind", "kclc", "load"))
        for r in rows:
            writer.writerow((r["index"], r["kind"], "" if r["kclc"] is None else r["kclc"], r["load"]))
        sys.stdout.write(buf.getvalue())
    else:
        def fmt(v):
            return "-" if v is None else (str(v) if isinstance(v, int) else _g(v))
        body = [(str(r["index"]), r["kind"], fmt(r["kclc"]), fmt(r["load"])) for r in rows]
        print(f"network: {arch.name}   mode: {mode.value}")
        print(_table(("index", "kind", "kclc_mac", "load_mac"), body))
        print(f"total_mac: {fmt(total)}")
    return EXIT_OK


def cmd_trace_energy(args) -> int:
    manifest = read_manifest(args.manifest)
    with open(args.traces, encoding="utf-8", newline="") as fh:
        stats = stats_from_traces(read_traces(fh, manifest.configs), manifest, args.baseline_mw)
    if not stats:
        raise ValueError(f"{args.traces}: no trace rows")
    buf = io.StringIO()
    write_stats(stats, buf)
    _emit(buf.getvalue(), args.out)
    if args.out:
        print(f"wrote {len(stats)} config rows to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    manifest = read_manifest(args.manifest)
    with open(args.stats, encoding="utf-8", newline="") as fh:
        stats = read_stats(fh)
    cal = calibrate(stats, manifest.configs, args.device_id or manifest.device_id)
    if cal.fc is None:
        log.warning("no FC calibration data; profile has no a_f")
    if args.out:
        save_profile(cal.profile, args.out)
    sys.stdout.write(json.dumps(cal.report(), indent=2) + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    profile = _profile_from_args(args)
    configs = conv_grid(args.ofm, args.i_size, args.ifm, args.ksize, args.stride)
    if not args.no_fc:
        configs += fc_grid(args.fc)
    manifest, traces = synthesize_campaign(
        configs, profile, args.runs, args.mean_power_mw, args.power_std_mw, args.delta_s, args.seed
    )
    with open(args.traces, "w", encoding="utf-8", newline="") as fh:
        write_traces(traces, fh)
    write_manifest(manifest, args.manifest)
    print(f"wrote {len(traces)} runs over {len(manifest.configs)} configs to {args.traces}; "
          f"manifest {args.manifest}")
    return EXIT_OK


def cmd_devices(args) -> int:
    profiles = all_profiles()
    if args.format == "json":
        print(json.dumps([p.to_dict() for p in profiles.values()], indent=2))
        return EXIT_OK
    body = [
        (p.device_id, repr(p.a_c), repr(p.b_c), "-" if p.a_f is None else repr(p.a_f))
        for p in profiles.values()
    ]
    print(_table(("device_id", "a_c", "b_c", "a_f"), body))
    print("units: J_per_MAC")
    return EXIT_OK


# --- wiring ---------------------------------------------------------------

def _add_profile_flags(p):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--profile", help="device profile JSON file")
    group.add_argument("--device", help="bundled or user device id (see `devices`)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edgewatt", description="Inference energy estimation for edge devices.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("estimate", help="estimate network energy on a device")
    p.add_argument("arch", help="architecture JSON file")
    _add_profile_flags(p)
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--skip-unknown", action="store_true",
                   help="treat unknown layer kinds as 0 J with a warning instead of failing")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("load", help="per-layer computational load in MACs")
    p.add_argument("arch", help="architecture JSON file")
    p.add_argument("--mode", choices=("exact", "approx"), default="exact")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--skip-unknown", action="store_true", help="ignore unknown layer kinds")
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("trace-energy", help="integrate power traces into per-config energy stats")
    p.add_argument("traces", help="trace CSV (config_id,run_id,slot_idx,power_mw)")
    p.add_argument("manifest", help="manifest JSON")
    p.add_argument("--out", help="stats CSV path (default: stdout)")
    p.add_argument("--baseline-mw", type=float, default=0.0,
                   help="idle power subtracted from every run's mean power")
    p.set_defaults(func=cmd_trace_energy)

    p = sub.add_parser("fit", help="fit device coefficients from energy stats")
    p.add_argument("stats", help="stats CSV produced by trace-energy")
    p.add_argument("manifest", help="manifest JSON describing the configs")
    p.add_argument("--device-id", help="id for the fitted profile (default: manifest device_id)")
    p.add_argument("--out", help="write the fitted device profile JSON here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="generate a synthetic measurement campaign")
    _add_profile_flags(p)
    p.add_argument("--traces", required=True, help="output trace CSV")
    p.add_argument("--manifest", required=True, help="output manifest JSON")
    p.add_argument("--ofm", type=_int_list, default=list(DEFAULT_OFMS), help="comma-separated ofm values")
    p.add_argument("--i-size", type=_int_list, default=list(DEFAULT_I_SIZES))
    p.add_argument("--ifm", type=_int_list, default=list(DEFAULT_IFMS))
    p.add_argument("--ksize", type=_int_list, default=list(DEFAULT_KSIZES))
    p.add_argument("--stride", type=_int_list, default=list(DEFAULT_STRIDES))
    p.add_argument("--fc", type=_fc_list, default=list(DEFAULT_FC),
                   help="comma-separated FC shapes, e.g. 256x128,512x256")
    p.add_argument("--no-fc", action="store_true", help="conv configs only")
    p.add_argument("--runs", type=int, default=50, help="runs per config")
    p.add_argument("--mean-power-mw", type=float, default=DEFAULT_MEAN_POWER_MW)
    p.add_argument("--power-std-mw", type=float, default=0.0, help="per-slot power std-dev")
    p.add_argument("--delta-s", type=float, default=DEFAULT_DELTA_S, help="timeslot length in seconds")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("devices", help="list bundled and user device profiles")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_devices)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="warning: %(message)s", stream=sys.stderr, force=True)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"edgewatt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CalibrationGapError as exc:
        print(f"edgewatt: calibration missing: {exc}", file=sys.stderr)
        return EXIT_UNCALIBRATED
    except DegenerateDesignError as exc:
        print(f"edgewatt: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EdgewattError, ValueError, OSError) as exc:
        print(f"edgewatt: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
