"""Command line entry point: ``astf process|segment|render|bench``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .abstraction import StrengthThresholds, abstract_signal, read_abstractions, write_abstractions
from .bench import ALGORITHM_ORDER, parse_groups, run_benchmark
from .metrics import LossWeights
from .model import AnomalyRecord, read_state_sequences, write_state_sequences
from .preprocess import (
    DataError,
    PreprocessConfig,
    binarize_states,
    detect_anomalies,
    group_by_signal,
    identify_signals,
    read_records_csv,
    read_spectrum_csv,
    write_records_csv,
)
from .render import RenderError, RenderSpec, render_diagram
from .segmentation import ALGORITHMS, SegmentationConfig, segmentation_from_dict

log = logging.getLogger("astf")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


# -- argument types ------------------------------------------------------------------


def _weights(text: str) -> LossWeights:
    try:
        return LossWeights.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _pair(cast: Callable):
    def parse(text: str):
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
        try:
            return tuple(cast(p) for p in parts)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- config file -----------------------------------------------------------------------


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment.

    A run manifest (JSON) is accepted too: its ``config`` section is used.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            manifest = json.loads(text)
            cfg = dict(manifest["config"], **manifest.get("seeds", {}))
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"{path}: not a run manifest ({exc})") from None
        return {k: _config_str(v) for k, v in cfg.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _config_str(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


# -- manifest ---------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, LossWeights):
        return list(v.as_tuple())
    if isinstance(v, tuple):
        return list(v)
    return v


def write_manifest(
    path: Path,
    command: str,
    inputs: dict,
    outputs: dict,
    config: dict,
    seeds: dict | None = None,
    fixed: dict | None = None,
):
    """Everything needed to repeat a run; no timestamps, so reruns match byte for byte."""
    manifest = {
        "tool": "astf",
        "version": __version__,
        "command": command,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "config": {k: _jsonable(v) for k, v in config.items()},
        "seeds": seeds or {},
    }
    if fixed:
        manifest["fixed"] = fixed
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- commands ---------------------------------------------------------------------------


def cmd_process(args) -> int:
    cfg = PreprocessConfig(
        noise_margin_db=args.noise_margin_db,
        min_bandwidth_bins=args.min_bandwidth_bins,
        track_overlap_ratio=args.track_overlap_ratio,
    )
    frames = read_spectrum_csv(args.spectrum)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if frames:
        records = identify_signals(frames, cfg)
        t0, T = frames[0].timestamp, len(frames)
    else:
        records, t0, T = [], 0, 0
    groups = group_by_signal(records)

    def per_signal(item):
        sid, recs = item
        return binarize_states(recs, t0, T, sid), detect_anomalies(recs)

    results = _pool_map(per_signal, list(groups.items()), args.threads)
    seqs = [r[0] for r in results]
    anomalies = [a for r in results for a in r[1]]
    anomalies.sort(key=lambda a: (a.timestamp, a.signal_id))
    paths = {"records": out / "records.csv", "states": out / "states.txt", "anomalies": out / "anomalies.json"}
    write_records_csv(paths["records"], records)
    write_state_sequences(paths["states"], seqs)
    paths["anomalies"].write_text(
        json.dumps([{"timestamp": a.timestamp, "signal_id": a.signal_id, "kind": a.kind} for a in anomalies], indent=1)
        + "\n"
    )
    config = {
        "noise_margin_db": cfg.noise_margin_db,
        "min_bandwidth_bins": cfg.min_bandwidth_bins,
        "track_overlap_ratio": cfg.track_overlap_ratio,
    }
    fixed = {"state_window_s": cfg.state_window_s, "pauta_k": cfg.pauta_k}
    write_manifest(out / "manifest.json", "process", {"spectrum": args.spectrum}, paths, config, fixed=fixed)
    log.info("%d frames, %d signals, %d records, %d anomalies", len(frames), len(seqs), len(records), len(anomalies))
    return EXIT_OK


def _seg_config(args) -> SegmentationConfig:
    n_min, n_max = args.n_range
    try:
        return SegmentationConfig(n_min=n_min, n_max=n_max, weights=args.weights)
    except ValueError as exc:
        raise UsageError(f"--n-range: {exc}") from None


def cmd_segment(args) -> int:
    cfg = _seg_config(args)
    seqs = read_state_sequences(args.states)
    fn = ALGORITHMS[args.algorithm]
    results = _pool_map(lambda s: fn(s, cfg), seqs, args.threads)
    out = Path(args.out)
    out.write_text(json.dumps([r.to_dict(s.signal_id, cfg.weights) for s, r in zip(seqs, results)], indent=1) + "\n")
    config = {"algorithm": args.algorithm, "weights": cfg.weights, "n_range": (cfg.n_min, cfg.n_max)}
    write_manifest(_manifest_path(out), "segment", {"states": args.states}, {"segments": out}, config)
    for s, r in zip(seqs, results):
        log.info("%s: n=%d loss=%.6f", s.signal_id, r.n, r.loss)
    return EXIT_OK


def _read_anomalies(path) -> list[AnomalyRecord]:
    try:
        return [AnomalyRecord(int(o["timestamp"]), str(o["signal_id"]), str(o["kind"])) for o in json.loads(Path(path).read_text())]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed anomalies file ({exc})") from None


def _build_abstractions(args, th: StrengthThresholds):
    missing = [f for f in ("records", "states", "segments") if getattr(args, f) is None]
    if missing:
        raise UsageError("render needs --abstractions, or all of --records, --states and --segments")
    records = group_by_signal(read_records_csv(args.records))
    seqs = read_state_sequences(args.states)
    segs = {}
    for obj in json.loads(Path(args.segments).read_text()):
        segs[obj["signal_id"]] = segmentation_from_dict(obj)
    anomalies: dict[str, list[AnomalyRecord]] = {}
    if args.anomalies is not None:
        for a in _read_anomalies(args.anomalies):
            anomalies.setdefault(a.signal_id, []).append(a)
    for s in seqs:
        if s.signal_id not in segs:
            raise DataError(f"no segmentation for signal {s.signal_id!r} in {args.segments}")

    def one(seq):
        return abstract_signal(seq, segs[seq.signal_id], records.get(seq.signal_id, []), anomalies.get(seq.signal_id, []), th)

    return _pool_map(one, seqs, args.threads)


def _auto_freq_range(abstractions) -> tuple[float, float]:
    if not abstractions:
        return RenderSpec().freq_range
    lo = min(a.center_freq - a.bandwidth / 2 for a in abstractions)
    hi = max(a.center_freq + a.bandwidth / 2 for a in abstractions)
    pad = max(0.05 * (hi - lo), 1e6)
    return (lo - pad, hi + pad)


def cmd_render(args) -> int:
    if args.high_dbm <= args.low_dbm:
        raise UsageError("--high-dbm must exceed --low-dbm")
    th = StrengthThresholds(args.high_dbm, args.low_dbm)
    if args.abstractions is not None:
        abstractions = read_abstractions(args.abstractions)
        inputs = {"abstractions": args.abstractions}
    else:
        abstractions = _build_abstractions(args, th)
        inputs = {"records": args.records, "states": args.states, "segments": args.segments, "anomalies": args.anomalies}
    freq_range = args.freq_range or _auto_freq_range(abstractions)
    try:
        spec = RenderSpec(
            canvas_width=args.width,
            canvas_height=args.height,
            freq_range=freq_range,
            time_ticks=args.time_ticks,
            freq_ticks=args.freq_ticks,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    svg = render_diagram(abstractions, spec)
    out = Path(args.out)
    out.write_text(svg)
    outputs = {"diagram": out}
    if args.save_abstractions:
        write_abstractions(args.save_abstractions, abstractions)
        outputs["abstractions"] = Path(args.save_abstractions)
    config = {
        "freq_range": freq_range,
        "width": spec.canvas_width,
        "height": spec.canvas_height,
        "time_ticks": spec.time_ticks,
        "freq_ticks": spec.freq_ticks,
        "high_dbm": th.high_dbm,
        "low_dbm": th.low_dbm,
    }
    write_manifest(_manifest_path(out), "render", inputs, outputs, config)
    log.info("rendered %d signals to %s", len(abstractions), out)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        groups = parse_groups(args.groups)
    except ValueError as exc:
        raise UsageError(f"--groups: {exc}") from None
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown or not algorithms:
        raise UsageError(f"--algorithms: unknown {unknown}; choose from {','.join(ALGORITHM_ORDER)}")
    cfg = _seg_config(args)
    report = run_benchmark(groups, args.signals, args.runs, args.seed, algorithms, cfg, args.threads)
    print(report.table())
    if args.out:
        out = Path(args.out)
        report.to_csv(out)
        config = {
            "groups": args.groups,
            "runs": args.runs,
            "signals": args.signals,
            "algorithms": ",".join(algorithms),
            "weights": cfg.weights,
            "n_range": (cfg.n_min, cfg.n_max),
        }
        write_manifest(_manifest_path(out), "bench", {}, {"report": out}, config, {"seed": args.seed})
    return EXIT_OK if not report.failures else EXIT_DATA


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="astf", description="Abstract signal time-frequency diagrams from spectrum captures.")
    p.add_argument("--version", action="version", version=f"astf {__version__}")
    p.add_argument("--config", help="flat key = value file (or a run manifest); flags override it")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads (default 1)")
    p.add_argument("--quiet", action="store_true", help="only report errors")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    sp = sub.add_parser("process", help="spectrum CSV -> records, state sequences, anomalies")
    sp.add_argument("spectrum", help="spectrum CSV (.csv or .csv.gz)")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--noise-margin-db", type=float, default=6.0)
    sp.add_argument("--min-bandwidth-bins", type=_positive_int, default=3)
    sp.add_argument("--track-overlap-ratio", type=float, default=0.5)
    sp.set_defaults(func=cmd_process)

    def seg_flags(q):
        q.add_argument("--weights", type=_weights, default=LossWeights(), help="w1,w2,w3 in (0,1], summing to 1")
        q.add_argument("--n-range", type=_pair(int), default=(30, 50), help="min,max slice count (default 30,50)")

    sp = sub.add_parser("segment", help="state sequences -> segmentation JSON")
    sp.add_argument("states", help="state sequence file written by process")
    sp.add_argument("--out", required=True)
    sp.add_argument("--algorithm", choices=sorted(ALGORITHMS), default="bssva")
    seg_flags(sp)
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("render", help="segmented signals -> SVG diagram")
    sp.add_argument("--abstractions", help="abstractions JSON (instead of the raw inputs)")
    sp.add_argument("--records")
    sp.add_argument("--states")
    sp.add_argument("--segments")
    sp.add_argument("--anomalies")
    sp.add_argument("--out", required=True)
    sp.add_argument("--save-abstractions", help="also write the abstractions JSON here")
    sp.add_argument("--freq-range", type=_pair(float), help="f_lo,f_hi in Hz (default: fit the signals)")
    sp.add_argument("--width", type=_positive_int, default=900)
    sp.add_argument("--height", type=_positive_int, default=700)
    sp.add_argument("--time-ticks", type=_positive_int, default=8)
    sp.add_argument("--freq-ticks", type=_positive_int, default=6)
    sp.add_argument("--high-dbm", type=float, default=-50.0)
    sp.add_argument("--low-dbm", type=float, default=-70.0)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("bench", help="compare the segmentation algorithms on synthetic signals")
    sp.add_argument("--groups", default="week:moderate,week:high,month:moderate,month:high")
    sp.add_argument("--runs", type=_positive_int, default=10)
    sp.add_argument("--signals", type=_positive_int, default=8, help="signals per group")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--algorithms", default=",".join(ALGORITHM_ORDER))
    sp.add_argument("--out", help="report CSV")
    seg_flags(sp)
    sp.set_defaults(func=cmd_bench)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        values = read_config(known.config)
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        dests = {a.dest for a in parser._actions}
        for sp in subparsers.choices.values():
            dests |= {a.dest for a in sp._actions}
        unknown = sorted(set(values) - dests - {"help", "func", "command", "config"})
        if unknown:
            raise UsageError(f"{known.config}: unknown key(s) {', '.join(unknown)}")
        if "quiet" in values:
            try:
                values["quiet"] = _bool(values["quiet"])
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"{known.config}: quiet: {exc}") from None
        # string defaults go through each option's type, so config values are validated like flags
        parser.set_defaults(**{k: v for k, v in values.items() if k in {"threads", "quiet"}})
        for sp in subparsers.choices.values():
            own = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in values.items() if k in own})
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not log.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
        log.propagate = False
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, RenderError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
