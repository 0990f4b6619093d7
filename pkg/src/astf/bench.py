"""Synthetic state sequences and the algorithm comparison harness."""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import LossWeights
from .model import FrequencyFrame, StateSequence
from .segmentation import ALGORITHMS, SegmentationConfig

log = logging.getLogger(__name__)

DAY = 86_400
SPANS = {"week": 7 * DAY, "month": 30 * DAY}
COMPLEXITIES = {"moderate": 5.0, "high": 10.0}
MIN_DURATION = 5

ALGORITHM_ORDER = ("bssva", "el", "sw", "bu", "td", "fp")
REPORT_HEADER = ("algorithm", "group_span", "group_complexity", "signal_seed", "run", "loss", "time_s")


@dataclass(frozen=True)
class GeneratorConfig:
    span: str = "week"
    complexity: str = "moderate"
    seed: int = 0

    def __post_init__(self):
        if self.span not in SPANS:
            raise ValueError(f"span must be one of {sorted(SPANS)}")
        if self.complexity not in COMPLEXITIES:
            raise ValueError(f"complexity must be one of {sorted(COMPLEXITIES)}")

    @property
    def T(self) -> int:
        return SPANS[self.span]

    @property
    def cscps_per_day(self) -> float:
        return COMPLEXITIES[self.complexity]


def generate_bits(T: int, cscps_per_day: float, rng: np.random.Generator) -> np.ndarray:
    """Alternating on/off renewal process with exponential state durations."""
    if T < 1 or cscps_per_day <= 0:
        raise ValueError("need T >= 1 and a positive CSCP rate")
    mean = DAY / cscps_per_day
    state = int(rng.integers(0, 2))
    # enough draws to cover T with overwhelming probability; top up if not
    n_draw = int(T / mean * 2) + 16
    durations = np.empty(0, dtype=np.int64)
    while durations.sum() < T:
        more = np.maximum(np.rint(rng.exponential(mean, n_draw)).astype(np.int64), MIN_DURATION)
        durations = np.concatenate((durations, more))
    ends = np.cumsum(durations)
    k = int(np.searchsorted(ends, T, "left")) + 1
    states = (state + np.arange(k)) % 2
    bits = np.repeat(states.astype(np.uint8), durations[:k])[:T]
    return bits


def generate_sequence(cfg: GeneratorConfig, signal_id: str | None = None) -> StateSequence:
    rng = np.random.default_rng(cfg.seed)
    bits = generate_bits(cfg.T, cfg.cscps_per_day, rng)
    return StateSequence(signal_id or f"{cfg.span}-{cfg.complexity}-{cfg.seed}", 0, bits)


# -- synthetic spectrum capture ---------------------------------------------------

CAPTURE_T0 = 1_700_000_000
CAPTURE_START_FREQ = 100e6
CAPTURE_BIN_WIDTH = 250e3
CAPTURE_BINS = 144  # 100-136 MHz
NOISE_DBM = -100.0
MAX_GAP_S = 55  # below the tracker's 60 s horizon so each band keeps one signal_id


@dataclass(frozen=True)
class CaptureSignal:
    first_bin: int
    n_bins: int
    level_dbm: float
    mean_on_s: float  # 0 means always on
    mean_off_s: float


def _capture_plan(n_signals: int, rng: np.random.Generator) -> list[CaptureSignal]:
    widths = rng.integers(3, 9, n_signals)
    guard = 3
    spare = CAPTURE_BINS - int(widths.sum()) - guard * (n_signals + 1)
    if spare < 0:
        raise ValueError("too many signals for the capture band")
    extra = np.diff(np.sort(rng.integers(0, spare + 1, n_signals + 1)), prepend=0)
    levels = (-45.0, -58.0, -66.0, -78.0)
    plan = []
    b = 0
    for i in range(n_signals):
        b += guard + int(extra[i])
        mean_on = 0.0 if i == n_signals // 2 else float(rng.choice([20.0, 120.0, 900.0, 3600.0]))
        plan.append(CaptureSignal(b, int(widths[i]), levels[i % len(levels)], mean_on, float(rng.uniform(10, 40))))
        b += int(widths[i])
    return plan


def _schedule(sig: CaptureSignal, T: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean transmit mask; off gaps are kept in [MIN_DURATION + 1, MAX_GAP_S]."""
    if sig.mean_on_s == 0:
        return np.ones(T, dtype=bool)
    out = np.zeros(T, dtype=bool)
    t, on = 0, bool(rng.integers(0, 2))
    while t < T:
        if on:
            d = max(int(round(rng.exponential(sig.mean_on_s))), 1)
            out[t : t + d] = True
        else:
            d = int(np.clip(round(rng.exponential(sig.mean_off_s)), MIN_DURATION + 1, MAX_GAP_S))
        t += d
        on = not on
    return out


def synthesize_capture(T: int = DAY, n_signals: int = 10, seed: int = 0, n_anomalies: int = 4) -> list[FrequencyFrame]:
    """A deterministic 1 s capture on a 100-136 MHz grid with ``n_signals`` bands.

    Noise and signal ripple are bounded, so the only three-sigma outliers are
    the injected frequency, bandwidth and strength excursions.
    """
    rng = np.random.default_rng(seed)
    plan = _capture_plan(n_signals, rng)
    amps = rng.uniform(-1.5, 1.5, (T, CAPTURE_BINS)) + NOISE_DBM
    for sig in plan:
        mask = _schedule(sig, T, rng)
        rows = np.flatnonzero(mask)
        level = sig.level_dbm + rng.uniform(-1.0, 1.0, rows.size)
        lo, hi = sig.first_bin, sig.first_bin + sig.n_bins
        amps[rows, lo:hi] = level[:, None] + rng.uniform(-0.5, 0.5, (rows.size, hi - lo))
        for kind in rng.permutation(["frequency", "bandwidth", "strength"])[:n_anomalies]:
            if rows.size < 100:
                break
            t = int(rows[rng.integers(10, rows.size - 10)])
            if not mask[t : t + 3].all():
                continue
            base = amps[t, lo]
            if kind == "frequency":  # shift the band up one bin
                amps[t : t + 3, lo] = NOISE_DBM
                amps[t : t + 3, hi] = base
            elif kind == "bandwidth":  # widen by one bin on each side
                amps[t : t + 3, lo - 1] = base
                amps[t : t + 3, hi] = base
            else:
                amps[t : t + 3, lo:hi] += 12.0
    amps = np.round(amps, 1)
    return [FrequencyFrame(CAPTURE_T0 + k, CAPTURE_START_FREQ, CAPTURE_BIN_WIDTH, amps[k]) for k in range(T)]


def parse_groups(text: str) -> list[tuple[str, str]]:
    groups = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        span, _, complexity = item.partition(":")
        GeneratorConfig(span, complexity)  # validates
        groups.append((span, complexity))
    if not groups:
        raise ValueError("no benchmark groups given")
    return groups


ALL_GROUPS = [(s, c) for s in SPANS for c in COMPLEXITIES]


def signal_seed(base_seed: int, group_index: int, signal_index: int) -> int:
    return int(base_seed) * 1000 + group_index * 100 + signal_index


@dataclass
class BenchReport:
    rows: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    def summary(self) -> dict[tuple[str, str, str], tuple[float, float]]:
        """(algorithm, span, complexity) -> (avg loss, avg time)."""
        acc: dict = {}
        for r in self.rows:
            key = (r["algorithm"], r["group_span"], r["group_complexity"])
            acc.setdefault(key, []).append((r["loss"], r["time_s"]))
        return {k: (float(np.mean([v[0] for v in vs])), float(np.mean([v[1] for v in vs]))) for k, vs in acc.items()}

    def groups(self) -> list[tuple[str, str]]:
        seen = []
        for r in self.rows:
            g = (r["group_span"], r["group_complexity"])
            if g not in seen:
                seen.append(g)
        return seen

    def algorithms(self) -> list[str]:
        present = {r["algorithm"] for r in self.rows}
        return [a for a in ALGORITHM_ORDER if a in present]

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows + self.failures:
            loss = r["loss"]
            w.writerow(
                [
                    r["algorithm"],
                    r["group_span"],
                    r["group_complexity"],
                    r["signal_seed"],
                    r["run"],
                    "failed" if loss is None else repr(float(loss)),
                    "" if r["time_s"] is None else f"{r['time_s']:.6f}",
                ]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def table(self) -> str:
        """Plain-text table: loss rows then time rows, one column per algorithm."""
        summ = self.summary()
        algs = self.algorithms()
        head = f"{'Indicator':<12}{'Span':<7}{'Complexity':<11}" + "".join(f"{a.upper():>10}" for a in algs)
        lines = [head, "-" * len(head)]
        for label, idx, fmt in (("Avg loss", 0, "{:>10.3f}"), ("Avg time(s)", 1, "{:>10.4f}")):
            for span, cx in self.groups():
                cells = "".join(fmt.format(summ[(a, span, cx)][idx]) if (a, span, cx) in summ else f"{'-':>10}" for a in algs)
                lines.append(f"{label:<12}{span:<7}{cx:<11}" + cells)
        if self.failures:
            lines.append(f"{len(self.failures)} failed run(s) excluded from averages")
        return "\n".join(lines)


def build_suite(groups, signals_per_group: int, seed: int, threads: int = 1):
    """[(span, complexity, signal_seed, StateSequence)] in a fixed order."""
    specs = []
    for gi, (span, cx) in enumerate(groups):
        for si in range(signals_per_group):
            specs.append(GeneratorConfig(span, cx, signal_seed(seed, gi, si)))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        seqs = list(pool.map(generate_sequence, specs))
    return [(c.span, c.complexity, c.seed, s) for c, s in zip(specs, seqs)]


def run_benchmark(
    groups=None,
    signals_per_group: int = 8,
    runs: int = 10,
    seed: int = 0,
    algorithms=ALGORITHM_ORDER,
    cfg: SegmentationConfig | None = None,
    threads: int = 1,
) -> BenchReport:
    """Time every algorithm on every generated signal ``runs`` times.

    Generation may use several threads; the timed calls run one at a time so
    timings are not disturbed by concurrent work.
    """
    groups = list(groups or ALL_GROUPS)
    cfg = cfg or SegmentationConfig(weights=LossWeights())
    suite = build_suite(groups, signals_per_group, seed, threads)
    report = BenchReport()
    for span, cx, sseed, seq in suite:
        for name in algorithms:
            fn = ALGORITHMS[name]
            for run in range(runs):
                row = dict(algorithm=name, group_span=span, group_complexity=cx, signal_seed=sseed, run=run)
                try:
                    t0 = time.perf_counter()
                    res = fn(seq, cfg)
                    elapsed = time.perf_counter() - t0
                except Exception as exc:  # noqa: BLE001 - a failed run is reported, not fatal
                    log.warning("%s failed on %s/%s seed %d: %s", name, span, cx, sseed, exc)
                    report.failures.append(dict(row, loss=None, time_s=None, error=str(exc)))
                    continue
                report.rows.append(dict(row, loss=res.loss, time_s=elapsed))
    return report
