"""Spectrum frames -> signal records, state sequences and anomaly records.

Signals are found per frame as runs of contiguous bins above the noise floor
plus a margin, and linked across frames into tracks by frequency overlap.
"""

from __future__ import annotations

import csv
import gzip
import io
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import AnomalyRecord, FrequencyFrame, SignalRecord, StateSequence

STATE_WINDOW_S = 5
PAUTA_K = 3.0
TRACK_HORIZON_S = 60

RECORD_HEADER = ("timestamp", "signal_id", "center_freq_hz", "bandwidth_hz", "strength_dbm", "snr_db")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class PreprocessConfig:
    noise_margin_db: float = 6.0
    min_bandwidth_bins: int = 3
    track_overlap_ratio: float = 0.5
    state_window_s: int = STATE_WINDOW_S
    pauta_k: float = PAUTA_K

    def __post_init__(self):
        if not self.noise_margin_db > 0:
            raise ValueError("noise_margin_db must be positive")
        if not 0 < self.track_overlap_ratio <= 1:
            raise ValueError("track_overlap_ratio must lie in (0, 1]")
        if self.min_bandwidth_bins < 1:
            raise ValueError("min_bandwidth_bins must be at least 1")
        if self.state_window_s != STATE_WINDOW_S or self.pauta_k != PAUTA_K:
            raise ValueError("state window (5 s) and Pauta k (3.0) are fixed")


def _stack(frames: Sequence[FrequencyFrame]):
    if not frames:
        raise DataError("no frames")
    f0 = frames[0]
    for f in frames:
        if f.start_freq != f0.start_freq or f.bin_width != f0.bin_width or f.n_bins != f0.n_bins:
            raise DataError(f"frame at t={f.timestamp} is on a different frequency grid")
    return np.vstack([f.amplitudes for f in frames])


def estimate_noise_floor(frames: Sequence[FrequencyFrame]) -> float:
    """Median amplitude over every bin of every frame."""
    if not frames:
        raise DataError("no frames")
    return float(np.median(_stack(frames)))


def _runs(mask: np.ndarray, min_len: int):
    """(frame index, first bin, last bin + 1) of every run of True of length >= min_len."""
    rows, nb = mask.shape
    padded = np.zeros((rows, nb + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    d = np.diff(padded, axis=1)
    sr, sc = np.nonzero(d == 1)
    er, ec = np.nonzero(d == -1)
    # both lists are row-major, so starts and ends pair up in order
    keep = (ec - sc) >= min_len
    return sr[keep], sc[keep], ec[keep]


def identify_signals(
    frames: Sequence[FrequencyFrame],
    cfg: PreprocessConfig | None = None,
    noise_floor: float | None = None,
) -> list[SignalRecord]:
    """Detect and track signals; records come out sorted by (timestamp, signal_id).

    A detection joins the open track whose last frequency interval overlaps it
    best, provided intersection-over-union reaches ``track_overlap_ratio``.
    Tracks silent for more than 60 s are closed.
    """
    cfg = cfg or PreprocessConfig()
    amps = _stack(frames)
    floor = estimate_noise_floor(frames) if noise_floor is None else noise_floor
    f0, bw = frames[0].start_freq, frames[0].bin_width
    mask = amps >= floor + cfg.noise_margin_db
    fr, b0, b1 = _runs(mask, cfg.min_bandwidth_bins)
    csum = np.concatenate((np.zeros((amps.shape[0], 1)), np.cumsum(amps, axis=1)), axis=1)
    strength = (csum[fr, b1] - csum[fr, b0]) / (b1 - b0)

    tracks: dict[int, list[int]] = {}  # track number -> [lo bin, hi bin, last seen]
    by_interval: dict[tuple[int, int], set[int]] = defaultdict(set)
    n_tracks = 0
    starts = np.searchsorted(fr, np.arange(len(frames) + 1)).tolist()
    lo_bins, hi_bins = b0.tolist(), b1.tolist()
    det_num = [0] * fr.size
    ratio = cfg.track_overlap_ratio
    for i, frame in enumerate(frames):
        t = frame.timestamp
        for num in [num for num, tr in tracks.items() if t - tr[2] > TRACK_HORIZON_S]:
            lo, hi, _ = tracks.pop(num)
            by_interval[(lo, hi)].discard(num)
        dets = range(starts[i], starts[i + 1])
        if not dets:
            continue
        assigned: dict[int, int] = {}
        # an identical interval is an overlap of 1, which the greedy pass takes
        # first; when it is unique it cannot conflict with anything else
        for k in dets:
            owners = by_interval.get((lo_bins[k], hi_bins[k]))
            if owners and len(owners) == 1:
                assigned[k] = next(iter(owners))
        rest = [k for k in dets if k not in assigned]
        if rest:
            taken = set(assigned.values())
            pairs = []
            for k in rest:
                d0, d1 = lo_bins[k], hi_bins[k]
                for num, (lo, hi, _) in tracks.items():
                    if num in taken:
                        continue
                    inter = min(d1, hi) - max(d0, lo)
                    if inter > 0:
                        ov = inter / (max(d1, hi) - min(d0, lo))
                        if ov >= ratio:
                            pairs.append((-ov, num, k))
            pairs.sort()  # best overlap first, then track number, then detection
            for _, num, k in pairs:
                if k not in assigned and num not in taken:
                    assigned[k] = num
                    taken.add(num)
        for k in dets:  # already in ascending frequency order
            num = assigned.get(k)
            if num is None:
                n_tracks += 1
                num = n_tracks
            else:
                lo, hi, _ = tracks[num]
                by_interval[(lo, hi)].discard(num)
            tracks[num] = [lo_bins[k], hi_bins[k], t]
            by_interval[(lo_bins[k], hi_bins[k])].add(num)
            det_num[k] = num

    ts = np.array([f.timestamp for f in frames], dtype=np.int64)
    lo_f = f0 + b0 * bw
    hi_f = f0 + b1 * bw
    center = (lo_f + hi_f) / 2
    width = hi_f - lo_f
    records = [
        SignalRecord(
            timestamp=int(ts[fr[k]]),
            signal_id=f"S{det_num[k]:03d}",
            center_freq=float(center[k]),
            bandwidth=float(width[k]),
            strength=float(strength[k]),
            snr=max(float(strength[k]) - floor, 0.0),
        )
        for k in range(fr.size)
    ]
    records.sort(key=lambda r: (r.timestamp, r.signal_id))
    return records


def group_by_signal(records: Iterable[SignalRecord]) -> dict[str, list[SignalRecord]]:
    out: dict[str, list[SignalRecord]] = defaultdict(list)
    for r in records:
        out[r.signal_id].append(r)
    for v in out.values():
        v.sort(key=lambda r: r.timestamp)
    return dict(sorted(out.items()))


def binarize_states(records: Sequence[SignalRecord], t0: int, T: int, signal_id: str | None = None) -> StateSequence:
    """Bit ``t`` is 1 when the signal has a record within the trailing 5 s window ``(t-5, t]``."""
    if signal_id is None:
        if not records:
            raise ValueError("signal_id is required when there are no records")
        signal_id = records[0].signal_id
    for r in records:
        if r.signal_id != signal_id:
            raise ValueError(f"record for {r.signal_id!r} mixed into {signal_id!r}")
    ks = np.array([r.timestamp - t0 for r in records], dtype=np.int64)
    bad = (ks < 0) | (ks >= T)
    if bad.any():
        t = records[int(np.flatnonzero(bad)[0])].timestamp
        raise DataError(f"record at t={t} outside capture span [{t0}, {t0 + T})")
    hits = np.zeros(T, dtype=np.int64)
    hits[ks] = 1
    c = np.cumsum(hits)
    window = c.copy()
    if T > STATE_WINDOW_S:
        window[STATE_WINDOW_S:] -= c[:-STATE_WINDOW_S]
    return StateSequence(signal_id, t0, (window > 0).astype(np.uint8))


_CHARACTERISTICS = (
    ("frequency", "center_freq"),
    ("bandwidth", "bandwidth"),
    ("strength", "strength"),
    ("snr", "snr"),
)


def detect_anomalies(records: Sequence[SignalRecord]) -> list[AnomalyRecord]:
    """Values strictly outside mean +/- 3 population standard deviations.

    Each characteristic is handled on its own; values are measured from the
    first sample before taking moments, so shifting a whole series by a
    constant cannot change the verdict through rounding.
    """
    if len(records) < 2:
        return []
    out = []
    ts = [r.timestamp for r in records]
    for kind, attr in _CHARACTERISTICS:
        x = np.array([getattr(r, attr) for r in records], dtype=float)
        x = x - x[0]
        if not np.ptp(x) > 0:
            continue
        mu = x.mean()
        sigma = x.std()
        outside = np.abs(x - mu) > PAUTA_K * sigma
        out.extend(AnomalyRecord(ts[k], records[k].signal_id, kind) for k in np.flatnonzero(outside))
    out.sort(key=lambda a: (a.timestamp, [k for k, _ in _CHARACTERISTICS].index(a.kind)))
    return out


# -- file formats ----------------------------------------------------------------


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), newline="")
    return open(path, newline="")


def read_spectrum_csv(path: str | Path) -> list[FrequencyFrame]:
    """One frame per row: ``timestamp,start_freq_hz,bin_width_hz,a0,a1,...``.

    A header row starting with ``timestamp`` is allowed.  Consecutive frames
    must be 1 s apart on a common grid.
    """
    frames = []
    with _open_text(path) as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "timestamp"):
                continue
            try:
                if len(row) < 4:
                    raise ValueError("need timestamp, start_freq, bin_width and at least one amplitude")
                amps = np.array([float(v) for v in row[3:]])
                if not np.isfinite(amps).all():
                    raise ValueError("non-finite amplitude")
                frame = FrequencyFrame(int(row[0]), float(row[1]), float(row[2]), amps)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row: {exc}") from None
            if frames:
                prev = frames[-1]
                if frame.timestamp != prev.timestamp + 1:
                    raise DataError(f"{path}:{lineno}: timestamp {frame.timestamp} does not follow {prev.timestamp} by 1 s")
                if (frame.start_freq, frame.bin_width, frame.n_bins) != (prev.start_freq, prev.bin_width, prev.n_bins):
                    raise DataError(f"{path}:{lineno}: frequency grid differs from the previous row")
            frames.append(frame)
    return frames


def write_spectrum_csv(path: str | Path, frames: Sequence[FrequencyFrame], decimals: int = 1) -> None:
    opener = gzip.open(path, "wt", newline="") if str(path).endswith(".gz") else open(path, "w", newline="")
    with opener as fh:
        n_bins = frames[0].n_bins if frames else 0
        fh.write(",".join(["timestamp", "start_freq_hz", "bin_width_hz", *(f"a{i}" for i in range(n_bins))]) + "\n")
        for f in frames:
            row_fmt = ",".join([f"%.{decimals}f"] * f.n_bins)
            fh.write(f"{f.timestamp},{f.start_freq:g},{f.bin_width:g}," + row_fmt % tuple(f.amplitudes.tolist()) + "\n")


def write_records_csv(path: str | Path, records: Sequence[SignalRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow([r.timestamp, r.signal_id, repr(r.center_freq), repr(r.bandwidth), repr(r.strength), repr(r.snr)])


def read_records_csv(path: str | Path) -> list[SignalRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return out
        if tuple(h.strip() for h in header) != RECORD_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(RECORD_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(SignalRecord(int(row[0]), row[1], float(row[2]), float(row[3]), float(row[4]), float(row[5])))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: malformed record: {exc}") from None
    return out
