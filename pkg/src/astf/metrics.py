"""Information-loss metrics between a segmented sequence and its glyphs.

Three metrics compare the data space (the bit sequence cut into slices) with
the visual space (a stripe cut into ``n`` equal cells):

``sim_cd``
    Sum of normalized distances between each glyph's visual CSCP location and
    the mean location of the CSCPs of the same kind in the matching slice.
``dif_dr``
    Absolute difference between the actual duty ratio and the mean filled
    area fraction of the glyphs.
``cv_ts``
    Coefficient of variation of the slice spans.

The functions named after each metric follow the definitions step by step and
are meant to be read.  :class:`LossModel` evaluates the same quantities for
whole batches of segmentations with numpy and is what the optimizers use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    FALLING,
    RISING,
    Cscp,
    Segmentation,
    StateSequence,
    cscps_in_slice,
    entry_state,
    extract_cscps,
)

N_CLASSES = 10

# Fill fraction of each glyph: a half-cell rectangle is 1/2 and a half-cell
# isosceles triangle 1/4.  Index 0 is unused.
VISUAL_DUTY_RATIO = (math.nan, 0.0, 1.0, 0.75, 0.75, 0.5, 0.5, 0.75, 0.75, 0.5, 0.5)

# Where inside a cell (as a fraction of its length) the visual rising/falling
# location sits, per class; nan when the glyph has no triangle of that kind.
_Q1, _Q3, _NONE = 0.25, 0.75, math.nan
_RISING_Q = (_NONE, _NONE, _NONE, _NONE, _Q1, _Q1, _Q3, _NONE, _Q1, _Q1, _Q3)
_FALLING_Q = (_NONE, _NONE, _NONE, _Q3, _NONE, _Q3, _Q1, _Q3, _NONE, _Q3, _Q1)


@dataclass(frozen=True)
class LossWeights:
    w1: float = 1 / 3
    w2: float = 1 / 3
    w3: float = 1 / 3

    def __post_init__(self):
        ws = (self.w1, self.w2, self.w3)
        for w in ws:
            if not (0 < w <= 1):
                raise ValueError(f"weights must lie in (0, 1], got {ws}")
        if abs(sum(ws) - 1) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {ws} (sum {sum(ws)})")

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(*(float(p) for p in parts))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)


@dataclass(frozen=True)
class VisualGeometry:
    """Length ``L`` of the time axis, tiled by ``n`` equal cells."""

    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")

    def cell(self, i: int, n: int):
        return self.L * i / n, self.L * (i + 1) / n


def classify_slice(cscps: Sequence[Cscp], entry: int) -> int:
    """Class 1..10 of a slice from its CSCPs and the state it is entered in."""
    if not cscps:
        return 2 if entry else 1
    kinds = [c.kind for c in cscps]
    for a, b in zip(kinds, kinds[1:]):
        if a == b:
            raise ValueError("state mismatch: CSCP kinds do not alternate")
    if (kinds[0] == FALLING) != bool(entry):
        raise ValueError("state mismatch: entry state disagrees with first CSCP")
    first, last, count = kinds[0], kinds[-1], len(kinds)
    if count == 1:
        return 3 if first == FALLING else 4
    if count == 2:
        return 5 if first == RISING else 6
    return {
        (FALLING, FALLING): 7,
        (RISING, RISING): 8,
        (RISING, FALLING): 9,
        (FALLING, RISING): 10,
    }[first, last]


def exit_state(cell_class: int) -> int:
    """State the signal is in when leaving a slice of this class."""
    return 1 if cell_class in (2, 4, 6, 8, 10) else 0


def class_entry_state(cell_class: int) -> int:
    return 1 if cell_class in (2, 3, 6, 7, 10) else 0


def visual_cscp_locations(cell_class: int, cell) -> list[tuple[str, float]]:
    """Projected leg midpoints of the glyph's triangles, tagged by edge kind.

    Each triangle spans half a cell, so the projection lands on the centre of
    that half.  Works with exact types (``Fraction``) as well as floats.
    """
    lo, hi = cell
    q1 = lo + (hi - lo) / 4
    q3 = lo + 3 * (hi - lo) / 4
    if cell_class in (1, 2):
        return []
    if cell_class in (3, 7):
        return [(FALLING, q3)]
    if cell_class in (4, 8):
        return [(RISING, q1)]
    if cell_class in (5, 9):
        return [(RISING, q1), (FALLING, q3)]
    if cell_class in (6, 10):
        return [(RISING, q3), (FALLING, q1)]
    raise ValueError(f"invalid cell class {cell_class}")


def aggregate_data_locations(cscps: Sequence[Cscp]) -> list[tuple[str, float]]:
    """Mean location of the rising group and of the falling group."""
    out = []
    for kind in (RISING, FALLING):
        locs = [c.location for c in cscps if c.kind == kind]
        if locs:
            out.append((kind, sum(locs) / len(locs)))
    return out


def visual_duty_ratio(cell_class: int) -> float:
    if not 1 <= cell_class <= N_CLASSES:
        raise ValueError(f"invalid cell class {cell_class}")
    return VISUAL_DUTY_RATIO[cell_class]


def slice_classes(seq: StateSequence, seg: Segmentation) -> list[int]:
    cscps = extract_cscps(seq)
    return [classify_slice(cscps_in_slice(cscps, s), entry_state(seq, s[0])) for s in seg.slices()]


def location_pairs(seq: StateSequence, seg: Segmentation, geom: VisualGeometry | None = None):
    """(data location, visual location) pairs, by cell then rising/falling.

    An aggregate whose kind has no triangle in the cell's glyph (the inner
    edges of classes 7 and 8) has no partner and is left out.
    """
    _check(seq, seg)
    geom = geom or VisualGeometry(seq.T)
    cscps = extract_cscps(seq)
    pairs = []
    for i, s in enumerate(seg.slices()):
        mine = cscps_in_slice(cscps, s)
        cls = classify_slice(mine, entry_state(seq, s[0]))
        visual = dict(visual_cscp_locations(cls, geom.cell(i, seg.n)))
        for kind, d in aggregate_data_locations(mine):
            if kind in visual:
                pairs.append((d, visual[kind]))
    return pairs


def sim_cd(seq: StateSequence, seg: Segmentation, geom: VisualGeometry | None = None) -> float:
    geom = geom or VisualGeometry(seq.T)
    return float(sum(abs(d / seq.T - v / geom.L) for d, v in location_pairs(seq, seg, geom)))


def dif_dr(seq: StateSequence, seg: Segmentation) -> float:
    _check(seq, seg)
    actual = int(np.count_nonzero(seq.bits)) / seq.T
    visual = sum(visual_duty_ratio(c) for c in slice_classes(seq, seg)) / seg.n
    return abs(actual - visual)


def cv_ts(seg: Segmentation) -> float:
    spans = seg.spans
    mean = sum(spans) / len(spans)
    return math.sqrt(sum((t - mean) ** 2 for t in spans) / len(spans)) / mean


def loss(
    seq: StateSequence,
    seg: Segmentation,
    geom: VisualGeometry | None = None,
    weights: LossWeights | None = None,
) -> float:
    w = weights or LossWeights()
    return w.w1 * sim_cd(seq, seg, geom) + w.w2 * dif_dr(seq, seg) + w.w3 * cv_ts(seg)


def _check(seq, seg):
    if seg.T != seq.T:
        raise ValueError(f"segmentation covers T={seg.T} but sequence has T={seq.T}")


# -- vectorized engine -----------------------------------------------------------

_RISING_Q_ARR = np.array(_RISING_Q)
_FALLING_Q_ARR = np.array(_FALLING_Q)
_VDR_ARR = np.array(VISUAL_DUTY_RATIO)


def _classes(entry, count):
    odd = count % 2 == 1
    many = np.where(odd, 8 - entry, 9 + entry)
    return np.select(
        [count == 0, count == 1, count == 2],
        [1 + entry, 4 - entry, 5 + entry],
        default=many,
    )


class LossModel:
    """Batched loss evaluation for one state sequence.

    Visual locations enter the metric only through ``V/L``, which for cell
    ``i`` of ``n`` is ``(i + q)/n`` whatever ``L`` is, so no geometry is
    needed here.  Span dispersion is computed from exact integer sums:
    ``cv = sqrt(n * sum(t^2) - T^2) / T``.
    """

    def __init__(self, seq: StateSequence, weights: LossWeights | None = None):
        self.seq = seq
        self.weights = weights or LossWeights()
        self.T = seq.T
        self._bits = seq.bits
        bits = seq.bits
        self.cscp_locations = np.flatnonzero(bits[1:] != bits[:-1]) + 1
        up = bits[self.cscp_locations].astype(bool)
        self.rising = self.cscp_locations[up]
        self.falling = self.cscp_locations[~up]
        self._rcum = np.concatenate(([0], np.cumsum(self.rising)))
        self._fcum = np.concatenate(([0], np.cumsum(self.falling)))
        self.actual_dr = np.count_nonzero(seq.bits) / self.T

    @property
    def n_cscps(self) -> int:
        return int(self.cscp_locations.size)

    def slice_stats(self, lo, hi):
        """Counts/sums of owned rising and falling locations, and entry state."""
        r0 = np.searchsorted(self.rising, lo, "left")
        r1 = np.searchsorted(self.rising, hi, "left")
        f0 = np.searchsorted(self.falling, lo, "right")
        f1 = np.searchsorted(self.falling, hi, "right")
        nr, sr = r1 - r0, self._rcum[r1] - self._rcum[r0]
        nf, sf = f1 - f0, self._fcum[f1] - self._fcum[f0]
        bits = self._bits
        entry = np.minimum(bits[lo - 1], bits[lo]).astype(np.int64)
        entry = np.where(lo == 0, int(bits[0]), entry)
        return nr, sr, nf, sf, entry

    def _sim_terms(self, nr, sr, nf, sf, cls, pos, n):
        T = self.T
        rq = _RISING_Q_ARR[cls]
        fq = _FALLING_Q_ARR[cls]
        with np.errstate(invalid="ignore", divide="ignore"):
            tr = np.abs(sr / (nr * T) - (pos + rq) / n)
            tf = np.abs(sf / (nf * T) - (pos + fq) / n)
        tr = np.where((nr > 0) & ~np.isnan(rq), tr, 0.0)
        tf = np.where((nf > 0) & ~np.isnan(fq), tf, 0.0)
        return tr + tf

    def _flat(self, rows_of_points):
        """Slice bounds of several segmentations laid end to end.

        Returns ``lo, hi, pos, n, row`` per slice, where ``row`` says which
        segmentation the slice belongs to and ``n`` is that segmentation's
        slice count.
        """
        T = self.T
        los, his, poss, ns, rws = [], [], [], [], []
        for r, pts in enumerate(rows_of_points):
            pts = np.asarray(pts, dtype=np.int64)
            k = pts.size + 1
            b = np.empty(k + 1, np.int64)
            b[0], b[-1] = 0, T
            b[1:-1] = pts
            los.append(b[:-1])
            his.append(b[1:])
            poss.append(np.arange(k))
            ns.append(np.full(k, k))
            rws.append(np.full(k, r))
        return (np.concatenate(los), np.concatenate(his), np.concatenate(poss),
                np.concatenate(ns), np.concatenate(rws))

    def _metrics_flat(self, lo, hi, pos, n, row, rows):
        # per-row sums go through bincount so a segmentation's loss does not
        # depend on which batch it was evaluated in
        nr, sr, nf, sf, entry = self.slice_stats(lo, hi)
        cls = _classes(entry, nr + nf)
        sim = np.bincount(row, self._sim_terms(nr, sr, nf, sf, cls, pos, n), rows)
        counts = np.bincount(row, minlength=rows)
        dif = np.abs(self.actual_dr - np.bincount(row, _VDR_ARR[cls], rows) / counts)
        spans = (hi - lo).astype(np.float64)
        # spans and their squares stay below 2**53, so these sums are exact
        sq = np.bincount(row, spans * spans, rows)
        cv = np.sqrt(counts * sq - float(self.T) ** 2) / self.T
        return sim, dif, cv

    def metrics(self, points):
        """(sim_cd, dif_dr, cv_ts) arrays, one entry per row of dividing points.

        ``points`` is a 2-D array (all rows with the same slice count) or a
        list of 1-D arrays of any lengths.
        """
        if isinstance(points, np.ndarray):
            pts = points[None, :] if points.ndim == 1 else points
            rows, k = pts.shape[0], pts.shape[1] + 1
            b = np.empty((rows, k + 1), np.int64)
            b[:, 0], b[:, -1] = 0, self.T
            b[:, 1:-1] = pts
            lo, hi = b[:, :-1].ravel(), b[:, 1:].ravel()
            pos = np.tile(np.arange(k), rows)
            n = np.full(lo.size, k)
            row = np.repeat(np.arange(rows), k)
        else:
            rows = len(points)
            lo, hi, pos, n, row = self._flat(points)
        return self._metrics_flat(lo, hi, pos, n, row, rows)

    def evaluate_equal(self, ns) -> np.ndarray:
        """Losses of the equal-length segmentations for each slice count in ``ns``.

        Cut ``i`` of ``n`` sits at ``round(i*T/n)`` with halves rounded up.
        """
        ns = np.asarray(ns, dtype=np.int64)
        n = np.repeat(ns, ns)
        starts = np.cumsum(ns) - ns
        pos = np.arange(n.size) - np.repeat(starts, ns)
        T = self.T
        lo = (2 * pos * T + n) // (2 * n)
        hi = (2 * (pos + 1) * T + n) // (2 * n)
        row = np.repeat(np.arange(ns.size), ns)
        sim, dif, cv = self._metrics_flat(lo, hi, pos, n, row, ns.size)
        w = self.weights
        return w.w1 * sim + w.w2 * dif + w.w3 * cv

    def evaluate(self, points) -> np.ndarray:
        sim, dif, cv = self.metrics(points)
        w = self.weights
        return w.w1 * sim + w.w2 * dif + w.w3 * cv

    def loss(self, seg: Segmentation | Sequence[int]) -> float:
        pts = seg.dividing_points if isinstance(seg, Segmentation) else seg
        return float(self.evaluate([np.asarray(pts, dtype=np.int64)])[0])

    def merge_losses(self, points) -> np.ndarray:
        """Loss after removing each dividing point in turn.

        Removing point ``j`` merges slices ``j`` and ``j+1``; the slices before
        keep their cell position and the ones after shift down by one, so
        prefix/suffix sums of per-slice terms give every candidate in O(n).
        """
        pts = np.asarray(points, dtype=np.int64)
        if pts.size == 0:
            return np.empty(0)
        bounds = np.concatenate(([0], pts, [self.T]))
        lo, hi = bounds[:-1], bounds[1:]
        k = lo.size
        m = k - 1
        nr, sr, nf, sf, entry = self.slice_stats(lo, hi)
        cls = _classes(entry, nr + nf)
        pos = np.arange(k)
        same = self._sim_terms(nr, sr, nf, sf, cls, pos, m)
        shifted = self._sim_terms(nr, sr, nf, sf, cls, pos - 1, m)

        mnr, msr = nr[:-1] + nr[1:], sr[:-1] + sr[1:]
        mnf, msf = nf[:-1] + nf[1:], sf[:-1] + sf[1:]
        mcls = _classes(entry[:-1], mnr + mnf)
        merged = self._sim_terms(mnr, msr, mnf, msf, mcls, pos[:-1], m)

        before = np.concatenate(([0.0], np.cumsum(same)))[:-2]
        after = np.concatenate((np.cumsum(shifted[::-1])[::-1], [0.0]))[2:]
        sim = before + merged + after

        vdr = _VDR_ARR[cls]
        vdr_sum = vdr.sum() - vdr[:-1] - vdr[1:] + _VDR_ARR[mcls]
        dif = np.abs(self.actual_dr - vdr_sum / m)

        spans = hi - lo
        sq = (spans * spans).sum() + 2 * spans[:-1] * spans[1:]
        cv = np.sqrt(m * sq - self.T**2) / self.T
        w = self.weights
        return w.w1 * sim + w.w2 * dif + w.w3 * cv
