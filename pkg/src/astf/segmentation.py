"""Time segmentation of binary state sequences.

:func:`bssva` first scans equal-length segmentations over the allowed range
of slice counts, then greedily snaps dividing points onto nearby state
changes while that lowers the loss.  ``segment_el``, ``segment_sw``,
``segment_bu``, ``segment_td`` and ``segment_fp`` are reference strategies
(equal length, sliding window, bottom-up, top-down, feature points) held to
the same loss function and slice-count range.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .metrics import LossModel, LossWeights
from .model import Segmentation, StateSequence

BU_INITIAL_SEGMENTS = 500
# Losses closer than this are ties; float rounding must not pick the winner.
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SegmentationConfig:
    n_min: int = 30
    n_max: int = 50
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"need 1 <= n_min <= n_max, got [{self.n_min}, {self.n_max}]")

    def n_range(self, T: int) -> tuple[int, int]:
        return min(self.n_min, T), min(self.n_max, T)


@dataclass(frozen=True)
class SegmentationResult:
    segmentation: Segmentation
    loss: float
    iterations: int = 0
    elapsed: float = 0.0
    algorithm: str = ""
    # Losses accepted by the point-moving stage, starting with the seed loss.
    accepted_losses: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return self.segmentation.n

    def to_dict(self, signal_id: str, weights: LossWeights) -> dict:
        seg = self.segmentation
        return {
            "signal_id": signal_id,
            "T": seg.T,
            "n": seg.n,
            "dividing_points": list(seg.dividing_points),
            "loss": self.loss,
            "algorithm": self.algorithm,
            "weights": list(weights.as_tuple()),
        }


def segmentation_from_dict(obj: dict) -> Segmentation:
    seg = Segmentation(int(obj["T"]), tuple(obj["dividing_points"]))
    if "n" in obj and int(obj["n"]) != seg.n:
        raise ValueError(f"segment record for {obj.get('signal_id')!r}: n disagrees with dividing points")
    return seg


def _first_min_index(losses) -> int:
    losses = np.asarray(losses, dtype=float)
    return int(np.flatnonzero(losses <= losses.min() + TIE_TOL)[0])


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def segment_equal(T: int, n: int) -> Segmentation:
    """``n`` slices cut at ``round(i*T/n)``, halves rounded away from zero."""
    if not 1 <= n <= T:
        raise ValueError(f"cannot cut T={T} seconds into n={n} slices")
    return Segmentation(T, tuple((2 * i * T + n) // (2 * n) for i in range(1, n)))


def _model(seq, cfg: SegmentationConfig) -> LossModel:
    if isinstance(seq, LossModel):
        return seq
    return LossModel(seq, cfg.weights)


def _result(model, pts, algorithm, t0, iterations=0, accepted=()):
    seg = Segmentation(model.T, tuple(int(p) for p in pts))
    return SegmentationResult(
        segmentation=seg,
        loss=model.loss(seg),
        iterations=iterations,
        elapsed=time.perf_counter() - t0,
        algorithm=algorithm,
        accepted_losses=tuple(accepted),
    )


# -- BSSVA -------------------------------------------------------------------------


def bssva_stage1(seq, cfg: SegmentationConfig | None = None):
    """Best equal-length segmentation over the slice-count range.

    Returns ``(n, segmentation, loss, evaluations)``; ties go to the smaller n.
    All trial segmentations are scored in a single batch.
    """
    cfg = cfg or SegmentationConfig()
    model = _model(seq, cfg)
    lo, hi = cfg.n_range(model.T)
    losses = model.evaluate_equal(np.arange(lo, hi + 1))
    k = _first_min_index(losses)
    return lo + k, segment_equal(model.T, lo + k), float(losses[k]), losses.size


def candidate_moves(seq, seg: Segmentation, active, cfg: SegmentationConfig | None = None):
    """Candidate new locations for the active dividing points.

    Point ``i`` (1-based) may move to the nearest rising edge owned by the
    slice before it or the nearest falling edge owned by the slice after it.
    Moves that would empty a slice are dropped.
    """
    model = _model(seq, cfg or SegmentationConfig())
    bounds = seg.bounds
    rising, falling = model.rising, model.falling
    moves = []
    for i in sorted(active):
        left, here, right = bounds[i - 1], bounds[i], bounds[i + 1]
        # rising edges owned by [left, here): left <= b < here; nearest is the last
        k = np.searchsorted(rising, here, "left") - 1
        if k >= 0 and rising[k] >= left:
            b = int(rising[k])
            if left < b < here:
                moves.append((i, b))
        # falling edges owned by [here, right): here < b <= right; nearest is the first
        k = np.searchsorted(falling, here, "right")
        if k < falling.size and falling[k] <= right:
            b = int(falling[k])
            if here < b < right:
                moves.append((i, b))
    return moves


def bssva_stage2(seq, seed: Segmentation, cfg: SegmentationConfig | None = None, seed_loss=None):
    """Greedy snapping of dividing points onto state changes.

    Each round evaluates every candidate move against the current
    segmentation and applies the best one if it beats the last accepted loss;
    a moved point is frozen for the rest of the run.
    """
    t0 = time.perf_counter()
    cfg = cfg or SegmentationConfig()
    model = _model(seq, cfg)
    pts = np.array(seed.dividing_points, dtype=np.int64)
    current = model.loss(pts) if seed_loss is None else seed_loss
    accepted = [current]
    active = set(range(1, seed.n))
    rounds = 0
    while active:
        seg = Segmentation(model.T, tuple(int(p) for p in pts))
        moves = candidate_moves(model, seg, active)
        if not moves:
            break
        rounds += 1
        idx = np.array([m[0] for m in moves])
        loc = np.array([m[1] for m in moves])
        rows = np.repeat(pts[None, :], len(moves), axis=0)
        rows[np.arange(len(moves)), idx - 1] = loc
        losses = model.evaluate(rows)
        tied = np.flatnonzero(losses <= losses.min() + TIE_TOL)
        best = tied[np.lexsort((loc[tied], idx[tied]))[0]]
        if not losses[best] < current - TIE_TOL:
            break
        pts = rows[best]
        current = float(losses[best])
        accepted.append(current)
        active.discard(int(idx[best]))
    return _result(model, pts, "bssva", t0, rounds, accepted)


def bssva(seq, cfg: SegmentationConfig | None = None) -> SegmentationResult:
    t0 = time.perf_counter()
    cfg = cfg or SegmentationConfig()
    model = _model(seq, cfg)
    _, seed, seed_loss, _ = bssva_stage1(model, cfg)
    res = bssva_stage2(model, seed, cfg, seed_loss)
    return _result(model, res.segmentation.dividing_points, "bssva", t0, res.iterations, res.accepted_losses)


# -- reference strategies ----------------------------------------------------------


def segment_el(seq, cfg: SegmentationConfig | None = None) -> SegmentationResult:
    t0 = time.perf_counter()
    cfg = cfg or SegmentationConfig()
    model = _model(seq, cfg)
    _, seg, _, evaluations = bssva_stage1(model, cfg)
    return _result(model, seg.dividing_points, "el", t0, evaluations)


def _sliding_window_points(model: LossModel, n: int) -> list[int]:
    T = model.T
    locs = model.cscp_locations
    target = T / n
    pts = []
    last = 0
    for k in range(1, n):
        aim = last + target
        lo_ok = max(last + 1, math.ceil(aim - target / 2))
        hi_ok = min(T - (n - k), math.floor(aim + target / 2))
        cut = None
        j = np.searchsorted(locs, aim)
        for b in (locs[j - 1] if j > 0 else None, locs[j] if j < locs.size else None):
            if b is None or not lo_ok <= b <= hi_ok:
                continue
            if cut is None or abs(b - aim) < abs(cut - aim):
                cut = int(b)
        if cut is None:
            cut = min(max(_round_half_up(aim), last + 1), T - (n - k))
        pts.append(cut)
        last = cut
    return pts


def segment_sw(seq, cfg: SegmentationConfig | None = None) -> SegmentationResult:
    """One pass per slice count; each cut snaps to the nearest state change
    within half a target span of where the window would end."""
    t0 = time.perf_counter()
    cfg = cfg or SegmentationConfig()
    model = _model(seq, cfg)
    lo, hi = cfg.n_range(model.T)
    best = None
    for n in range(lo, hi + 1):
        pts = _sliding_window_points(model, n)
        value = model.loss(pts)
        if best is None or value < best[1] - TIE_TOL:
            best = (pts, value)
    return _result(model, best[0], "sw", t0, hi - lo + 1)


def _greedy_merge(model: LossModel, pts: np.ndarray, stop_at: int, record_range):
    """Remove the cheapest dividing point until ``stop_at`` slices remain.

    Returns the final points, the number of merges and the (loss, points)
    pairs recorded whenever the slice count lies inside ``record_range``.
    """
    lo, hi = record_range
    recorded = []
    if lo <= pts.size + 1 <= hi:
        recorded.append((model.loss(pts), pts))
    merges = 0
    while pts.size + 1 > stop_at:
        j = _first_min_index(model.merge_losses(pts))
        pts = np.delete(pts, j)
        merges += 1
        if lo <= pts.size + 1 <= hi:
            recorded.append((model.loss(pts), pts))
    return pts, merges, recorded


def _first_min(recorded):
    return _first_min_index([v for v, _ in recorded])


def segment_bu(seq, cfg: SegmentationConfig | None = None) -> SegmentationResult:
    """Merge adjacent slices of a fine equal-length split, keeping the best
    segmentation seen inside the slice-count range."""
    t0 = time.perf_counter()
    cfg = cfg or SegmentationConfig()
    model = _model(seq, cfg)
    lo, hi = cfg.n_range(model.T)
    start = min(BU_INITIAL_SEGMENTS, model.T)
    pts = np.array(segment_equal(model.T, start).dividing_points, dtype=np.int64)
    _, merges, recorded = _greedy_merge(model, pts, lo, (lo, hi))
    best = recorded[_first_min(recorded)][1]
    return _result(model, best, "bu", t0, merges)


def segment_td(seq, cfg: SegmentationConfig | None = None) -> SegmentationResult:
    """Split one slice at a time at the state change that lowers the loss
    most, falling back to halving the longest slice when none is left."""
    t0 = time.perf_counter()
    cfg = cfg or SegmentationConfig()
    model = _model(seq, cfg)
    T = model.T
    lo, hi = cfg.n_range(T)
    pts = np.empty(0, dtype=np.int64)
    recorded = []
    if lo <= 1:
        recorded.append((model.loss(pts), pts))
    splits = 0
    while pts.size + 1 < hi:
        cand = np.setdiff1d(model.cscp_locations, pts)
        if cand.size == 0:
            bounds = np.concatenate(([0], pts, [T]))
            k = int(np.argmax(np.diff(bounds)))
            cand = np.array([(bounds[k] + bounds[k + 1] + 1) // 2])
        rows = np.sort(np.column_stack((np.repeat(pts[None, :], cand.size, axis=0), cand)), axis=1)
        losses = model.evaluate(rows)
        pts = rows[_first_min_index(losses)]
        splits += 1
        if lo <= pts.size + 1 <= hi:
            recorded.append((model.loss(pts), pts))
    best = recorded[_first_min(recorded)][1]
    return _result(model, best, "td", t0, splits)


def segment_fp(seq, cfg: SegmentationConfig | None = None) -> SegmentationResult:
    """Cut at every state change, then thin or pad the points to the range.

    Surplus points are dropped one at a time, always the one whose removal
    costs least, down to the smallest allowed count; the best segmentation
    seen inside the range wins.  Too few points are topped up with
    equal-length points placed in the longest slices.
    """
    t0 = time.perf_counter()
    cfg = cfg or SegmentationConfig()
    model = _model(seq, cfg)
    T = model.T
    lo, hi = cfg.n_range(T)
    pts = model.cscp_locations.astype(np.int64)
    steps = 0
    if pts.size + 1 >= lo:
        pts, steps, recorded = _greedy_merge(model, pts, lo, (lo, hi))
        pts = recorded[_first_min(recorded)][1]
    else:
        spare = sorted(set(segment_equal(T, lo).dividing_points) - set(pts.tolist()))
        points = sorted(pts.tolist())
        while len(points) + 1 < lo:
            points.append(_fill_point(T, points, spare))
            points.sort()
            steps += 1
        pts = np.array(points, dtype=np.int64)
    return _result(model, pts, "fp", t0, steps)


def _fill_point(T, points, spare):
    """An equal-length point inside the longest slice that still has one,
    else the midpoint of the longest slice."""
    bounds = [0, *points, T]
    order = sorted(range(len(bounds) - 1), key=lambda k: (-(bounds[k + 1] - bounds[k]), k))
    for k in order:
        a, b = bounds[k], bounds[k + 1]
        inside = [p for p in spare if a < p < b]
        if inside:
            mid = (a + b) / 2
            p = min(inside, key=lambda q: (abs(q - mid), q))
            spare.remove(p)
            return p
    a, b = bounds[order[0]], bounds[order[0] + 1]
    return (a + b + 1) // 2


ALGORITHMS: dict[str, Callable[..., SegmentationResult]] = {
    "bssva": bssva,
    "el": segment_el,
    "sw": segment_sw,
    "bu": segment_bu,
    "td": segment_td,
    "fp": segment_fp,
}


def segment(seq: StateSequence, algorithm: str = "bssva", cfg: SegmentationConfig | None = None):
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}") from None
    return fn(seq, cfg)
