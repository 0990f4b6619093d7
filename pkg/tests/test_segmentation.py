import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astf.metrics import LossModel, LossWeights, dif_dr, sim_cd
from astf.model import Segmentation, StateSequence
from astf.segmentation import (
    ALGORITHMS,
    BU_INITIAL_SEGMENTS,
    SegmentationConfig,
    SegmentationResult,
    bssva,
    bssva_stage1,
    bssva_stage2,
    candidate_moves,
    segment,
    segment_bu,
    segment_el,
    segment_equal,
    segment_fp,
    segment_sw,
    segment_td,
    segmentation_from_dict,
)

from . import oracles
from .conftest import sequences

# 90 s, nine 10 s slices; built so that D1 has one candidate, D2 none and D6 two,
# and the greedy stage accepts D1, D8, D3 before a round fails to improve.
FIG7_BITS = "111111111110000000000000000011111110000000000000000111111111110000000000000000011110000000"
FIG7_CFG = SegmentationConfig(9, 9)


def seq(text, sid="s"):
    return StateSequence.from_string(sid, 0, text)


def const(T, bit=0):
    return StateSequence("c", 0, np.full(T, bit, dtype=np.uint8))


def small_cfg(T):
    lo = max(1, T // 10)
    return SegmentationConfig(lo, max(lo, T // 4))


# -- equal-length segmentation -------------------------------------------------------


@pytest.mark.parametrize("T, n, points", [(100, 4, (25, 50, 75)), (10, 3, (3, 7)), (5, 5, (1, 2, 3, 4)), (7, 1, ())])
def test_segment_equal(T, n, points):
    assert segment_equal(T, n).dividing_points == points


def test_segment_equal_rounds_halves_up():
    # 2*T/n = 2.5 -> 3 and 5*T/n = 7.5... check against the explicit rule
    for T in range(1, 60):
        for n in range(1, T + 1):
            pts = segment_equal(T, n).dividing_points
            assert pts == tuple(int(np.floor(i * T / n + 0.5)) for i in range(1, n))


def test_segment_equal_rejects_too_many_slices():
    with pytest.raises(ValueError):
        segment_equal(4, 5)


# -- stage I -------------------------------------------------------------------------


def test_stage1_constant_takes_smallest_n():
    T = 30 * 31 * 32  # every n in range divides T, so all losses are 0
    n, seg, value, evaluations = bssva_stage1(const(T), SegmentationConfig(30, 32))
    assert (n, value, evaluations) == (30, 0.0, 3)
    assert seg == segment_equal(T, 30)


def test_stage1_evaluation_count():
    *_, evaluations = bssva_stage1(const(604_800))
    assert evaluations == 21


def test_stage1_clamps_range_to_T():
    n, seg, _, evaluations = bssva_stage1(seq("0110"), SegmentationConfig(30, 50))
    assert n == 4 and evaluations == 1


def test_stage1_exact_tie_goes_to_smaller_n():
    # n=2 and n=3 have the same loss in exact arithmetic; rounding differs
    s = seq("100011000001111111000")
    n, _, _, _ = bssva_stage1(s, SegmentationConfig(2, 3))
    assert n == 2


@given(sequences(min_T=20, max_T=300))
def test_stage1_minimizes_over_range(s):
    cfg = small_cfg(s.T)
    n, _, value, _ = bssva_stage1(s, cfg)
    lo, hi = cfg.n_range(s.T)
    brute = [oracles.loss(s.bits, segment_equal(s.T, k).dividing_points) for k in range(lo, hi + 1)]
    assert value == pytest.approx(min(brute), abs=1e-12)
    best = min(brute)
    assert n == lo + next(k for k, v in enumerate(brute) if v <= best + 1e-12)


# -- candidate moves and stage II ----------------------------------------------------


def test_candidate_counts_in_worked_layout():
    s = seq(FIG7_BITS)
    moves = candidate_moves(s, segment_equal(90, 9), set(range(1, 9)), FIG7_CFG)
    per_point = {i: [loc for j, loc in moves if j == i] for i in range(1, 9)}
    assert len(per_point[1]) == 1 and per_point[1][0] > 10  # a falling edge in the next slice
    assert per_point[2] == []  # falling edge in its own slice, rising edge in the next
    assert len(per_point[6]) == 2


def test_candidates_skip_inactive_points_and_empty_slices():
    s = seq(FIG7_BITS)
    seg = segment_equal(90, 9)
    assert all(i == 6 for i, _ in candidate_moves(s, seg, {6}, FIG7_CFG))
    # rising edge exactly on the left bound would empty the slice
    s2 = seq("0" * 10 + "1" * 10)
    assert candidate_moves(s2, Segmentation(20, (10, 15)), {2}) == []


def test_stage2_worked_layout():
    s = seq(FIG7_BITS)
    seed = segment_equal(90, 9)
    res = bssva_stage2(s, seed, FIG7_CFG)
    moved = [i + 1 for i in range(8) if res.segmentation.dividing_points[i] != seed.dividing_points[i]]
    assert moved == [1, 3, 8]
    assert len(res.accepted_losses) == 4  # seed plus three accepted moves
    assert list(res.accepted_losses) == sorted(res.accepted_losses, reverse=True)
    assert res.iterations == 4  # the fourth round found nothing better


def test_stage2_constant_does_nothing():
    s = const(600, 1)
    seed = segment_equal(600, 30)
    res = bssva_stage2(s, seed)
    assert res.segmentation == seed and res.iterations == 0 and res.loss == 0


def test_stage2_single_edge_matches_exhaustive_single_moves():
    # the falling edge at 21 sits just past D1 = 20
    s = seq("1" * 21 + "0" * 79)
    cfg = SegmentationConfig(5, 5)
    seed = segment_equal(100, 5)
    res = bssva_stage2(s, seed, cfg)
    model = LossModel(s)
    base = list(seed.dividing_points)
    best = model.loss(seed)
    for k in range(4):
        lo = base[k - 1] + 1 if k else 1
        hi = base[k + 1] - 1 if k < 3 else 99
        for loc in range(lo, hi + 1):
            trial = base.copy()
            trial[k] = loc
            best = min(best, model.loss(tuple(trial)))
    assert len(res.accepted_losses) == 2
    assert res.segmentation.dividing_points == (21, 40, 60, 80)
    assert res.loss == pytest.approx(best, abs=1e-12)
    assert sim_cd(s, res.segmentation) == pytest.approx(0.06, abs=1e-12)


@given(sequences(min_T=20, max_T=400))
def test_stage2_accepted_losses_strictly_decrease(s):
    cfg = small_cfg(s.T)
    res = bssva(s, cfg)
    acc = res.accepted_losses
    assert all(b < a for a, b in zip(acc, acc[1:]))
    assert res.loss == pytest.approx(acc[-1], abs=1e-12)
    assert res.iterations <= res.n - 1


@given(sequences(min_T=20, max_T=400))
def test_bssva_never_worse_than_el(s):
    cfg = small_cfg(s.T)
    assert bssva(s, cfg).loss <= segment_el(s, cfg).loss


# -- reference algorithms ------------------------------------------------------------


@settings(max_examples=40)
@given(sequences(min_T=12, max_T=160), st.sampled_from(sorted(ALGORITHMS)))
def test_every_algorithm_respects_range_and_reports_true_loss(s, name):
    cfg = small_cfg(s.T)
    res = ALGORITHMS[name](s, cfg)
    lo, hi = cfg.n_range(s.T)
    assert lo <= res.n <= hi
    assert res.algorithm == name
    assert res.loss == pytest.approx(oracles.loss(s.bits, res.segmentation.dividing_points), abs=1e-12)


def test_algorithms_are_deterministic():
    rng = np.random.default_rng(7)
    s = StateSequence("r", 0, (rng.random(3000) < 0.5).astype(np.uint8).repeat(20))
    for fn in ALGORITHMS.values():
        a, b = fn(s), fn(s)
        assert a.segmentation == b.segmentation and a.loss == b.loss


def test_sw_constant_equals_el():
    s = const(5000)
    assert segment_sw(s).segmentation == segment_el(s).segmentation


def test_sw_snaps_to_nearby_edge():
    # target span 25; the edge at 27 is within half a span of the first cut
    s = seq("1" * 27 + "0" * 73)
    res = segment_sw(s, SegmentationConfig(4, 4))
    assert res.segmentation.dividing_points[0] == 27


@given(sequences(min_T=10, max_T=300))
def test_sw_points_strictly_increase(s):
    res = segment_sw(s, small_cfg(s.T))
    assert list(res.segmentation.dividing_points) == sorted(set(res.segmentation.dividing_points))


def test_bu_constant_long_sequence():
    res = segment_bu(const(604_800))
    assert (res.n, res.loss) == (50, 0.0)
    assert res.iterations == BU_INITIAL_SEGMENTS - 30  # merges run down to n_min


def test_bu_clamps_initial_count():
    s = seq("0011" * 30)
    res = segment_bu(s, SegmentationConfig(5, 8))
    assert res.iterations == 120 - 5


def test_td_constant_halves():
    res = segment_td(const(604_800))
    assert res.loss == 0.0
    assert res.iterations == 49  # splits run up to n_max


def test_td_first_split_is_loss_minimal():
    s = seq("0001111100000011110000000111")
    cfg = SegmentationConfig(2, 2)
    res = segment_td(s, cfg)
    cands = [b for b, _ in oracles.edges(s.bits)]
    best = min(oracles.loss(s.bits, (b,)) for b in cands)
    assert res.loss == pytest.approx(best, abs=1e-12)


def test_fp_constant_is_equal_length():
    res = segment_fp(const(600))
    assert res.segmentation == segment_equal(600, 30)


def _toggling(n_edges, T=100_000, seed=3):
    rng = np.random.default_rng(seed)
    locs = np.sort(rng.choice(np.arange(1, T), n_edges, replace=False))
    bits = np.zeros(T, dtype=np.uint8)
    for k, b in enumerate(locs):
        bits[b:] = (k + 1) % 2
    return StateSequence("t", 0, bits), locs


@pytest.mark.parametrize("n_edges", [40, 100])
def test_fp_points_are_state_changes(n_edges):
    s, locs = _toggling(n_edges)
    res = segment_fp(s)
    assert 30 <= res.n <= min(50, n_edges + 1)
    assert set(res.segmentation.dividing_points) <= set(locs.tolist())


def test_fp_keeps_best_in_range_count():
    s, locs = _toggling(40)
    res = segment_fp(s)
    model = LossModel(s)
    assert res.loss <= model.loss(tuple(locs.tolist())) + 1e-12


def test_fp_tops_up_short_sequences():
    s, _ = _toggling(6, T=2000)
    res = segment_fp(s)
    assert res.n == 30


# -- plumbing ------------------------------------------------------------------------


def test_result_serialization_round_trip():
    s = seq(FIG7_BITS)
    res = bssva(s, FIG7_CFG)
    obj = res.to_dict("S001", LossWeights())
    assert obj["n"] == 9 and obj["algorithm"] == "bssva"
    assert segmentation_from_dict(obj) == res.segmentation
    obj["n"] = 3
    with pytest.raises(ValueError):
        segmentation_from_dict(obj)


def test_segment_dispatch():
    assert isinstance(segment(const(100), "el", SegmentationConfig(5, 6)), SegmentationResult)
    with pytest.raises(ValueError, match="unknown algorithm"):
        segment(const(100), "ga")


def test_config_validation():
    with pytest.raises(ValueError):
        SegmentationConfig(0, 5)
    with pytest.raises(ValueError):
        SegmentationConfig(6, 5)
    assert SegmentationConfig().n_range(10) == (10, 10)


@pytest.mark.parametrize("bits", ["".join(p) for p in itertools.product("01", repeat=6)])
def test_tiny_sequences_all_algorithms(bits):
    s = seq(bits)
    for fn in ALGORITHMS.values():
        res = fn(s, SegmentationConfig(2, 3))
        assert 2 <= res.n <= 3
        assert sim_cd(s, res.segmentation) >= 0 and dif_dr(s, res.segmentation) >= 0
