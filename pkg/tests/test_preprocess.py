import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from astf.bench import CAPTURE_T0, _capture_plan, _schedule
from astf.model import FrequencyFrame, SignalRecord
from astf.preprocess import (
    DataError,
    PreprocessConfig,
    binarize_states,
    detect_anomalies,
    estimate_noise_floor,
    group_by_signal,
    identify_signals,
    read_records_csv,
    read_spectrum_csv,
    write_records_csv,
    write_spectrum_csv,
)


def frame(amps, t=0, f0=100e6, bw=0.1e6):
    return FrequencyFrame(t, f0, bw, np.asarray(amps, dtype=float))


def rec(t, sid="S001", f=100e6, bw=1e5, s=-60.0, snr=40.0):
    return SignalRecord(t, sid, f, bw, s, snr)


# -- noise floor ---------------------------------------------------------------------


def test_noise_floor_constant():
    assert estimate_noise_floor([frame([-100.0] * 8)]) == -100.0


def test_noise_floor_alternating():
    assert estimate_noise_floor([frame([-100.0, -40.0] * 5)]) == -70.0


def test_noise_floor_mostly_noise():
    amps = [-100.0] * 90 + [-40.0] * 10
    assert estimate_noise_floor([frame(amps)]) == -100.0


def test_noise_floor_matches_sort_oracle():
    rng = np.random.default_rng(1)
    frames = [frame(rng.normal(-90, 5, 11), t=k) for k in range(7)]
    vals = sorted(v for f in frames for v in f.amplitudes)
    n = len(vals)
    expected = vals[n // 2] if n % 2 else (vals[n // 2 - 1] + vals[n // 2]) / 2
    assert estimate_noise_floor(frames) == pytest.approx(expected, abs=1e-12)


def test_noise_floor_empty():
    with pytest.raises(DataError, match="no frames"):
        estimate_noise_floor([])


# -- detection and tracking ----------------------------------------------------------


def test_single_run_record():
    amps = [-100.0] * 10
    amps[2:6] = [-50.0] * 4  # bins 2-5 -> [100.2, 100.6] MHz
    (r,) = identify_signals([frame(amps, f0=100e6 - 0.2e6)], noise_floor=-100.0)
    assert r.center_freq == pytest.approx(100.2e6)
    assert r.bandwidth == pytest.approx(0.4e6)
    assert r.strength == -50.0
    assert r.snr == 50.0


def test_silence_gives_no_records():
    assert identify_signals([frame([-100.0] * 10)], noise_floor=-100.0) == []


def test_two_runs_get_distinct_ids():
    amps = [-100.0] * 20
    amps[1:5] = [-50.0] * 4
    amps[10:15] = [-60.0] * 5
    recs = identify_signals([frame(amps)], noise_floor=-100.0)
    assert len(recs) == 2 and recs[0].signal_id != recs[1].signal_id


def test_short_runs_are_ignored():
    amps = [-100.0] * 10
    amps[3:5] = [-50.0] * 2
    assert identify_signals([frame(amps)], noise_floor=-100.0) == []


def test_threshold_is_inclusive():
    amps = [-100.0] * 10
    amps[3:7] = [-94.0] * 4
    assert len(identify_signals([frame(amps)], noise_floor=-100.0)) == 1


def test_grid_mismatch():
    with pytest.raises(DataError, match="grid"):
        identify_signals([frame([-100.0] * 5, t=0), frame([-100.0] * 6, t=1)])


def test_track_closes_after_horizon():
    on = [-100.0] * 3 + [-50.0] * 4 + [-100.0] * 3
    off = [-100.0] * 10
    # seen again 60 s later: still linked; 61 s later: new identity
    frames = [frame(on, 0)] + [frame(off, t) for t in range(1, 60)] + [frame(on, 60)]
    ids = [r.signal_id for r in identify_signals(frames, noise_floor=-100.0)]
    assert ids == ["S001", "S001"]
    frames = [frame(on, 0)] + [frame(off, t) for t in range(1, 61)] + [frame(on, 61)]
    ids = [r.signal_id for r in identify_signals(frames, noise_floor=-100.0)]
    assert ids == ["S001", "S002"]


def test_overlap_ratio_decides_linking():
    def run(lo, hi):
        a = [-100.0] * 20
        a[lo:hi] = [-50.0] * (hi - lo)
        return a

    # IoU of [2,8) and [4,10) is 4/8 = 0.5, which links at the default ratio
    ids = [r.signal_id for r in identify_signals([frame(run(2, 8), 0), frame(run(4, 10), 1)], noise_floor=-100.0)]
    assert ids == ["S001", "S001"]
    ids = [r.signal_id for r in identify_signals([frame(run(2, 8), 0), frame(run(5, 11), 1)], noise_floor=-100.0)]
    assert ids == ["S001", "S002"]


def naive_tracker(frames, floor, cfg=PreprocessConfig()):
    """Straight transcription of the detect/link rules with plain lists."""
    thr = floor + cfg.noise_margin_db
    tracks = []  # [id, lo, hi, last_seen]
    out = []
    for f in frames:
        tracks = [tr for tr in tracks if f.timestamp - tr[3] <= 60]
        dets = []
        b = 0
        a = list(f.amplitudes)
        while b < len(a):
            if a[b] >= thr:
                e = b
                while e < len(a) and a[e] >= thr:
                    e += 1
                if e - b >= cfg.min_bandwidth_bins:
                    dets.append((b, e))
                b = e
            else:
                b += 1
        pairs = []
        for k, (lo, hi) in enumerate(dets):
            for tr in tracks:
                inter = min(hi, tr[2]) - max(lo, tr[1])
                if inter > 0:
                    iou = inter / (max(hi, tr[2]) - min(lo, tr[1]))
                    if iou >= cfg.track_overlap_ratio:
                        pairs.append((-iou, tr[0], k))
        pairs.sort()
        got, used = {}, set()
        for _, tid, k in pairs:
            if k not in got and tid not in used:
                got[k] = tid
                used.add(tid)
        for k, (lo, hi) in enumerate(dets):
            tid = got.get(k)
            if tid is None:
                tid = max([0] + [r[0] for r in tracks] + [o[1] for o in out]) + 1
                tracks.append([tid, lo, hi, f.timestamp])
            else:
                tr = next(t for t in tracks if t[0] == tid)
                tr[1:] = [lo, hi, f.timestamp]
            seg = a[lo:hi]
            out.append((f.timestamp, tid, lo, hi, sum(seg) / len(seg)))
    return sorted(out)


@given(st.integers(0, 10_000))
def test_tracker_matches_naive_reference(seed):
    rng = np.random.default_rng(seed)
    frames = []
    bands = [(int(lo), int(lo) + int(w)) for lo, w in zip(rng.integers(0, 30, 4), rng.integers(3, 7, 4))]
    for t in range(40):
        amps = np.full(40, -100.0)
        for lo, hi in bands:
            if rng.random() < 0.6:
                jl, jh = rng.integers(-1, 2, 2)
                amps[max(0, lo + jl) : hi + jh] = -50.0 + rng.integers(-3, 4)
        frames.append(frame(amps, t))
    got = identify_signals(frames, noise_floor=-100.0)
    want = naive_tracker(frames, -100.0)
    assert len(got) == len(want)
    got_rows = sorted(
        (r.timestamp, int(r.signal_id[1:]), round((r.center_freq - r.bandwidth / 2 - 100e6) / 0.1e6),
         round((r.center_freq + r.bandwidth / 2 - 100e6) / 0.1e6), r.strength)
        for r in got
    )
    for g, w in zip(got_rows, want):
        assert g[:4] == w[:4]
        assert g[4] == pytest.approx(w[4], abs=1e-9)


def test_at_most_one_record_per_signal_and_second():
    rng = np.random.default_rng(5)
    frames = [frame(np.where(rng.random(60) < 0.4, -50.0, -100.0), t) for t in range(50)]
    recs = identify_signals(frames, noise_floor=-100.0)
    keys = [(r.signal_id, r.timestamp) for r in recs]
    assert len(keys) == len(set(keys))


def test_config_validation():
    with pytest.raises(ValueError):
        PreprocessConfig(noise_margin_db=0)
    with pytest.raises(ValueError):
        PreprocessConfig(track_overlap_ratio=0)
    with pytest.raises(ValueError):
        PreprocessConfig(state_window_s=3)
    PreprocessConfig(track_overlap_ratio=1.0)


# -- binarization --------------------------------------------------------------------


def test_binarize_every_second():
    s = binarize_states([rec(t) for t in range(30)], 0, 30)
    assert s.bits.tolist() == [1] * 30


def test_binarize_single_record_holds_five_seconds():
    s = binarize_states([rec(10)], 0, 20)
    assert s.bits.tolist() == [0] * 10 + [1] * 5 + [0] * 5


def test_binarize_no_records():
    assert binarize_states([], 100, 12, signal_id="S009").bits.tolist() == [0] * 12


def test_binarize_rejects_out_of_span():
    with pytest.raises(DataError):
        binarize_states([rec(25)], 0, 20)
    with pytest.raises(ValueError):
        binarize_states([rec(1), rec(2, sid="S002")], 0, 20)


@given(st.integers(1, 300), st.data())
def test_binarize_window_oracle(T, data):
    ts = sorted(set(data.draw(st.lists(st.integers(0, T - 1), max_size=40))))
    s = binarize_states([rec(t) for t in ts], 0, T, signal_id="S001")
    expected = [int(any(t - 5 < r <= t for r in ts)) for t in range(T)]
    assert s.bits.tolist() == expected


def dilate(mask, hold=5):
    out = mask.copy()
    for k in range(1, hold):
        out[k:] |= mask[:-k]
    return out


def test_capture_pipeline_reproduces_dilated_schedule():
    """Synthetic capture with a known on/off schedule -> states match the schedule held for 5 s."""
    T = 3000
    rng = np.random.default_rng(11)
    plan = _capture_plan(4, rng)
    masks = [_schedule(sig, T, rng) for sig in plan]
    amps = np.full((T, 144), -100.0)
    for sig, m in zip(plan, masks):
        amps[np.flatnonzero(m), sig.first_bin : sig.first_bin + sig.n_bins] = -50.0
    frames = [FrequencyFrame(CAPTURE_T0 + k, 100e6, 250e3, amps[k]) for k in range(T)]
    recs = identify_signals(frames, noise_floor=-100.0)
    groups = group_by_signal(recs)
    assert len(groups) == 4
    by_band = {round(v[0].center_freq): k for k, v in groups.items()}
    for sig, m in zip(plan, masks):
        center = round(100e6 + (sig.first_bin + sig.n_bins / 2) * 250e3)
        sid = by_band[center]
        s = binarize_states(groups[sid], CAPTURE_T0, T)
        assert np.array_equal(s.bits.astype(bool), dilate(m))


# -- anomalies -----------------------------------------------------------------------


def test_constant_series_has_no_anomalies():
    assert detect_anomalies([rec(t) for t in range(50)]) == []


def test_single_frequency_outlier():
    recs = [rec(t, f=100e6) for t in range(99)] + [rec(99, f=150e6)]
    out = detect_anomalies(recs)
    assert [(a.timestamp, a.kind) for a in out] == [(99, "frequency")]


def test_value_on_the_boundary_is_not_anomalous():
    # nine zeros and one v: mu = v/10, sigma = 3v/10, so v sits exactly on mu + 3 sigma
    recs = [rec(t, s=0.0) for t in range(9)] + [rec(9, s=10.0)]
    assert [a for a in detect_anomalies(recs) if a.kind == "strength"] == []


def test_fewer_than_two_records():
    assert detect_anomalies([rec(0, f=1e9)]) == []
    assert detect_anomalies([]) == []


def _oracle_anomalies(values):
    mu = sum(values) / len(values)
    sigma = (sum((v - mu) ** 2 for v in values) / len(values)) ** 0.5
    return [i for i, v in enumerate(values) if abs(v - mu) > 3 * sigma]


@given(st.lists(st.integers(-20, 20), min_size=2, max_size=60), st.integers(-10**6, 10**6))
def test_anomalies_shift_invariant_and_match_oracle(vals, shift):
    base = [rec(t, bw=1e5, s=float(v)) for t, v in enumerate(vals)]
    moved = [rec(t, bw=1e5, s=float(v + shift)) for t, v in enumerate(vals)]
    a = [x.timestamp for x in detect_anomalies(base) if x.kind == "strength"]
    b = [x.timestamp for x in detect_anomalies(moved) if x.kind == "strength"]
    assert a == b == _oracle_anomalies(vals)


# -- files ---------------------------------------------------------------------------


def test_spectrum_csv_round_trip(tmp_path):
    frames = [frame([-100.0, -50.5, -70.25], t=5 + k) for k in range(3)]
    p = tmp_path / "cap.csv"
    write_spectrum_csv(p, frames, decimals=2)
    back = read_spectrum_csv(p)
    assert [f.timestamp for f in back] == [5, 6, 7]
    assert np.array_equal(back[1].amplitudes, frames[1].amplitudes)


def test_spectrum_csv_gzip(tmp_path):
    p = tmp_path / "cap.csv.gz"
    write_spectrum_csv(p, [frame([-1.0, -2.0], t=0)])
    assert read_spectrum_csv(p)[0].amplitudes.tolist() == [-1.0, -2.0]


@pytest.mark.parametrize(
    "body, line, match",
    [
        ("0,100e6,1e5,-1,-2\n1,100e6,1e5,-1,x\n", 3, "malformed"),
        ("0,100e6,1e5,-1,-2\n2,100e6,1e5,-1,-2\n", 3, "1 s"),
        ("0,100e6,1e5,-1,-2\n1,100e6,1e5,-1\n", 3, "grid"),
        ("0,100e6\n", 2, "malformed"),
    ],
)
def test_spectrum_csv_errors_cite_line(tmp_path, body, line, match):
    p = tmp_path / "bad.csv"
    p.write_text("timestamp,start_freq_hz,bin_width_hz,a0,a1\n" + body)
    with pytest.raises(DataError, match=match) as exc:
        read_spectrum_csv(p)
    assert f"bad.csv:{line}:" in str(exc.value)


def test_records_csv_round_trip(tmp_path):
    recs = [rec(1, f=100.123456789e6, s=-55.5), rec(2, sid="S002", snr=0.1)]
    p = tmp_path / "records.csv"
    write_records_csv(p, recs)
    assert p.read_text().splitlines()[0] == "timestamp,signal_id,center_freq_hz,bandwidth_hz,strength_dbm,snr_db"
    assert read_records_csv(p) == recs


def test_records_csv_bad_row(tmp_path):
    p = tmp_path / "records.csv"
    p.write_text("timestamp,signal_id,center_freq_hz,bandwidth_hz,strength_dbm,snr_db\n1,S001,1,2,3\n")
    with pytest.raises(DataError, match="records.csv:2:"):
        read_records_csv(p)
