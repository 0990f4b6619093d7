from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from astf.bench import synthesize_capture
from astf.model import Segmentation, StateSequence
from astf.preprocess import write_spectrum_csv

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = Path(__file__).parent / "data"

# Frozen seed of the bundled one-day, ten-signal capture.
FIXTURE_SEED = 2024


@st.composite
def sequences(draw, min_T=1, max_T=200):
    T = draw(st.integers(min_T, max_T))
    # run-length encoded so long runs and dense toggling are both likely
    bits = []
    state = draw(st.integers(0, 1))
    while len(bits) < T:
        bits.extend([state] * draw(st.integers(1, max(1, T // 3))))
        state ^= 1
    return StateSequence("s", 0, np.array(bits[:T], dtype=np.uint8))


@st.composite
def seq_and_segmentation(draw, min_T=1, max_T=200, max_n=None):
    seq = draw(sequences(min_T, max_T))
    T = seq.T
    top = T if max_n is None else min(T, max_n)
    n = draw(st.integers(1, top))
    points = draw(st.lists(st.integers(1, T - 1), min_size=n - 1, max_size=n - 1, unique=True)) if T > 1 else []
    return seq, Segmentation(T, tuple(sorted(points)))


@pytest.fixture(scope="session")
def capture_csv(tmp_path_factory) -> Path:
    """The one-day, ten-signal synthetic capture written as spectrum CSV."""
    path = tmp_path_factory.mktemp("capture") / "capture.csv"
    write_spectrum_csv(path, synthesize_capture(seed=FIXTURE_SEED))
    return path


def run_pipeline(capture: Path, out: Path, threads: int = 1) -> Path:
    """process -> segment -> render through the CLI; returns the SVG path."""
    from astf.cli import main

    out.mkdir(parents=True, exist_ok=True)
    t = ["--quiet", "--threads", str(threads)]
    assert main(t + ["process", str(capture), "--out-dir", str(out)]) == 0
    assert main(t + ["segment", str(out / "states.txt"), "--out", str(out / "segments.json")]) == 0
    svg = out / "diagram.svg"
    assert main(
        t
        + [
            "render",
            "--records", str(out / "records.csv"),
            "--states", str(out / "states.txt"),
            "--segments", str(out / "segments.json"),
            "--anomalies", str(out / "anomalies.json"),
            "--freq-range", "100e6,136e6",
            "--out", str(svg),
        ]
    ) == 0
    return svg


@pytest.fixture(scope="session")
def pipeline_run(capture_csv, tmp_path_factory) -> Path:
    """Output directory of one single-threaded pipeline run on the fixture."""
    out = tmp_path_factory.mktemp("pipeline")
    run_pipeline(capture_csv, out)
    return out


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
