"""Render-ready abstraction of a segmented signal: one glyph class,
strength level and pair of anomaly flags per cell."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import slice_classes
from .model import AnomalyRecord, Segmentation, SignalRecord, StateSequence

LEVELS = ("none", "low", "medium", "high")
TIME_AXIS_KINDS = ("frequency", "bandwidth")
FREQ_AXIS_KINDS = ("strength", "snr")


@dataclass(frozen=True)
class StrengthThresholds:
    high_dbm: float = -50.0
    low_dbm: float = -70.0

    def __post_init__(self):
        if not self.high_dbm > self.low_dbm:
            raise ValueError("high_dbm must exceed low_dbm")


@dataclass(frozen=True)
class CellAbstraction:
    cell_index: int
    cell_class: int
    strength_level: str
    anomaly_time_axis: bool
    anomaly_freq_axis: bool


@dataclass(frozen=True)
class SignalAbstraction:
    signal_id: str
    center_freq: float
    bandwidth: float
    start_time: int
    segmentation: Segmentation
    cells: tuple[CellAbstraction, ...]

    def to_dict(self) -> dict:
        return {
            "signal_id": self.signal_id,
            "center_freq": self.center_freq,
            "bandwidth": self.bandwidth,
            "start_time": self.start_time,
            "T": self.segmentation.T,
            "dividing_points": list(self.segmentation.dividing_points),
            "cells": [asdict(c) for c in self.cells],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SignalAbstraction":
        seg = Segmentation(int(obj["T"]), tuple(obj.get("dividing_points", ())))
        cells = tuple(CellAbstraction(**c) for c in obj["cells"])
        if len(cells) != seg.n:
            raise ValueError(f"signal {obj['signal_id']!r}: {len(cells)} cells for {seg.n} slices")
        return cls(obj["signal_id"], float(obj["center_freq"]), float(obj["bandwidth"]),
                   int(obj.get("start_time", 0)), seg, cells)


def strength_level(mean_strength: float, th: StrengthThresholds | None = None) -> str:
    th = th or StrengthThresholds()
    if mean_strength >= th.high_dbm:
        return "high"
    if mean_strength >= th.low_dbm:
        return "medium"
    return "low"


def abstract_signal(
    seq: StateSequence,
    seg: Segmentation,
    records: Sequence[SignalRecord],
    anomalies: Sequence[AnomalyRecord] = (),
    th: StrengthThresholds | None = None,
) -> SignalAbstraction:
    """Classify each slice and attach its strength level and anomaly cues.

    A cell's colour comes from the mean strength of the records in its slice
    taken while the signal is appearing.  A non-empty glyph with no such
    record (possible while the 5 s hold keeps the state on) borrows the
    previous cell's level, or ``low`` for the first cell.
    """
    th = th or StrengthThresholds()
    for r in records:
        if r.signal_id != seq.signal_id:
            raise ValueError(f"record for {r.signal_id!r} passed with sequence {seq.signal_id!r}")
    for a in anomalies:
        if a.signal_id != seq.signal_id:
            raise ValueError(f"anomaly for {a.signal_id!r} passed with sequence {seq.signal_id!r}")
    if seg.T != seq.T:
        raise ValueError("segmentation does not cover the sequence")

    classes = slice_classes(seq, seg)
    bounds = np.asarray(seg.bounds)
    t0 = seq.start_time

    ts = np.array([r.timestamp - t0 for r in records], dtype=np.int64)
    strengths = np.array([r.strength for r in records], dtype=float)
    if ts.size:
        inside = (ts >= 0) & (ts < seq.T)
        on = np.zeros(ts.size, dtype=bool)
        on[inside] = seq.bits[ts[inside]] == 1
        ts, strengths = ts[on], strengths[on]
    cell_of = np.searchsorted(bounds, ts, "right") - 1
    sums = np.bincount(cell_of, strengths, minlength=seg.n)
    counts = np.bincount(cell_of, minlength=seg.n)

    time_flag = np.zeros(seg.n, dtype=bool)
    freq_flag = np.zeros(seg.n, dtype=bool)
    for a in anomalies:
        k = a.timestamp - t0
        if not 0 <= k < seq.T:
            continue
        i = int(np.searchsorted(bounds, k, "right")) - 1
        if a.kind in TIME_AXIS_KINDS:
            time_flag[i] = True
        else:
            freq_flag[i] = True

    cells = []
    prev = None
    for i, cls in enumerate(classes):
        if cls == 1:
            level = "none"
        elif counts[i]:
            level = strength_level(sums[i] / counts[i], th)
        else:
            level = prev or "low"
        if level != "none":
            prev = level
        cells.append(CellAbstraction(i, cls, level, bool(time_flag[i]), bool(freq_flag[i])))

    center = float(np.median([r.center_freq for r in records])) if records else float("nan")
    width = float(np.median([r.bandwidth for r in records])) if records else float("nan")
    return SignalAbstraction(seq.signal_id, center, width, t0, seg, tuple(cells))


def write_abstractions(path: str | Path, abstractions: Sequence[SignalAbstraction]) -> None:
    Path(path).write_text(json.dumps([a.to_dict() for a in abstractions], indent=1) + "\n")


def read_abstractions(path: str | Path) -> list[SignalAbstraction]:
    return [SignalAbstraction.from_dict(o) for o in json.loads(Path(path).read_text())]
