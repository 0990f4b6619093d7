"""Shared data types and communication-state change point (CSCP) rules.

A signal's communication state is a 1 Hz binary sequence (1 = appearing,
0 = disappearing).  A CSCP sits on an integer *boundary* ``b`` in
``[1, T-1]``: the transition between second ``b-1`` and second ``b``.

When a CSCP lands exactly on a dividing point between two slices it belongs
to the slice on whose side the signal is appearing: a rising edge goes to the
later slice, a falling edge to the earlier one.  Equivalently a slice
``[lo, hi)`` owns rising edges with ``lo <= b < hi`` and falling edges with
``lo < b <= hi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

RISING = "rising"
FALLING = "falling"

ANOMALY_KINDS = ("frequency", "bandwidth", "strength", "snr")


@dataclass(frozen=True, eq=False)
class FrequencyFrame:
    """One timestamped sweep of per-bin amplitudes in dBm."""

    timestamp: int
    start_freq: float
    bin_width: float
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-D sequence")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_bins(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class SignalRecord:
    timestamp: int
    signal_id: str
    center_freq: float
    bandwidth: float
    strength: float
    snr: float


@dataclass(frozen=True)
class AnomalyRecord:
    timestamp: int
    signal_id: str
    kind: str

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class StateSequence:
    """Binary communication states of one signal, one bit per second."""

    signal_id: str
    start_time: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size < 1:
            raise ValueError("a state sequence needs at least one bit")
        if bits.dtype != np.uint8:
            if not np.isin(bits, (0, 1)).all():
                raise ValueError("bits must be 0 or 1")
            bits = bits.astype(np.uint8)
        elif bits.max() > 1:
            raise ValueError("bits must be 0 or 1")
        bits = bits.copy()
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def T(self) -> int:
        return int(self.bits.size)

    @classmethod
    def from_string(cls, signal_id: str, start_time: int, text: str) -> "StateSequence":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError("bit string must be a non-empty run of 0/1 characters")
        bits = np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")
        return cls(signal_id, int(start_time), bits)

    def bit_string(self) -> str:
        return (self.bits + ord("0")).tobytes().decode("ascii")

    def __eq__(self, other):
        if not isinstance(other, StateSequence):
            return NotImplemented
        return (
            self.signal_id == other.signal_id
            and self.start_time == other.start_time
            and np.array_equal(self.bits, other.bits)
        )

    def __repr__(self):
        return f"StateSequence(signal_id={self.signal_id!r}, start_time={self.start_time}, T={self.T})"


class Cscp(NamedTuple):
    location: int
    kind: str


@dataclass(frozen=True)
class Segmentation:
    """Dividing points ``d_1 < ... < d_{n-1}`` inside ``(0, T)``.

    Slice ``i`` (0-based) spans seconds ``[bounds[i], bounds[i+1])``.
    """

    T: int
    dividing_points: tuple[int, ...] = field(default=())

    def __post_init__(self):
        pts = tuple(int(p) for p in self.dividing_points)
        if self.T < 1:
            raise ValueError("T must be at least 1")
        prev = 0
        for p in pts:
            if p <= prev:
                raise ValueError(f"dividing points must be strictly increasing inside (0, T): {pts}")
            prev = p
        if pts and pts[-1] >= self.T:
            raise ValueError(f"dividing point {pts[-1]} not inside (0, {self.T})")
        object.__setattr__(self, "dividing_points", pts)

    @property
    def n(self) -> int:
        return len(self.dividing_points) + 1

    @property
    def bounds(self) -> tuple[int, ...]:
        return (0, *self.dividing_points, self.T)

    @property
    def spans(self) -> list[int]:
        b = self.bounds
        return [b[i + 1] - b[i] for i in range(self.n)]

    def slices(self) -> Iterator[tuple[int, int]]:
        b = self.bounds
        for i in range(self.n):
            yield b[i], b[i + 1]


def extract_cscps(seq: StateSequence) -> list[Cscp]:
    """All state change points of ``seq`` ordered by location."""
    diff = np.diff(seq.bits.astype(np.int8))
    locs = np.flatnonzero(diff) + 1
    return [Cscp(int(b), RISING if diff[b - 1] > 0 else FALLING) for b in locs]


def belongs_to(cscp: Cscp, lo: int, hi: int) -> bool:
    if cscp.kind == RISING:
        return lo <= cscp.location < hi
    return lo < cscp.location <= hi


def cscps_in_slice(cscps: Iterable[Cscp], slice_: tuple[int, int]) -> list[Cscp]:
    lo, hi = slice_
    return [c for c in cscps if belongs_to(c, lo, hi)]


def entry_state(seq: StateSequence, lo: int) -> int:
    """State of the signal when entering the slice starting at ``lo``.

    A rising edge on ``lo`` is owned by the slice, so the slice is entered in
    the pre-transition state 0; a falling edge on ``lo`` is owned by the
    previous slice, so the slice is entered in state 0 too.
    """
    if lo == 0:
        return int(seq.bits[0])
    return int(min(seq.bits[lo - 1], seq.bits[lo]))


# -- state sequence text format ------------------------------------------------
# Each sequence is two lines: "signal_id,start_time,T" then the bit string.


def write_state_sequences(path: str | Path, seqs: Sequence[StateSequence]) -> None:
    with open(path, "w", newline="\n") as fh:
        for seq in seqs:
            fh.write(f"{seq.signal_id},{seq.start_time},{seq.T}\n")
            fh.write(seq.bit_string())
            fh.write("\n")


def read_state_sequences(path: str | Path) -> list[StateSequence]:
    lines = Path(path).read_text().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if len(lines) % 2:
        raise ValueError(f"{path}: expected header/bit-string line pairs")
    seqs = []
    for k in range(0, len(lines), 2):
        header = lines[k].split(",")
        if len(header) != 3:
            raise ValueError(f"{path}:{k + 1}: bad header {lines[k]!r}")
        signal_id, start, T = header[0], int(header[1]), int(header[2])
        seq = StateSequence.from_string(signal_id, start, lines[k + 1])
        if seq.T != T:
            raise ValueError(f"{path}:{k + 2}: header says T={T} but found {seq.T} bits")
        seqs.append(seq)
    return seqs
