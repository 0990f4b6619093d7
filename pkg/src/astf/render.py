"""SVG rendering of signal abstractions.

Frequency runs along x, time along y with the earliest time at the top.  Each
signal is a vertical stripe cut into equal-height cells, one glyph per cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .abstraction import SignalAbstraction

MIN_STRIPE_PX = 4.0
UMBRELLA_FRACTION = 0.3
CUE_FRACTION = 0.4


class RenderError(ValueError):
    """Signals cannot be placed on the requested canvas."""


@dataclass(frozen=True)
class RenderSpec:
    canvas_width: int = 900
    canvas_height: int = 700
    freq_range: tuple[float, float] = (100e6, 136e6)
    time_range: tuple[int, int] | None = None  # defaults to the union of the signals' spans
    margin_left: float = 70.0
    margin_right: float = 20.0
    margin_top: float = 20.0
    margin_bottom: float = 50.0
    color_high: str = "#08519c"
    color_medium: str = "#4292c6"
    color_low: str = "#9ecae1"
    color_cue: str = "#e31a1c"
    color_umbrella: str = "#252525"
    color_axis: str = "#333333"
    font_size: int = 11
    time_ticks: int = 8
    freq_ticks: int = 6

    def __post_init__(self):
        if not (self.canvas_width > 0 and self.canvas_height > 0):
            raise ValueError("canvas must be positive")
        if not self.freq_range[0] < self.freq_range[1]:
            raise ValueError("freq_range must satisfy f_lo < f_hi")
        if self.time_range is not None and not self.time_range[0] < self.time_range[1]:
            raise ValueError("time_range must be increasing")
        if self.plot_width <= 0 or self.plot_height <= 0:
            raise ValueError("margins leave no room for the plot")
        colors = [self.color_high, self.color_medium, self.color_low, self.color_cue]
        if len({c.lower() for c in colors}) != len(colors):
            raise ValueError("palette colors must be distinct")
        for c in colors + [self.color_umbrella, self.color_axis]:
            if len(c) != 7 or c[0] != "#" or any(ch not in "0123456789abcdefABCDEF" for ch in c[1:]):
                raise ValueError(f"color {c!r} is not 6-digit hex")

    @property
    def plot_width(self) -> float:
        return self.canvas_width - self.margin_left - self.margin_right

    @property
    def plot_height(self) -> float:
        return self.canvas_height - self.margin_top - self.margin_bottom

    def level_color(self, level: str) -> str:
        return {"high": self.color_high, "medium": self.color_medium, "low": self.color_low}[level]

    def x_of(self, freq: float) -> float:
        f_lo, f_hi = self.freq_range
        return self.margin_left + (freq - f_lo) / (f_hi - f_lo) * self.plot_width


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class Stripe:
    signal_id: str
    x_center: float
    width: float
    top: float
    bottom: float
    cells: tuple[Rect, ...]


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _time_range(abstractions: Sequence[SignalAbstraction], spec: RenderSpec) -> tuple[int, int]:
    if spec.time_range is not None:
        return spec.time_range
    if not abstractions:
        return (0, 1)
    lo = min(a.start_time for a in abstractions)
    hi = max(a.start_time + a.segmentation.T for a in abstractions)
    return (lo, hi)


def layout(abstractions: Sequence[SignalAbstraction], spec: RenderSpec) -> list[Stripe]:
    """Stripe geometry per signal, ordered by (center_freq, signal_id)."""
    f_lo, f_hi = spec.freq_range
    bad = []
    for a in abstractions:
        lo, hi = a.center_freq - a.bandwidth / 2, a.center_freq + a.bandwidth / 2
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo < f_lo or hi > f_hi:
            bad.append(f"{a.signal_id} [{lo:.0f}, {hi:.0f}] Hz")
    if bad:
        raise RenderError(f"signals outside frequency range [{f_lo:.0f}, {f_hi:.0f}] Hz: " + "; ".join(bad))
    t_lo, t_hi = _time_range(abstractions, spec)
    y_scale = spec.plot_height / (t_hi - t_lo)
    out = []
    for a in sorted(abstractions, key=lambda a: (a.center_freq, a.signal_id)):
        xc = spec.x_of(a.center_freq)
        width = max(spec.x_of(a.center_freq + a.bandwidth / 2) - spec.x_of(a.center_freq - a.bandwidth / 2), MIN_STRIPE_PX)
        top = spec.margin_top + (a.start_time - t_lo) * y_scale
        bottom = spec.margin_top + (a.start_time + a.segmentation.T - t_lo) * y_scale
        n = a.segmentation.n
        h = (bottom - top) / n
        cells = tuple(Rect(xc - width / 2, top + i * h, width, h) for i in range(n))
        out.append(Stripe(a.signal_id, xc, width, top, bottom, cells))
    return out


# -- glyphs ------------------------------------------------------------------------


def glyph_polygons(cell_class: int, r: Rect) -> list[list[tuple[float, float]]]:
    """Filled regions of a glyph as polygons (time runs down the y axis)."""
    x0, x1, xm = r.x, r.x + r.w, r.x + r.w / 2
    y0, y1, ym = r.y, r.y + r.h, r.y + r.h / 2
    full_top = [(x0, y0), (x1, y0), (x1, ym), (x0, ym)]
    full_bottom = [(x0, ym), (x1, ym), (x1, y1), (x0, y1)]
    apex_top = [(xm, y0), (x1, ym), (x0, ym)]  # first half, apex at the earlier edge
    base_top = [(x0, y0), (x1, y0), (xm, ym)]  # first half, apex at the middle
    apex_bottom = [(x0, ym), (x1, ym), (xm, y1)]  # second half, apex at the later edge
    base_bottom = [(xm, ym), (x1, y1), (x0, y1)]  # second half, apex at the middle
    base = (cell_class - 3) % 4 + 3 if cell_class >= 3 else cell_class
    return {
        1: [],
        2: [[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]],
        3: [full_top, apex_bottom],
        4: [apex_top, full_bottom],
        5: [apex_top, apex_bottom],
        6: [base_top, base_bottom],
    }[base]


def umbrella_strokes(cell_class: int, r: Rect) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Two 45 degree slope lines on each triangle apex of classes 7-10."""
    if cell_class < 7:
        return []
    xm = r.x + r.w / 2
    y0, ym, y1 = r.y, r.y + r.h / 2, r.y + r.h
    d = UMBRELLA_FRACTION * (r.h / 2) / math.sqrt(2)
    # apex position and the direction pointing back into its triangle
    apexes = {
        7: [((xm, y1), -1)],
        8: [((xm, y0), 1)],
        9: [((xm, y0), 1), ((xm, y1), -1)],
        10: [((xm, ym), -1), ((xm, ym), 1)],
    }[cell_class]
    lines = []
    for (ax, ay), back in apexes:
        lines.append(((ax, ay), (ax - d, ay + back * d)))
        lines.append(((ax, ay), (ax + d, ay + back * d)))
    return lines


def _points(poly) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in poly)


def _line(p, q, color: str, width: float = 1.0) -> str:
    return (
        f'<line x1="{_fmt(p[0])}" y1="{_fmt(p[1])}" x2="{_fmt(q[0])}" y2="{_fmt(q[1])}" '
        f'stroke="{color}" stroke-width="{_fmt(width)}"/>'
    )


def render_cell(
    cell_class: int,
    level: str,
    anomaly_time_axis: bool,
    anomaly_freq_axis: bool,
    rect: Rect,
    spec: RenderSpec | None = None,
    attrs: str = "",
) -> str:
    if not 1 <= cell_class <= 10:
        raise ValueError(f"invalid cell class {cell_class}")
    spec = spec or RenderSpec()
    parts = [f'<g class="cell c{cell_class}"{attrs}>']
    if cell_class == 2:
        color = spec.level_color(level)
        parts.append(
            f'<rect x="{_fmt(rect.x)}" y="{_fmt(rect.y)}" width="{_fmt(rect.w)}" height="{_fmt(rect.h)}" fill="{color}"/>'
        )
    elif cell_class > 2:
        color = spec.level_color(level)
        for poly in glyph_polygons(cell_class, rect):
            parts.append(f'<polygon points="{_points(poly)}" fill="{color}"/>')
        for p, q in umbrella_strokes(cell_class, rect):
            parts.append(_line(p, q, spec.color_umbrella))
    xm, ym = rect.x + rect.w / 2, rect.y + rect.h / 2
    if anomaly_time_axis:
        half = CUE_FRACTION * rect.h / 2
        parts.append(_line((xm, ym - half), (xm, ym + half), spec.color_cue, 1.5))
    if anomaly_freq_axis:
        half = CUE_FRACTION * rect.w / 2
        parts.append(_line((xm - half, ym), (xm + half, ym), spec.color_cue, 1.5))
    parts.append("</g>")
    return "".join(parts)


# -- document ----------------------------------------------------------------------


def _ticks(lo: float, hi: float, count: int) -> list[float]:
    if count < 2:
        return [lo]
    return list(np.linspace(lo, hi, count))


def _fmt_offset(seconds: float) -> str:
    """Elapsed time as ``HH:MM``, with a ``Nd `` prefix past the first day."""
    minutes = int(round(seconds / 60))
    d, rem = divmod(minutes, 24 * 60)
    hm = f"{rem // 60:02d}:{rem % 60:02d}"
    return f"{d}d {hm}" if d else hm


def _axes(spec: RenderSpec, t_lo: int, t_hi: int) -> list[str]:
    left, top = spec.margin_left, spec.margin_top
    right, bottom = left + spec.plot_width, top + spec.plot_height
    fs = spec.font_size
    c = spec.color_axis
    out = [
        '<g class="axes" font-family="sans-serif" font-size="%d" fill="%s">' % (fs, c),
        _line((left, bottom), (right, bottom), c),
        _line((left, top), (left, bottom), c),
    ]
    f_lo, f_hi = spec.freq_range
    for f in _ticks(f_lo, f_hi, spec.freq_ticks):
        x = spec.x_of(f)
        out.append(_line((x, bottom), (x, bottom + 4), c))
        out.append(f'<text x="{_fmt(x)}" y="{_fmt(bottom + 6 + fs)}" text-anchor="middle">{f / 1e6:.2f}</text>')
    out.append(
        f'<text x="{_fmt(left + spec.plot_width / 2)}" y="{_fmt(bottom + 10 + 2 * fs)}" text-anchor="middle">Frequency (MHz)</text>'
    )
    for t in _ticks(t_lo, t_hi, spec.time_ticks):
        y = top + (t - t_lo) / (t_hi - t_lo) * spec.plot_height
        out.append(_line((left - 4, y), (left, y), c))
        out.append(
            f'<text x="{_fmt(left - 6)}" y="{_fmt(y + fs / 3)}" text-anchor="end">{_fmt_offset(t - t_lo)}</text>'
        )
    ty = top + spec.plot_height / 2
    out.append(
        f'<text x="{_fmt(fs)}" y="{_fmt(ty)}" text-anchor="middle" transform="rotate(-90 {_fmt(fs)} {_fmt(ty)})">Time</text>'
    )
    out.append("</g>")
    return out


def render_diagram(abstractions: Sequence[SignalAbstraction], spec: RenderSpec | None = None) -> str:
    """Standalone SVG 1.1 document; identical inputs give identical bytes."""
    spec = spec or RenderSpec()
    stripes = layout(abstractions, spec)
    by_id = {a.signal_id: a for a in abstractions}
    t_lo, t_hi = _time_range(abstractions, spec)
    w, h = spec.canvas_width, spec.canvas_height
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>',
    ]
    lines.extend(_axes(spec, t_lo, t_hi))
    for st in stripes:
        a = by_id[st.signal_id]
        sid = escape(st.signal_id, {'"': "&quot;"})
        lines.append(f'<g class="stripe" data-signal="{sid}">')
        lines.append(f"<title>{sid}</title>")
        lines.append(
            f'<rect x="{_fmt(st.x_center - st.width / 2)}" y="{_fmt(st.top)}" width="{_fmt(st.width)}" '
            f'height="{_fmt(st.bottom - st.top)}" fill="none" stroke="#d9d9d9" stroke-width="0.50"/>'
        )
        for cell, rect in zip(a.cells, st.cells):
            lines.append(
                render_cell(
                    cell.cell_class,
                    cell.strength_level,
                    cell.anomaly_time_axis,
                    cell.anomaly_freq_axis,
                    rect,
                    spec,
                    attrs=f' data-cell="{cell.cell_index}"',
                )
            )
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
