"""Dependency-free SVG line charts (fixed 800x600 viewBox)."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 20, 20, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * abs(step):
        ticks.append(round(v, 12))
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def stacked_plot(
    t: Sequence[float],
    panels: Sequence[tuple[str, Sequence[float]]],
    xlabel: str = "t [s]",
    bands: dict[int, tuple[float, float]] | None = None,
) -> str:
    """One polyline panel per (label, values), sharing the time axis."""
    bands = bands or {}
    n = len(panels)
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    usable = HEIGHT - MARGIN_T - MARGIN_B
    gap = 30
    ph = (usable - gap * (n - 1)) / n
    tmin, tmax = (min(t), max(t)) if len(t) else (0.0, 1.0)
    if tmax == tmin:
        tmax = tmin + 1.0

    def sx(v):
        return x0 + (v - tmin) / (tmax - tmin) * (x1 - x0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    for i, (label, values) in enumerate(panels):
        top = MARGIN_T + i * (ph + gap)
        bottom = top + ph
        finite = [v for v in values if math.isfinite(v)]
        lo, hi = (min(finite), max(finite)) if finite else (-1.0, 1.0)
        if i in bands:
            lo, hi = min(lo, bands[i][0]), max(hi, bands[i][1])
        pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.1
        lo, hi = lo - pad, hi + pad

        def sy(v, lo=lo, hi=hi, top=top, bottom=bottom):
            return bottom - (v - lo) / (hi - lo) * (bottom - top)

        out.append(f'<rect x="{x0}" y="{top:.2f}" width="{x1 - x0}" height="{ph:.2f}" '
                   'fill="none" stroke="#444"/>')
        for tick in _nice_ticks(lo, hi):
            y = sy(tick)
            out.append(f'<line x1="{x0 - 4}" y1="{y:.2f}" x2="{x1}" y2="{y:.2f}" stroke="#ddd"/>')
            out.append(f'<text x="{x0 - 6}" y="{y + 4:.2f}" text-anchor="end">{_fmt(tick)}</text>')
        if i in bands:
            for b in bands[i]:
                y = sy(b)
                out.append(f'<line x1="{x0}" y1="{y:.2f}" x2="{x1}" y2="{y:.2f}" '
                           'stroke="#888" stroke-dasharray="4 3"/>')
        pts = " ".join(f"{sx(a):.2f},{sy(v):.2f}" for a, v in zip(t, values) if math.isfinite(v))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        cy = (top + bottom) / 2
        out.append(f'<text x="16" y="{cy:.2f}" transform="rotate(-90 16 {cy:.2f})" '
                   f'text-anchor="middle">{escape(label)}</text>')
    last_bottom = MARGIN_T + n * ph + (n - 1) * gap
    for tick in _nice_ticks(tmin, tmax):
        x = sx(tick)
        out.append(f'<text x="{x:.2f}" y="{last_bottom + 18:.2f}" text-anchor="middle">{_fmt(tick)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
