"""Minimal deterministic SVG line plots (axes plus polylines)."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = (70, 20, 30, 55)  # left, right, top, bottom
COLOURS = ("#1f4e9c", "#c0392b", "#27864b", "#7d3c98")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-9 * span:
        out.append(round(v, 10))
        v += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_plot(series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
              xlabel: str, ylabel: str, title: str = "",
              xlim: tuple[float, float] | None = None,
              ylim: tuple[float, float] | None = None) -> str:
    """Render ``(label, xs, ys)`` series as an SVG document string.

    Non-finite points break a polyline into separate pieces.
    """
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    finite = [(np.asarray(x, float), np.asarray(y, float)) for _, x, y in series]
    allx = np.concatenate([x[np.isfinite(x) & np.isfinite(y)] for x, y in finite]) if finite else np.array([])
    ally = np.concatenate([y[np.isfinite(x) & np.isfinite(y)] for x, y in finite]) if finite else np.array([])
    x0, x1 = xlim if xlim else ((float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0))
    y0, y1 = ylim if ylim else ((float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0))
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        X = _fmt(sx(t))
        out.append(f'<line x1="{X}" y1="{top + ph}" x2="{X}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        Y = _fmt(sy(t))
        out.append(f'<line x1="{left - 5}" y1="{Y}" x2="{left}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y}" font-size="11" text-anchor="end" '
                   f'dominant-baseline="middle">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 12}" font-size="13" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{top - 8}" font-size="13" '
                   f'text-anchor="middle">{title}</text>')
    for k, ((label, _, _), (x, y)) in enumerate(zip(series, finite)):
        colour = COLOURS[k % len(COLOURS)]
        ok = np.isfinite(x) & np.isfinite(y) & (x >= x0) & (x <= x1)
        pieces, cur = [], []
        for xi, yi, good in zip(x, y, ok):
            if good:
                cur.append(f"{_fmt(sx(xi))},{_fmt(sy(min(max(yi, y0), y1)))}")
            elif cur:
                pieces.append(cur)
                cur = []
        if cur:
            pieces.append(cur)
        for pts in pieces:
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" '
                       f'points="{" ".join(pts)}"/>')
        ly = top + 16 + 16 * k
        out.append(f'<line x1="{left + pw - 150}" y1="{ly}" x2="{left + pw - 125}" y2="{ly}" '
                   f'stroke="{colour}" stroke-width="1.5"/>')
        out.append(f'<text x="{left + pw - 120}" y="{ly + 4}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
