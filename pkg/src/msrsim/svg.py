"""Minimal static SVG line charts for traces."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f")

W, H = 720, 420
ML, MR, MT, MB = 70, 130, 30, 50


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 10))
        t += step
    return out


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e5 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


def line_chart(
    series: Sequence[Sequence[float]],
    labels: Sequence[str],
    dashed: Sequence[bool] | None = None,
    title: str = "",
    xlabel: str = "k",
    ylabel: str = "",
    ylim: tuple[float, float] | None = None,
    max_points: int = 1500,
) -> str:
    """One polyline per series against its index; long series are thinned evenly."""
    dashed = dashed or [False] * len(series)
    length = max((len(s) for s in series), default=0)
    stride = max(1, math.ceil(length / max_points))
    if ylim is None:
        vals = [v for s in series for v in s if math.isfinite(v)]
        ylim = (min(vals), max(vals)) if vals else (0.0, 1.0)
    lo, hi = ylim
    if hi - lo < 1e-12:
        lo, hi = lo - 1, hi + 1
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    xmax = max(length - 1, 1)
    pw, ph = W - ML - MR, H - MT - MB

    def sx(k):
        return ML + pw * k / xmax

    def sy(v):
        return MT + ph * (1 - (min(max(v, lo), hi) - lo) / (hi - lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    if title:
        out.append(f'<text x="{ML + pw / 2}" y="{MT - 10}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for t in _ticks(lo, hi):
        y = sy(t)
        out.append(f'<line x1="{ML - 4}" y1="{y:.1f}" x2="{ML + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ML - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    for t in _ticks(0, xmax):
        x = sx(t)
        out.append(f'<line x1="{x:.1f}" y1="{MT + ph}" x2="{x:.1f}" y2="{MT + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{x:.1f}" y="{MT + ph + 16}" text-anchor="middle">{_fmt(t)}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {MT + ph / 2})">{escape(ylabel)}</text>'
        )
    for idx, (s, lab, dash) in enumerate(zip(series, labels, dashed)):
        color = PALETTE[idx % len(PALETTE)]
        ks = list(range(0, len(s), stride))
        if ks and ks[-1] != len(s) - 1:
            ks.append(len(s) - 1)
        pts = " ".join(f"{sx(k):.1f},{sy(s[k]):.1f}" for k in ks if math.isfinite(s[k]))
        style = ' stroke-dasharray="6 4"' if dash else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{style} points="{pts}"/>')
        ly = MT + 14 + 16 * idx
        lx = ML + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" stroke="{color}" stroke-width="2"{style}/>')
        out.append(f'<text x="{lx + 28}" y="{ly}">{escape(lab)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trace_charts(trace, normal_ids: Sequence[int]) -> tuple[str, str]:
    """Position and velocity charts; malicious vehicles dashed.

    The y-range is fitted to the normal vehicles so a wildly moving
    adversary does not flatten everyone else.
    """
    n = trace.n
    labels = [f"vehicle {i + 1}" + (" (malicious)" if i in trace.malicious else "") for i in range(n)]
    dashed = [i in trace.malicious for i in range(n)]
    charts = []
    for attr, title, unit in (("x", "positions", "x [m]"), ("v", "velocities", "v [m/s]")):
        rows = getattr(trace, attr)
        series = [[row[i] for row in rows] for i in range(n)]
        normal_vals = [v for i in normal_ids for v in series[i]]
        ylim = (min(normal_vals), max(normal_vals)) if normal_vals else None
        charts.append(line_chart(series, labels, dashed, title=title, ylabel=unit, ylim=ylim))
    return charts[0], charts[1]
