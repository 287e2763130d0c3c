"""Minimal SVG line plots, enough to eyeball a trend without a plotting stack."""
from __future__ import annotations

import math

from .io import atomic_write_text

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_plot_svg(x, series: dict, *, title: str = "", xlabel: str = "", ylabel: str = "",
                  logx: bool = False, width: int = 480, height: int = 320) -> str:
    """SVG text for one or more y-series sharing the x values."""
    xs = [math.log10(v) if logx else float(v) for v in x]
    ys = [float(v) for vals in series.values() for v in vals if math.isfinite(float(v))]
    if not xs or not ys:
        ys = [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 60, 20, 30, 45
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{title}</text>',
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle">{xlabel}</text>',
        f'<text x="14" y="{height / 2:.1f}" transform="rotate(-90 14 {height / 2:.1f})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{left - 4}" y="{top + 4}" text-anchor="end">{y1:.3g}</text>',
        f'<text x="{left - 4}" y="{top + ph}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{left}" y="{top + ph + 14}" text-anchor="middle">{(10 ** x0 if logx else x0):.3g}</text>',
        f'<text x="{left + pw}" y="{top + ph + 14}" text-anchor="middle">{(10 ** x1 if logx else x1):.3g}</text>',
    ]
    for k, (name, vals) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = [f"{px(a):.2f},{py(float(b)):.2f}" for a, b in zip(xs, vals) if math.isfinite(float(b))]
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 14 + 13 * k}" fill="{color}">{name}</text>')
    out.append("</svg>\n")
    return "\n".join(out)


def write_line_plot(path, x, series: dict, **kwargs):
    return atomic_write_text(path, line_plot_svg(x, series, **kwargs))
