"""Tiny dependency-free SVG writers for attribution bars and insertion curves.

Output is generated purely from the data (no timestamps or ids), so repeated
runs emit byte-identical files.
"""

from __future__ import annotations

import math

_PALETTE = ("#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4", "#8c613c")
_W, _H = 640, 360
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 70


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _axis_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / n
    return [lo + i * step for i in range(n + 1)]


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="15">{title}</text>',
    ]


def grouped_bar_chart(path, categories, groups: dict[str, list[float]], title: str) -> None:
    """One cluster of bars per category; ``groups`` maps legend name to the
    per-category values."""
    names = list(groups)
    values = [groups[name] for name in names]
    lo = min(0.0, *(min(v) for v in values))
    hi = max(0.0, *(max(v) for v in values))
    if hi == lo:
        hi = lo + 1.0
    plot_w = _W - _MARGIN_L - _MARGIN_R
    plot_h = _H - _MARGIN_T - _MARGIN_B

    def ypix(v: float) -> float:
        return _MARGIN_T + plot_h * (1 - (v - lo) / (hi - lo))

    parts = _header(title)
    for tick in _axis_ticks(lo, hi):
        y = ypix(tick)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{_fmt(y)}" x2="{_W - _MARGIN_R}" y2="{_fmt(y)}" '
            'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 6}" y="{_fmt(y + 4)}" text-anchor="end">{tick:.3g}</text>'
        )
    n_cat = len(categories)
    n_grp = len(names)
    slot = plot_w / max(n_cat, 1)
    bar_w = slot * 0.8 / max(n_grp, 1)
    for c, cat in enumerate(categories):
        x0 = _MARGIN_L + c * slot + slot * 0.1
        for g in range(n_grp):
            v = values[g][c]
            top = ypix(max(v, 0.0))
            height = abs(ypix(0.0) - ypix(v))
            parts.append(
                f'<rect x="{_fmt(x0 + g * bar_w)}" y="{_fmt(top)}" width="{_fmt(bar_w)}" '
                f'height="{_fmt(height)}" fill="{_PALETTE[g % len(_PALETTE)]}"/>'
            )
        parts.append(
            f'<text x="{_fmt(x0 + slot * 0.4)}" y="{_H - _MARGIN_B + 16}" '
            f'text-anchor="middle">{cat}</text>'
        )
    parts.extend(_legend(names))
    parts.append("</svg>")
    _write(path, parts)


def line_chart(path, xs, series: dict[str, list[float]], title: str, x_label: str = "") -> None:
    names = list(series)
    lo = min(min(v) for v in series.values())
    hi = max(max(v) for v in series.values())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    plot_w = _W - _MARGIN_L - _MARGIN_R
    plot_h = _H - _MARGIN_T - _MARGIN_B
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1

    def xpix(v: float) -> float:
        return _MARGIN_L + plot_w * (v - x_lo) / (x_hi - x_lo)

    def ypix(v: float) -> float:
        return _MARGIN_T + plot_h * (1 - (v - lo) / (hi - lo))

    parts = _header(title)
    for tick in _axis_ticks(lo, hi):
        y = ypix(tick)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{_fmt(y)}" x2="{_W - _MARGIN_R}" y2="{_fmt(y)}" '
            'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 6}" y="{_fmt(y + 4)}" text-anchor="end">{tick:.3g}</text>'
        )
    for x in xs:
        parts.append(
            f'<text x="{_fmt(xpix(x))}" y="{_H - _MARGIN_B + 16}" text-anchor="middle">{x:g}</text>'
        )
    if x_label:
        parts.append(
            f'<text x="{_W / 2}" y="{_H - _MARGIN_B + 36}" text-anchor="middle">{x_label}</text>'
        )
    for g, name in enumerate(names):
        pts = " ".join(
            f"{_fmt(xpix(x))},{_fmt(ypix(v))}" for x, v in zip(xs, series[name])
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{_PALETTE[g % len(_PALETTE)]}" '
            'stroke-width="2"/>'
        )
    parts.extend(_legend(names))
    parts.append("</svg>")
    _write(path, parts)


def _legend(names: list[str]) -> list[str]:
    parts = []
    for g, name in enumerate(names):
        x = _MARGIN_L + g * 150
        y = _H - 18
        parts.append(
            f'<rect x="{x}" y="{y - 10}" width="12" height="12" '
            f'fill="{_PALETTE[g % len(_PALETTE)]}"/>'
        )
        parts.append(f'<text x="{x + 16}" y="{y}">{name}</text>')
    return parts


def _write(path, parts: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
