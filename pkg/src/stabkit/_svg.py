"""Tiny deterministic SVG emitter for trajectory and region plots.

Fixed 800x600 viewport, no external assets, no timestamps: identical inputs
produce byte-identical documents.
"""

from __future__ import annotations

import math

WIDTH = 800
HEIGHT = 600
MARGIN_LEFT = 70
MARGIN_RIGHT = 30
MARGIN_TOP = 46
MARGIN_BOTTOM = 56

PALETTE = ("#1f6fb4", "#d95f2b", "#2f9e57", "#b43ab4", "#7d7d23", "#3ac2c2", "#8049d9")
STABLE_FILL = "#74c0a0"
UNSTABLE_FILL = "#d98080"


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _tick_label(value: float) -> str:
    return f"{value:.4g}"


class _Frame:
    """Affine map from data coordinates to the plotting viewport."""

    def __init__(self, x_min, x_max, y_min, y_max):
        if not (math.isfinite(x_min) and math.isfinite(x_max)):
            x_min, x_max = 0.0, 1.0
        if not (math.isfinite(y_min) and math.isfinite(y_max)):
            y_min, y_max = 0.0, 1.0
        if x_max <= x_min:
            pad = max(1.0, abs(x_min))
            x_min, x_max = x_min - pad, x_min + pad
        if y_max <= y_min:
            pad = max(1.0, abs(y_min))
            y_min, y_max = y_min - pad, y_min + pad
        self.x_min, self.x_max = x_min, x_max
        self.y_min, self.y_max = y_min, y_max
        self.px_left = MARGIN_LEFT
        self.px_right = WIDTH - MARGIN_RIGHT
        self.px_top = MARGIN_TOP
        self.px_bottom = HEIGHT - MARGIN_BOTTOM

    def x(self, value: float) -> float:
        frac = (value - self.x_min) / (self.x_max - self.x_min)
        return self.px_left + frac * (self.px_right - self.px_left)

    def y(self, value: float) -> float:
        frac = (value - self.y_min) / (self.y_max - self.y_min)
        return self.px_bottom - frac * (self.px_bottom - self.px_top)


def _header() -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]


def _axes(frame: _Frame, title: str, xlabel: str, ylabel: str) -> list[str]:
    parts = [
        f'<rect x="{frame.px_left}" y="{frame.px_top}" '
        f'width="{frame.px_right - frame.px_left}" '
        f'height="{frame.px_bottom - frame.px_top}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>'
    ]
    n_ticks = 5
    for i in range(n_ticks):
        frac = i / (n_ticks - 1)
        xv = frame.x_min + frac * (frame.x_max - frame.x_min)
        px = frame.x(xv)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{frame.px_bottom}" x2="{_fmt(px)}" '
            f'y2="{frame.px_bottom + 5}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{frame.px_bottom + 20}" font-size="12" '
            f'font-family="monospace" text-anchor="middle">{_tick_label(xv)}</text>'
        )
        yv = frame.y_min + frac * (frame.y_max - frame.y_min)
        py = frame.y(yv)
        parts.append(
            f'<line x1="{frame.px_left - 5}" y1="{_fmt(py)}" x2="{frame.px_left}" '
            f'y2="{_fmt(py)}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{frame.px_left - 9}" y="{_fmt(py + 4)}" font-size="12" '
            f'font-family="monospace" text-anchor="end">{_tick_label(yv)}</text>'
        )
    parts.append(
        f'<text x="{WIDTH // 2}" y="24" font-size="15" font-family="monospace" '
        f'text-anchor="middle">{title}</text>'
    )
    parts.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 14}" font-size="13" '
        f'font-family="monospace" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{HEIGHT // 2}" font-size="13" font-family="monospace" '
        f'text-anchor="middle" transform="rotate(-90 18 {HEIGHT // 2})">{ylabel}</text>'
    )
    return parts


def line_chart(series, title: str, xlabel: str, ylabel: str) -> str:
    """Polyline chart of (name, xs, ys) series with a small legend."""
    xs_all = [x for _, xs, _ in series for x in xs if math.isfinite(x)]
    ys_all = [y for _, _, ys in series for y in ys if math.isfinite(y)]
    frame = _Frame(
        min(xs_all, default=0.0),
        max(xs_all, default=1.0),
        min(ys_all, default=0.0),
        max(ys_all, default=1.0),
    )
    parts = _header()
    parts.extend(_axes(frame, title, xlabel, ylabel))
    for idx, (name, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(
            f"{_fmt(frame.x(x))},{_fmt(frame.y(y))}"
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y)
        )
        if points:
            parts.append(
                f'<polyline points="{points}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>'
            )
        ly = MARGIN_TOP + 16 + 16 * idx
        parts.append(
            f'<line x1="{frame.px_right - 150}" y1="{ly - 4}" '
            f'x2="{frame.px_right - 126}" y2="{ly - 4}" stroke="{color}" '
            f'stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{frame.px_right - 120}" y="{ly}" font-size="12" '
            f'font-family="monospace">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def region_map(
    x_values,
    y_values,
    stable_grid,
    boundary,
    title: str,
    xlabel: str,
    ylabel: str,
) -> str:
    """Two-color stability map over a rectangular grid with an optional
    boundary polyline overlay. ``stable_grid[i][j]`` pairs with
    (x_values[i], y_values[j])."""
    frame = _Frame(min(x_values), max(x_values), min(y_values), max(y_values))
    parts = _header()
    nx, ny = len(x_values), len(y_values)

    def edges(values):
        if len(values) == 1:
            half = max(0.5, abs(values[0]) * 0.05)
            return [values[0] - half, values[0] + half]
        mids = [0.5 * (values[i] + values[i + 1]) for i in range(len(values) - 1)]
        first = values[0] - (mids[0] - values[0])
        last = values[-1] + (values[-1] - mids[-1])
        return [first] + mids + [last]

    x_edges = edges(list(x_values))
    y_edges = edges(list(y_values))
    for i in range(nx):
        for j in range(ny):
            fill = STABLE_FILL if stable_grid[i][j] else UNSTABLE_FILL
            x0 = frame.x(max(x_edges[i], frame.x_min))
            x1 = frame.x(min(x_edges[i + 1], frame.x_max))
            y0 = frame.y(min(y_edges[j + 1], frame.y_max))
            y1 = frame.y(max(y_edges[j], frame.y_min))
            parts.append(
                f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" '
                f'height="{_fmt(y1 - y0)}" fill="{fill}"/>'
            )
    if boundary:
        points = " ".join(
            f"{_fmt(frame.x(x))},{_fmt(frame.y(y))}" for x, y in boundary
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="#111111" '
            f'stroke-width="2"/>'
        )
    parts.extend(_axes(frame, title, xlabel, ylabel))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
