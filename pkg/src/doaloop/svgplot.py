"""Hand-emitted SVG trajectory plots (mean line with a +/- std band).

Textual, diffable, dependency-free; the output is a pure function of the
numeric inputs (fixed-precision coordinates), so identical data regenerates
identical bytes.
"""

from __future__ import annotations

import math

import numpy as np

WIDTH = 640
HEIGHT = 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 36, 48

MEAN_COLOR = "#1f77b4"
BAND_COLOR = "#aec7e8"
TRUE_COLOR = "#555555"


def _nice_step(span: float, target_ticks: int = 6) -> float:
    if span <= 0:
        return 1.0
    raw = span / target_ticks
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            return mult * mag
    return 10.0 * mag


def _ticks(lo: float, hi: float) -> list:
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * max(1.0, abs(hi)):
        ticks.append(0.0 if abs(value) < step * 1e-9 else value)
        value += step
    return ticks


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _fmt_tick(value: float) -> str:
    return f"{value:g}"


def render_trajectory_svg(times, mean, std=None, extra_lines=(),
                          true_value=None, title="",
                          xlabel="time (s)", ylabel="theta (deg)") -> str:
    """Render a trajectory plot; ``extra_lines`` Iterable[(label, values)]
    draws thin per-run lines under the mean."""
    times = np.asarray(times, dtype=float)
    mean = np.asarray(mean, dtype=float)
    lo_candidates = [mean.min()]
    hi_candidates = [mean.max()]
    if std is not None:
        std = np.asarray(std, dtype=float)
        lo_candidates.append((mean - std).min())
        hi_candidates.append((mean + std).max())
    for _, values in extra_lines:
        lo_candidates.append(np.min(values))
        hi_candidates.append(np.max(values))
    if true_value is not None:
        lo_candidates.append(true_value)
        hi_candidates.append(true_value)
    y_lo, y_hi = min(lo_candidates), max(hi_candidates)
    pad = max(0.5, 0.08 * (y_hi - y_lo))
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = float(times.min()), float(times.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    def poly_points(xs, ys):
        return " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>')

    # axes frame
    parts.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>')

    for tick in _ticks(x_lo, x_hi):
        x = px(tick)
        parts.append(f'<line x1="{_fmt(x)}" y1="{py(y_lo):.2f}" x2="{_fmt(x)}" '
                     f'y2="{py(y_lo) + 5:.2f}" stroke="#333333"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{py(y_lo) + 20:.2f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{_fmt_tick(tick)}</text>')
    for tick in _ticks(y_lo, y_hi):
        y = py(tick)
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{_fmt(y)}" x2="{MARGIN_L}" '
                     f'y2="{_fmt(y)}" stroke="#333333"/>')
        parts.append(f'<text x="{MARGIN_L - 9}" y="{_fmt(float(y) + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{_fmt_tick(tick)}</text>')
    parts.append(f'<text x="{MARGIN_L + plot_w / 2:.0f}" y="{HEIGHT - 10}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{MARGIN_T + plot_h / 2:.0f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.0f})">{ylabel}</text>')

    if std is not None:
        upper = poly_points(times, mean + std)
        lower = poly_points(times[::-1], (mean - std)[::-1])
        parts.append(f'<polygon points="{upper} {lower}" fill="{BAND_COLOR}" '
                     f'fill-opacity="0.8" stroke="none"/>')
    for _, values in extra_lines:
        parts.append(f'<polyline points="{poly_points(times, values)}" fill="none" '
                     f'stroke="{MEAN_COLOR}" stroke-opacity="0.35" stroke-width="1"/>')
    if true_value is not None:
        parts.append(f'<line x1="{px(x_lo):.2f}" y1="{_fmt(py(true_value))}" '
                     f'x2="{px(x_hi):.2f}" y2="{_fmt(py(true_value))}" '
                     f'stroke="{TRUE_COLOR}" stroke-dasharray="6 4"/>')
    parts.append(f'<polyline points="{poly_points(times, mean)}" fill="none" '
                 f'stroke="{MEAN_COLOR}" stroke-width="2"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
