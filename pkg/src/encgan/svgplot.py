"""Minimal standalone SVG line charts, no external assets."""

from __future__ import annotations

import numpy as np

__all__ = ["line_chart", "spectrum_chart"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _finite_extent(values, pad_fraction=0.05):
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        return 0.0, 1.0
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        lo -= 0.5
        hi += 0.5
    pad = (hi - lo) * pad_fraction
    return lo - pad, hi + pad


def line_chart(series, path, title="", width=640, height=400,
               x_label="", y_label=""):
    """Write a chart of ``(label, xs, ys)`` triples as a standalone SVG."""
    margin = 54
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    all_x = np.concatenate([np.asarray(xs, dtype=np.float64) for _, xs, _ in series])
    all_y = np.concatenate([np.asarray(ys, dtype=np.float64) for _, _, ys in series])
    x_lo, x_hi = _finite_extent(all_x, 0.0)
    y_lo, y_hi = _finite_extent(all_y)

    def sx(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333" stroke-width="1"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{x_label}</text>',
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 14 {height / 2:.1f})">{y_label}</text>',
        f'<text x="{margin}" y="{height - margin + 14}" font-family="sans-serif" '
        f'font-size="10">{x_lo:.4g}</text>',
        f'<text x="{width - margin}" y="{height - margin + 14}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{x_hi:.4g}</text>',
        f'<text x="{margin - 4}" y="{height - margin}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_lo:.4g}</text>',
        f'<text x="{margin - 4}" y="{margin + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_hi:.4g}</text>',
    ]
    for k, (label, xs, ys) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        points = " ".join(
            f"{sx(float(x)):.2f},{sy(float(y)):.2f}"
            for x, y in zip(xs, ys)
            if np.isfinite(x) and np.isfinite(y)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        if label:
            parts.append(
                f'<text x="{width - margin - 4}" y="{margin + 14 + 13 * k}" '
                f'text-anchor="end" font-family="sans-serif" font-size="11" '
                f'fill="{color}">{label}</text>'
            )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def spectrum_chart(values, path, title="eigenvalue spectrum"):
    """Write a descending spectrum as an indexed line chart."""
    values = np.asarray(values, dtype=np.float64)
    xs = np.arange(1, values.size + 1)
    line_chart([("eigenvalue", xs, values)], path, title=title,
               x_label="rank", y_label="value")
