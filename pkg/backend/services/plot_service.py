import html
import logging
import math
import os
from typing import List, Tuple

from schemas import PlotSpec

logger = logging.getLogger(__name__)

COLORS = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
]

MARGIN_LEFT = 80
MARGIN_RIGHT = 200
MARGIN_TOP = 50
MARGIN_BOTTOM = 60
N_TICKS = 5


def _range(values: List[float]) -> Tuple[float, float]:
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.5 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _tick_label(value: float) -> str:
    return format(value, ".3g")


def render_plot(spec: PlotSpec, path: str) -> None:
    """Write `spec` as a standalone SVG 1.1 line chart. Output bytes depend only on `spec`."""
    log_y = spec.y_scale == "log"

    def y_value(y: float) -> float:
        return math.log10(y) if log_y else y

    points = []
    for series in spec.series:
        kept = [(x, y) for x, y in zip(series.x, series.y) if math.isfinite(y) and (y > 0 or not log_y)]
        points.append(kept)
    all_x = [x for kept in points for x, _ in kept]
    all_y = [y_value(y) for kept in points for _, y in kept]
    if not all_y:
        raise ValueError("No finite values to plot" + (" on a log scale" if log_y else ""))

    x_lo, x_hi = _range(all_x)
    y_lo, y_hi = _range(all_y)

    left, top = MARGIN_LEFT, MARGIN_TOP
    right, bottom = spec.width - MARGIN_RIGHT, spec.height - MARGIN_BOTTOM
    plot_w, plot_h = right - left, bottom - top

    def px(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return bottom - (y_value(y) - y_lo) / (y_hi - y_lo) * plot_h

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
        f'<text x="{spec.width / 2:.1f}" y="28" text-anchor="middle" font-size="18" font-family="Arial">'
        f'{html.escape(spec.title)}</text>',
    ]

    for i in range(N_TICKS + 1):
        yv = y_lo + (y_hi - y_lo) * i / N_TICKS
        y = bottom - i * plot_h / N_TICKS
        label = _tick_label(10 ** yv if log_y else yv)
        lines.append(f'<line x1="{left}" y1="{y:.2f}" x2="{right}" y2="{y:.2f}" stroke="#d9d9d9" stroke-width="1"/>')
        lines.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="12" font-family="Arial">{label}</text>')

        xv = x_lo + (x_hi - x_lo) * i / N_TICKS
        x = left + i * plot_w / N_TICKS
        lines.append(f'<line x1="{x:.2f}" y1="{bottom}" x2="{x:.2f}" y2="{bottom + 5}" stroke="#000000" stroke-width="1"/>')
        lines.append(
            f'<text x="{x:.2f}" y="{bottom + 20}" text-anchor="middle" font-size="12" font-family="Arial">{_tick_label(xv)}</text>'
        )

    lines.append(f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="#000000" stroke-width="1.5"/>')
    lines.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="#000000" stroke-width="1.5"/>')
    lines.append(
        f'<text x="{(left + right) / 2:.1f}" y="{spec.height - 15}" text-anchor="middle" font-size="14" '
        f'font-family="Arial">{html.escape(spec.x_label)}</text>'
    )
    lines.append(
        f'<text x="20" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-size="14" font-family="Arial" '
        f'transform="rotate(-90 20 {(top + bottom) / 2:.1f})">{html.escape(spec.y_label)}</text>'
    )

    legend_x = right + 20
    for idx, (series, kept) in enumerate(zip(spec.series, points)):
        color = COLORS[idx % len(COLORS)]
        if kept:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in kept)
            lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = top + 10 + idx * 22
        lines.append(f'<line x1="{legend_x}" y1="{ly}" x2="{legend_x + 24}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        lines.append(
            f'<text x="{legend_x + 30}" y="{ly + 4}" text-anchor="start" font-size="12" font-family="Arial">'
            f'{html.escape(series.label)}</text>'
        )

    lines.append("</svg>")

    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise OSError(f"Plot directory does not exist: {directory}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"Wrote plot with {len(spec.series)} series to {path}")
