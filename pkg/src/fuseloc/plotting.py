"""Minimal SVG line charts for trajectories and error series.

Only reads its inputs; every chart is written as a standalone SVG file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from fuseloc.evaluation import PoseSeries, error_series

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass
class Line:
    label: str
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.x.shape != self.y.shape:
            raise ValueError(f"line '{self.label}' has mismatched x and y lengths")


def nice_ticks(lo: float, hi: float, target: int = 6) -> np.ndarray:
    """Round tick positions covering ``[lo, hi]`` with steps of 1, 2 or 5 x 10^k."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("tick range must be finite")
    # spans lost in round-off (relative to the values) plot as a flat line
    if hi - lo <= max(1e-9 * max(abs(lo), abs(hi)), 1e-200):
        pad = abs(lo) * 0.1 or 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1.0, 2.0, 5.0, 10.0) if m * mag >= raw)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    n = int(round((stop - start) / step))
    return start + step * np.arange(n + 1)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_chart(lines: Sequence[Line], title: str = "", xlabel: str = "", ylabel: str = "",
               width: int = 720, height: int = 420, equal_aspect: bool = False) -> str:
    """Render ``lines`` as an SVG document string."""
    lines = [ln for ln in lines if ln.x.size]
    if not lines:
        raise ValueError("nothing to plot")
    xs = np.concatenate([ln.x for ln in lines])
    ys = np.concatenate([ln.y for ln in lines])
    ok = np.isfinite(xs) & np.isfinite(ys)
    if not ok.any():
        raise ValueError("no finite points to plot")
    xt = nice_ticks(xs[ok].min(), xs[ok].max())
    yt = nice_ticks(ys[ok].min(), ys[ok].max())

    left, right, top, bottom = 70, 20, 40, 55
    pw, ph = width - left - right, height - top - bottom
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    if equal_aspect:
        # same meters per pixel on both axes, centred in the plot area
        scale = max((x1 - x0) / pw, (y1 - y0) / ph)
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        x0, x1 = cx - 0.5 * pw * scale, cx + 0.5 * pw * scale
        y0, y1 = cy - 0.5 * ph * scale, cy + 0.5 * ph * scale
        xt = xt[(xt >= x0) & (xt <= x1)]
        yt = yt[(yt >= y0) & (yt <= y1)]

    def px(x):
        return left + (np.asarray(x) - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (np.asarray(y) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for v in xt:
        X = px(v)
        out.append(f'<line x1="{X:.2f}" y1="{top}" x2="{X:.2f}" y2="{top + ph}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{X:.2f}" y="{top + ph + 16}" text-anchor="middle">{_fmt(v)}</text>')
    for v in yt:
        Y = py(v)
        out.append(f'<line x1="{left}" y1="{Y:.2f}" x2="{left + pw}" y2="{Y:.2f}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{left - 6}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(v)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')

    for i, ln in enumerate(lines):
        color = PALETTE[i % len(PALETTE)]
        keep = np.isfinite(ln.x) & np.isfinite(ln.y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(ln.x[keep]), py(ln.y[keep])))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw - 150}" y1="{ly - 4}" x2="{left + pw - 125}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 120}" y="{ly}">{escape(ln.label)}</text>')

    out.append(f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(16,{top + ph / 2}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: str | Path, svg: str) -> Path:
    path = Path(path)
    path.write_text(svg, encoding="utf-8")
    return path


def plot_run(truth: PoseSeries, estimate: PoseSeries, out_dir: str | Path) -> list[Path]:
    """Write trajectory, heading and per-axis error charts into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    err = error_series(truth, estimate)
    charts = {
        "trajectory.svg": line_chart(
            [Line("truth", truth.pose[:, 0], truth.pose[:, 1]),
             Line("fused", estimate.pose[:, 0], estimate.pose[:, 1])],
            "Trajectory", "x [m]", "y [m]", equal_aspect=True),
        "heading.svg": line_chart(
            [Line("truth", truth.t, np.degrees(truth.pose[:, 2])),
             Line("fused", estimate.t, np.degrees(estimate.pose[:, 2]))],
            "Heading", "time [s]", "heading [deg]"),
        "error_x.svg": line_chart([Line("x error", err.t, err.ex)],
                                  "Position error along x", "time [s]", "error [m]"),
        "error_y.svg": line_chart([Line("y error", err.t, err.ey)],
                                  "Position error along y", "time [s]", "error [m]"),
        "error_heading.svg": line_chart([Line("heading error", err.t, np.degrees(err.etheta))],
                                        "Heading error", "time [s]", "error [deg]"),
    }
    return [write_svg(out_dir / name, svg) for name, svg in charts.items()]
