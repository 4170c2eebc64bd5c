"""Minimal SVG rendering of curves in the (r, x) half-plane."""
from __future__ import annotations

import numpy as np

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def render(curves: list[tuple[str, np.ndarray]], r_cyl: float, width: int = 640, margin: float = 0.1) -> str:
    """SVG text for closed polylines plus the axis x = 0 and the line r = r_cyl.

    The viewport is the bounding box of the curves (and r = 0, r = r_cyl)
    padded by ``margin`` of its size on each side.
    """
    pts = np.vstack([np.asarray(p, float) for _, p in curves])
    r0, r1 = min(0.0, pts[:, 0].min()), max(r_cyl, pts[:, 0].max())
    x0, x1 = pts[:, 1].min(), pts[:, 1].max()
    dr, dx = r1 - r0, max(x1 - x0, 1e-12)
    r0, r1 = r0 - margin * dr, r1 + margin * dr
    x0, x1 = x0 - margin * dx, x1 + margin * dx
    scale = width / (r1 - r0)
    height = int(round((x1 - x0) * scale))

    def xy(r, x):
        return (r - r0) * scale, (x1 - x) * scale

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    ax0, ay = xy(r0, 0.0)
    ax1, _ = xy(r1, 0.0)
    lines.append(f'<line x1="{ax0:.3f}" y1="{ay:.3f}" x2="{ax1:.3f}" y2="{ay:.3f}" stroke="black" stroke-width="1"/>')
    cx, cy0 = xy(r_cyl, x1)
    _, cy1 = xy(r_cyl, x0)
    lines.append(f'<line x1="{cx:.3f}" y1="{cy0:.3f}" x2="{cx:.3f}" y2="{cy1:.3f}" stroke="gray" '
                 f'stroke-dasharray="6,4" stroke-width="1"/>')
    for k, (label, p) in enumerate(curves):
        p = np.asarray(p, float)
        coords = " ".join("{:.3f},{:.3f}".format(*xy(r, x)) for r, x in p)
        colour = PALETTE[k % len(PALETTE)]
        lines.append(f'<polygon points="{coords}" fill="none" stroke="{colour}" stroke-width="1.5">'
                     f'<title>{label}</title></polygon>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write(path, curves, r_cyl: float, **kw) -> None:
    with open(path, "w") as fh:
        fh.write(render(curves, r_cyl, **kw))
