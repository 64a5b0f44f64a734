"""Self-contained SVG line plots of sample trajectories."""

from __future__ import annotations

from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 640, 360
MARGIN = 50


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def segments(n_points: int, breaks: Sequence[int]) -> list[tuple[int, int]]:
    """Index ranges [lo, hi] of continuous pieces; a break at step k separates points k and k + 1."""
    cuts = sorted({int(k) for k in breaks if 0 <= k < n_points - 1})
    out, lo = [], 0
    for k in cuts:
        out.append((lo, k))
        lo = k + 1
    out.append((lo, n_points - 1))
    return out


def trajectory_svg(t: np.ndarray, v: np.ndarray, breaks: Sequence[int], title: str, ylabel: str,
                   version: str = "") -> str:
    """Line plot of ``v`` against ``t`` with the line cut at every jump step.

    The pre-jump value gets an open circle and the post-jump value a filled
    one, so discontinuities show as gaps rather than steep segments.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    t0, t1 = float(t[0]), float(t[-1])
    span = t1 - t0 if t1 > t0 else 1.0
    w, h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
    px = MARGIN + (t - t0) / span * w
    py = MARGIN + (hi - v) / (hi - lo) * h

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- jumpsv {version} -->",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="{MARGIN // 2}" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{MARGIN}" y1="{MARGIN + h}" x2="{MARGIN + w}" y2="{MARGIN + h}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{MARGIN + h}" stroke="black"/>',
        f'<text x="{MARGIN + w // 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">t</text>',
        f'<text x="12" y="{MARGIN + h // 2}" font-size="12" transform="rotate(-90 12 {MARGIN + h // 2})" '
        f'text-anchor="middle">{ylabel}</text>',
    ]
    for val, y in ((hi - pad, MARGIN + pad / (hi - lo) * h), (lo + pad, MARGIN + h - pad / (hi - lo) * h)):
        lines.append(f'<text x="{MARGIN - 4}" y="{_fmt(y)}" text-anchor="end" font-size="10">{val:.4g}</text>')
    for t_lab, x in ((t0, MARGIN), (t1, MARGIN + w)):
        lines.append(f'<text x="{x}" y="{MARGIN + h + 14}" text-anchor="middle" font-size="10">{t_lab:g}</text>')
    for a, b in segments(len(t), breaks):
        pts = " ".join(f"{_fmt(px[i])},{_fmt(py[i])}" for i in range(a, b + 1))
        lines.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
    for k in sorted(set(int(k) for k in breaks)):
        if 0 <= k < len(t) - 1:
            lines.append(f'<circle cx="{_fmt(px[k])}" cy="{_fmt(py[k])}" r="2.5" fill="white" stroke="steelblue"/>')
            lines.append(f'<circle cx="{_fmt(px[k + 1])}" cy="{_fmt(py[k + 1])}" r="2.5" fill="steelblue"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
