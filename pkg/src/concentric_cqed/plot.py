"""Minimal self-contained SVG line plots (no plotting library needed)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

WIDTH, HEIGHT, MARGIN = 640, 420, 60


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def line_plot(path, series, xlabel="", ylabel="", title=""):
    """Write an SVG with one polyline per ``(x, y, color, label)`` in ``series``."""
    xs = np.concatenate([np.asarray(s[0], float) for s in series])
    ys = np.concatenate([np.asarray(s[1], float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = 0.0 if ys.min() >= 0 else float(ys.min()), float(ys.max()) * 1.05 or 1.0
    if x1 == x0:
        x1 = x0 + 1.0

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        'fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.1f}" y="{HEIGHT - MARGIN + 18}" font-size="11" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN - 6}" y="{py(t) + 4:.1f}" font-size="11" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" font-size="13" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {HEIGHT / 2})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="24" font-size="14" text-anchor="middle">{title}</text>')
    for k, (x, y, color, label) in enumerate(series):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 16 + 16 * k}" font-size="12" '
                   f'text-anchor="end" fill="{color}">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
    return Path(path)
