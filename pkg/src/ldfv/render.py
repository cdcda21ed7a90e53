"""Minimal image and plot writers: binary PPM maps and SVG line plots."""

from __future__ import annotations

from pathlib import Path

import numpy as np

# a few anchor colours of a perceptually ordered blue-yellow map
_ANCHORS = np.array([
    [0.267, 0.005, 0.329],
    [0.230, 0.322, 0.546],
    [0.128, 0.567, 0.551],
    [0.369, 0.789, 0.383],
    [0.993, 0.906, 0.144],
])


def _scaled(arr, lo=None, hi=None):
    a = np.asarray(arr, dtype=np.float64)
    finite = np.isfinite(a)
    lo = np.nanmin(a[finite]) if lo is None else lo
    hi = np.nanmax(a[finite]) if hi is None else hi
    span = hi - lo if hi > lo else 1.0
    return np.clip(np.where(finite, (a - lo) / span, 0.0), 0.0, 1.0)


def colormap(t):
    t = np.asarray(t, dtype=np.float64)
    pos = t * (len(_ANCHORS) - 1)
    i = np.clip(np.floor(pos).astype(int), 0, len(_ANCHORS) - 2)
    f = (pos - i)[..., None]
    return (1.0 - f) * _ANCHORS[i] + f * _ANCHORS[i + 1]


def write_ppm(path, rgb) -> None:
    """Write ``(h, w, 3)`` values in ``[0, 1]`` as binary PPM, top row first."""
    rgb = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    h, w, _ = rgb.shape
    data = np.round(rgb * 255).astype(np.uint8)
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + data.tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM file")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def density_map(field2d, lo=None, hi=None):
    """Colour image of ``(ny, nx)`` data with y growing upwards."""
    return colormap(_scaled(field2d, lo, hi))[::-1]


def contour_map(field2d, levels: int = 30, lo=None, hi=None):
    """Grayscale map with ``levels`` iso-lines drawn in black."""
    t = _scaled(field2d, lo, hi)
    band = np.minimum((t * levels).astype(int), levels - 1)
    edge = np.zeros(band.shape, dtype=bool)
    edge[:, 1:] |= band[:, 1:] != band[:, :-1]
    edge[1:, :] |= band[1:, :] != band[:-1, :]
    gray = 0.35 + 0.6 * t
    gray = np.where(edge, 0.0, gray)
    return np.repeat(gray[..., None], 3, axis=2)[::-1]


def write_svg_plot(path, series, xlabel: str = "", ylabel: str = "", title: str = "",
                   width: int = 640, height: int = 400) -> None:
    """Line plot; ``series`` maps a label to ``(x, y)`` arrays."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    m = 50
    sx = lambda v: m + (v - x0) / (x1 - x0) * (width - 2 * m)  # noqa: E731
    sy = lambda v: height - m - (v - y0) / (y1 - y0) * (height - 2 * m)  # noqa: E731
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" fill="none" stroke="black"/>']
    for k, (label, (x, y)) in enumerate(series.items()):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(np.asarray(x, float), np.asarray(y, float)))
        c = colors[k % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - m - 150}" y="{m + 16 * (k + 1)}" fill="{c}" font-size="12">{label}</text>')
    out.append(f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{title}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})">{ylabel}</text>')
    for v in (x0, x1):
        out.append(f'<text x="{sx(v):.1f}" y="{height - m + 16}" text-anchor="middle" font-size="10">{v:.3g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{m - 4}" y="{sy(v):.1f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
