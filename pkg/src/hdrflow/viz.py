"""Debug renderings: flow color coding, match overlays, heatmaps."""

from __future__ import annotations

import numpy as np


def flow_to_color(flow: np.ndarray, max_radius: float | None = None) -> np.ndarray:
    """Color-code a flow field: hue from direction, saturation from magnitude."""
    u = flow[:, :, 0].astype(np.float64)
    v = flow[:, :, 1].astype(np.float64)
    rad = np.hypot(u, v)
    if max_radius is None:
        max_radius = max(float(rad.max()), 1e-9)
    rad = np.minimum(rad / max_radius, 1.0)
    angle = np.arctan2(-v, -u) / np.pi  # [-1, 1]
    hue = (angle + 1.0) / 2.0           # [0, 1]

    # piecewise hue -> rgb over six sectors
    h6 = hue * 6.0
    sector = np.minimum(h6.astype(int), 5)
    frac = h6 - sector
    ramps = np.stack([np.ones_like(frac), 1.0 - frac, np.zeros_like(frac),
                      np.zeros_like(frac), frac, np.ones_like(frac)])
    rgb = np.stack([ramps[sector % 6], ramps[(sector + 4) % 6],
                    ramps[(sector + 2) % 6]], axis=-1)
    out = 1.0 - rad[:, :, None] * (1.0 - rgb)
    return out.astype(np.float32)


def heatmap(values: np.ndarray, lo: float | None = None,
            hi: float | None = None) -> np.ndarray:
    """Map a scalar field to a blue-white-red ramp image."""
    v = values.astype(np.float64)
    lo = float(v.min()) if lo is None else lo
    hi = float(v.max()) if hi is None else hi
    t = np.zeros_like(v) if hi <= lo else np.clip((v - lo) / (hi - lo), 0.0, 1.0)
    r = np.clip(2.0 * t, 0.0, 1.0)
    b = np.clip(2.0 * (1.0 - t), 0.0, 1.0)
    g = 1.0 - np.abs(2.0 * t - 1.0)
    return np.stack([r, g, b], axis=-1).astype(np.float32)


def _draw_segment(img, x0, y0, x1, y1, color):
    steps = int(max(abs(x1 - x0), abs(y1 - y0))) + 1
    xs = np.round(np.linspace(x0, x1, steps)).astype(int)
    ys = np.round(np.linspace(y0, y1, steps)).astype(int)
    keep = (xs >= 0) & (xs < img.shape[1]) & (ys >= 0) & (ys < img.shape[0])
    img[ys[keep], xs[keep]] = color


def overlay_matches(lum: np.ndarray, matches: np.ndarray) -> np.ndarray:
    """Reference luminance with match displacements drawn on top."""
    canvas = np.repeat(np.clip(lum, 0.0, 1.0)[:, :, None], 3, axis=2).astype(np.float32)
    for xr, yr, xs, ys, _ in np.asarray(matches).reshape(-1, 5):
        _draw_segment(canvas, xr, yr, xs, ys, (0.1, 0.9, 0.2))
        _draw_segment(canvas, xr, yr, xr, yr, (1.0, 0.2, 0.1))
    return canvas
