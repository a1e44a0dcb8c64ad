"""Synthetic two-exposure stacks with per-pixel ground-truth flow.

Scenes are a textured background moved by one homography plus an optional
foreground rectangle carrying an extra shift (parallax). The source image is
the photometrically scaled, displaced reference with additive noise; both
images and the exact flow field come back together so registration can be
scored against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

_PAD = 48


@dataclass
class SceneSpec:
    width: int = 640
    height: int = 480
    background_shift: tuple[float, float] = (-3.0, 2.0)
    background_rotation_deg: float = 0.0
    foreground_rect: tuple[int, int, int, int] | None = None  # x0, y0, x1, y1
    foreground_shift: tuple[float, float] = (10.0, 0.0)
    stops: float = 3.0
    noise_sigma: float = 0.01
    base_range: tuple[float, float] = (0.015, 0.14)
    highlight_rect: tuple[int, int, int, int] | None = None
    highlight_range: tuple[float, float] = (0.2, 0.5)

    def validate(self):
        if self.width < 16 or self.height < 16:
            raise ValueError("scene too small")
        if self.base_range[0] >= self.base_range[1]:
            raise ValueError("base_range must be increasing")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for rect in (self.foreground_rect, self.highlight_rect):
            if rect is not None:
                x0, y0, x1, y1 = rect
                if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
                    raise ValueError(f"rectangle {rect} outside the scene")


@dataclass
class SynthStack:
    ref: np.ndarray
    src: np.ndarray
    flow: np.ndarray                 # ground truth, (h, w, 2)
    exposures: tuple[float, float]   # (reference, source) seconds
    foreground_mask: np.ndarray


def _pixel_homography(shift, rotation_deg, width, height):
    cx, cy = width / 2.0, height / 2.0
    th = np.deg2rad(rotation_deg)
    rot = np.array([[np.cos(th), -np.sin(th), 0.0],
                    [np.sin(th), np.cos(th), 0.0],
                    [0.0, 0.0, 1.0]])
    center = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    uncenter = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    h = center @ rot @ uncenter
    h[0, 2] += shift[0]
    h[1, 2] += shift[1]
    return h


def _apply_px(h, xs, ys):
    denom = h[2, 0] * xs + h[2, 1] * ys + h[2, 2]
    return ((h[0, 0] * xs + h[0, 1] * ys + h[0, 2]) / denom,
            (h[1, 0] * xs + h[1, 1] * ys + h[1, 2]) / denom)


def _texture(rng, shape, lo, hi):
    # two octaves of smoothed noise, strong local contrast at the 4-12 px
    # scale so quadrant cornerness has something to bite on
    coarse = gaussian_filter(rng.uniform(size=shape), 5.0)
    fine = gaussian_filter(rng.uniform(size=shape), 1.5)
    tex = 0.55 * coarse + 0.45 * fine
    tex -= tex.min()
    peak = tex.max()
    if peak > 0:
        tex /= peak
    return lo + tex * (hi - lo)


def _sample_bilinear(canvas, xs, ys):
    h, w = canvas.shape[:2]
    cx = np.clip(xs, 0, w - 1)
    cy = np.clip(ys, 0, h - 1)
    x0 = np.floor(cx).astype(np.intp)
    y0 = np.floor(cy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (cx - x0)[..., None]
    fy = (cy - y0)[..., None]
    top = canvas[y0, x0] * (1 - fx) + canvas[y0, x1] * fx
    bot = canvas[y1, x0] * (1 - fx) + canvas[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def synth_stack(spec: SceneSpec, seed: int = 0) -> SynthStack:
    """Render a deterministic reference/source pair plus ground-truth flow."""
    spec.validate()
    rng = np.random.default_rng(seed)
    w, h = spec.width, spec.height
    cw, ch = w + 2 * _PAD, h + 2 * _PAD

    lo, hi = spec.base_range
    base = _texture(rng, (ch, cw), lo, hi)
    tint = np.stack([gaussian_filter(rng.uniform(size=(ch, cw)), 8.0)
                     for _ in range(3)], axis=-1)
    tint -= tint.mean(axis=(0, 1), keepdims=True)
    canvas = np.clip(base[:, :, None] * (1.0 + 1.2 * tint), 0.0, 1.0)

    if spec.highlight_rect is not None:
        x0, y0, x1, y1 = spec.highlight_rect
        hl_lo, hl_hi = spec.highlight_range
        block = _texture(rng, (y1 - y0, x1 - x0), hl_lo, hl_hi)
        canvas[_PAD + y0:_PAD + y1, _PAD + x0:_PAD + x1] = \
            np.clip(block[:, :, None] * (1.0 + 0.3 * tint[_PAD + y0:_PAD + y1,
                                                          _PAD + x0:_PAD + x1]),
                    0.0, 1.0)

    ref = canvas[_PAD:_PAD + h, _PAD:_PAD + w].astype(np.float32)

    h_bg = _pixel_homography(spec.background_shift,
                             spec.background_rotation_deg, w, h)
    fg_mask = np.zeros((h, w), dtype=bool)
    if spec.foreground_rect is not None:
        x0, y0, x1, y1 = spec.foreground_rect
        fg_mask[y0:y1, x0:x1] = True
        h_fg = h_bg.copy()
        h_fg[0, 2] += spec.foreground_shift[0]
        h_fg[1, 2] += spec.foreground_shift[1]
    else:
        h_fg = h_bg

    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    bx, by = _apply_px(h_bg, xs, ys)
    fx_, fy_ = _apply_px(h_fg, xs, ys)
    flow = np.where(fg_mask[:, :, None],
                    np.stack([fx_ - xs, fy_ - ys], axis=-1),
                    np.stack([bx - xs, by - ys], axis=-1)).astype(np.float32)

    # render the source on its own grid: a source pixel shows the foreground
    # when it is the image of a foreground reference point (occlusion wins)
    h_bg_inv = np.linalg.inv(h_bg)
    h_fg_inv = np.linalg.inv(h_fg)
    gx, gy = _apply_px(h_fg_inv, xs, ys)
    from_fg = np.zeros((h, w), dtype=bool)
    if spec.foreground_rect is not None:
        x0, y0, x1, y1 = spec.foreground_rect
        from_fg = (gx >= x0) & (gx < x1) & (gy >= y0) & (gy < y1)
    px, py = _apply_px(h_bg_inv, xs, ys)
    px = np.where(from_fg, gx, px)
    py = np.where(from_fg, gy, py)
    src_lin = _sample_bilinear(canvas, px + _PAD, py + _PAD)

    src = src_lin * (2.0 ** spec.stops)
    if spec.noise_sigma > 0:
        src = src + rng.normal(scale=spec.noise_sigma, size=src.shape)
    src = np.clip(src, 0.0, 1.0).astype(np.float32)

    t_ref = 0.01
    return SynthStack(ref=ref, src=src, flow=flow,
                      exposures=(t_ref, t_ref * 2.0 ** spec.stops),
                      foreground_mask=fg_mask)
