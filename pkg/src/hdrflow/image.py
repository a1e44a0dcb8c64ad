"""Raster basics: luminance, integral images, pyramids, histogram matching.

Images are numpy arrays of float32 samples in [0, 1], shape (h, w) for
single-channel data or (h, w, 3) for RGB. Coordinates are (x, y) pairs with
x running along the width; arrays are indexed [y, x].
"""

from __future__ import annotations

import numpy as np

REC601 = (0.299, 0.587, 0.114)
PYRAMID_MAX_LEVELS = 5
PYRAMID_MIN_DIM = 100
HISTOGRAM_BINS = 256


def image_size(img: np.ndarray) -> tuple[int, int]:
    """(width, height) of an image array."""
    return img.shape[1], img.shape[0]


def luminance(img: np.ndarray) -> np.ndarray:
    """Rec.601 luminance of an RGB image, clamped to [0, 1]."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("luminance expects an (h, w, 3) image")
    wr, wg, wb = REC601
    lum = wr * img[..., 0] + wg * img[..., 1] + wb * img[..., 2]
    return np.clip(lum, 0.0, 1.0).astype(np.float32)


def integral(img: np.ndarray) -> np.ndarray:
    """Summed-area table of a single-channel image, double precision.

    The table has shape (h+1, w+1) with a zero top row and left column;
    entry [y, x] is the sum of all pixels in [0, x) x [0, y).
    """
    if img.ndim != 2:
        raise ValueError("integral expects a single-channel image")
    h, w = img.shape
    table = np.zeros((h + 1, w + 1), dtype=np.float64)
    np.cumsum(img, axis=0, dtype=np.float64, out=table[1:, 1:])
    np.cumsum(table[1:, 1:], axis=1, out=table[1:, 1:])
    return table


def rect_sum(table: np.ndarray, x0, y0, x1, y1):
    """Sum of pixels in the half-open rectangle [x0, x1) x [y0, y1).

    Bounds may be scalars or broadcastable integer arrays for batched
    queries. An empty rectangle sums to zero.
    """
    h1, w1 = table.shape
    x0, y0, x1, y1 = (np.asarray(v) for v in (x0, y0, x1, y1))
    if (np.any(x0 < 0) or np.any(y0 < 0) or np.any(x0 > x1) or np.any(y0 > y1)
            or np.any(x1 >= w1) or np.any(y1 >= h1)):
        raise ValueError("rectangle bounds out of range")
    return table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]


def downsample(img: np.ndarray) -> np.ndarray:
    """Halve an image by 2x2 box averaging; odd trailing row/column dropped."""
    h, w = img.shape[:2]
    if h < 2 or w < 2:
        raise ValueError("image too small to downsample")
    v = img[: (h // 2) * 2, : (w // 2) * 2]
    out = (v[0::2, 0::2] + v[0::2, 1::2] + v[1::2, 0::2] + v[1::2, 1::2]) * np.float32(0.25)
    return out.astype(np.float32)


def build_pyramid(img: np.ndarray,
                  max_levels: int = PYRAMID_MAX_LEVELS,
                  min_dim: int = PYRAMID_MIN_DIM) -> list[np.ndarray]:
    """Box-filtered half-resolution pyramid, full resolution first.

    A level is retained only while both its dimensions stay >= min_dim,
    up to max_levels levels total.
    """
    h, w = img.shape[:2]
    if min(h, w) < min_dim:
        raise ValueError(f"input below {min_dim} pixels in one dimension")
    levels = [img]
    while len(levels) < max_levels:
        h, w = levels[-1].shape[:2]
        if min(h // 2, w // 2) < min_dim:
            break
        levels.append(downsample(levels[-1]))
    return levels


def quantize_256(img: np.ndarray) -> np.ndarray:
    """Round [0, 1] samples onto the 256-level grid, as uint8 indices."""
    return np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _match_channel(src: np.ndarray, ref: np.ndarray) -> np.ndarray:
    bins = HISTOGRAM_BINS
    qs = quantize_256(src)
    qr = quantize_256(ref)
    cdf_s = np.cumsum(np.bincount(qs.ravel(), minlength=bins)) / qs.size
    cdf_r = np.cumsum(np.bincount(qr.ravel(), minlength=bins)) / qr.size
    # smallest reference level whose CDF reaches the source CDF; monotone by
    # construction since both CDFs are non-decreasing
    lut = np.searchsorted(cdf_r, cdf_s, side="left")
    lut = np.minimum(lut, bins - 1).astype(np.float32) / np.float32(255.0)
    return lut[qs]


def match_histogram(src: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Map src through the monotone transfer that matches ref's histogram.

    Matching is per channel over 256 bins; output values lie on the k/255
    grid. Matching an image to itself is the identity up to one bin.
    """
    if src.ndim != ref.ndim or (src.ndim == 3 and src.shape[2] != ref.shape[2]):
        raise ValueError("source and reference must have the same channel count")
    if src.ndim == 2:
        return _match_channel(src, ref)
    out = np.empty(src.shape, dtype=np.float32)
    for c in range(src.shape[2]):
        out[..., c] = _match_channel(src[..., c], ref[..., c])
    return out


def to_normalized(x, y, width: int, height: int):
    """Pixel coords to the centered frame with x in [-1, 1], y in [-h/w, h/w]."""
    w = float(width)
    return (2.0 * np.asarray(x, dtype=np.float64) - width) / w, \
           (2.0 * np.asarray(y, dtype=np.float64) - height) / w


def from_normalized(xn, yn, width: int, height: int):
    """Inverse of to_normalized."""
    w = float(width)
    return (np.asarray(xn, dtype=np.float64) * w + width) / 2.0, \
           (np.asarray(yn, dtype=np.float64) * w + height) / 2.0
