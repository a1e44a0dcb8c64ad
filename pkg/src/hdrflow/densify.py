"""Sparse-to-dense flow propagation and backward warping.

The sparse flow is splatted into two maps holding the flow components at
match pixels (zero elsewhere) plus an indicator map. All three are smoothed
with the same edge-aware filter and the dense flow is the per-pixel ratio of
smoothed flow to smoothed indicator, which keeps the flow exact at match
pixels and turns the filter into a normalized scattered-data interpolant.

Smoothing uses the domain-transform recursive filter: each pass runs a
one-pole forward/backward recursion along rows then columns, with the
feedback coefficient a^d driven by the guide image's gradient so that edges
(large d) block propagation. Pass i of N uses a standard deviation of
sigma_s * sqrt(3) * 2^(N-i) / sqrt(4^N - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import homography_pixel_flow

DEFAULT_SIGMA_S = 400.0
DEFAULT_SIGMA_R = 0.2
DEFAULT_PASSES = 3
NORMALIZATION_FLOOR = 1e-4


@dataclass
class SparseMaps:
    """Flow-component maps and corner indicator on the reference grid."""
    pu: np.ndarray
    pv: np.ndarray
    n: np.ndarray


def build_sparse_maps(matches: np.ndarray, width: int, height: int) -> SparseMaps:
    """Splat matches into flow maps; pixel collisions keep the lowest score."""
    pu = np.zeros((height, width), dtype=np.float64)
    pv = np.zeros((height, width), dtype=np.float64)
    ind = np.zeros((height, width), dtype=np.float64)
    best: dict[tuple[int, int], tuple[float, int]] = {}
    matches = np.asarray(matches, dtype=np.float64).reshape(-1, 5)
    for i, (xr, yr, xs, ys, score) in enumerate(matches):
        x, y = int(round(xr)), int(round(yr))
        if not (0 <= x < width and 0 <= y < height):
            raise ValueError(f"match reference position ({xr}, {yr}) out of bounds")
        key = (x, y)
        if key not in best or (score, i) < best[key][:2]:
            best[key] = (score, i)
    for (x, y), (_, i) in best.items():
        pu[y, x] = matches[i, 2] - matches[i, 0]
        pv[y, x] = matches[i, 3] - matches[i, 1]
        ind[y, x] = 1.0
    return SparseMaps(pu, pv, ind)


def _domain_distances(guide: np.ndarray, sigma_s: float, sigma_r: float):
    g = np.asarray(guide, dtype=np.float64)
    if g.ndim == 2:
        g = g[:, :, None]
    ratio = sigma_s / sigma_r
    dx = 1.0 + ratio * np.abs(np.diff(g, axis=1)).sum(axis=2)   # (h, w-1)
    dy = 1.0 + ratio * np.abs(np.diff(g, axis=0)).sum(axis=2)   # (h-1, w)
    return dx, dy


def _scan_axis0(buf: np.ndarray, a: np.ndarray) -> None:
    # buf (m, ...) scanned along axis 0; a (m-1, ...) feedback coefficients
    # between consecutive samples. Forward then backward, in place.
    for i in range(1, buf.shape[0]):
        buf[i] += a[i - 1] * (buf[i - 1] - buf[i])
    for i in range(buf.shape[0] - 2, -1, -1):
        buf[i] += a[i] * (buf[i + 1] - buf[i])


def dt_filter(guide: np.ndarray, data: np.ndarray,
              sigma_s: float = DEFAULT_SIGMA_S,
              sigma_r: float = DEFAULT_SIGMA_R,
              passes: int = DEFAULT_PASSES) -> np.ndarray:
    """Cross-bilateral smoothing of `data` steered by `guide` edges.

    `data` may be (h, w) or (h, w, k); all planes share the guide weights.
    Returns float64 output of the same shape.
    """
    if sigma_s <= 0 or sigma_r <= 0:
        raise ValueError("sigma_s and sigma_r must be positive")
    if passes < 1:
        raise ValueError("passes must be >= 1")
    if guide.shape[:2] != data.shape[:2]:
        raise ValueError("guide and data dimensions differ")

    squeeze = data.ndim == 2
    out = np.asarray(data, dtype=np.float64).copy()
    if squeeze:
        out = out[:, :, None]
    h, w, _ = out.shape

    dx, dy = _domain_distances(guide, sigma_s, sigma_r)
    root = np.sqrt(2.0)
    denom = np.sqrt(4.0 ** passes - 1.0)
    for i in range(1, passes + 1):
        sigma_i = sigma_s * np.sqrt(3.0) * 2.0 ** (passes - i) / denom
        ax = np.exp(-root / sigma_i * dx)
        ay = np.exp(-root / sigma_i * dy)
        if w > 1:
            cols = np.ascontiguousarray(out.transpose(1, 0, 2))
            _scan_axis0(cols, np.ascontiguousarray(ax.T)[:, :, None])
            out = np.ascontiguousarray(cols.transpose(1, 0, 2))
        if h > 1:
            _scan_axis0(out, ay[:, :, None])
    return out[:, :, 0] if squeeze else out


def densify_flow(guide: np.ndarray, maps: SparseMaps,
                 fallback: np.ndarray | None = None,
                 sigma_s: float = DEFAULT_SIGMA_S,
                 sigma_r: float = DEFAULT_SIGMA_R,
                 passes: int = DEFAULT_PASSES,
                 floor: float = NORMALIZATION_FLOOR) -> np.ndarray:
    """Dense (h, w, 2) flow from sparse maps via normalized edge-aware filtering.

    Where the smoothed indicator falls to `floor` or below, too little match
    support reaches the pixel and the flow falls back to the global
    homography (zero flow when none is given).
    """
    h, w = maps.n.shape
    if guide.shape[:2] != (h, w):
        raise ValueError("guide and sparse maps dimensions differ")
    stacked = np.stack([maps.pu, maps.pv, maps.n], axis=-1)
    smooth = dt_filter(guide, stacked, sigma_s, sigma_r, passes)
    weight = smooth[:, :, 2]
    supported = weight > floor

    if fallback is not None:
        flow = homography_pixel_flow(fallback, w, h).astype(np.float64)
    else:
        flow = np.zeros((h, w, 2), dtype=np.float64)
    np.divide(smooth[:, :, 0], weight, out=flow[:, :, 0], where=supported)
    np.divide(smooth[:, :, 1], weight, out=flow[:, :, 1], where=supported)
    return flow.astype(np.float32)


def warp_image(src: np.ndarray, flow: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Backward-warp src by sampling at p + flow(p) with bilinear interpolation.

    Sample positions outside the source are clamped to the border and
    reported False in the validity mask.
    """
    h, w = src.shape[:2]
    if flow.shape[:2] != (h, w) or flow.shape[2] != 2:
        raise ValueError("flow must be (h, w, 2) matching the source")
    xs = np.arange(w, dtype=np.float64)[None, :]
    ys = np.arange(h, dtype=np.float64)[:, None]
    sx = xs + flow[:, :, 0].astype(np.float64)
    sy = ys + flow[:, :, 1].astype(np.float64)
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)

    cx = np.clip(sx, 0, w - 1)
    cy = np.clip(sy, 0, h - 1)
    x0 = np.floor(cx).astype(np.intp)
    y0 = np.floor(cy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = cx - x0
    fy = cy - y0
    if src.ndim == 3:
        fx = fx[:, :, None]
        fy = fy[:, :, None]
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    warped = top * (1.0 - fy) + bottom * fy
    return warped.astype(np.float32), valid
