"""Homography estimation and application in normalized image coordinates.

All point sets are (n, 2) arrays in the centered frame produced by
image.to_normalized. Homographies are 3x3 float64 matrices scaled so the
bottom-right entry is 1.
"""

from __future__ import annotations

import numpy as np

from .image import from_normalized, to_normalized

MIN_DET = 1e-12
_RANK_RTOL = 1e-9


class DegenerateFit(ValueError):
    """Raised when a point configuration cannot support a homography fit."""


def _hartley_transform(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centroid = pts.mean(axis=0)
    shifted = pts - centroid
    mean_dist = np.mean(np.hypot(shifted[:, 0], shifted[:, 1]))
    if mean_dist < 1e-12:
        raise DegenerateFit("coincident points")
    s = np.sqrt(2.0) / mean_dist
    t = np.array([[s, 0.0, -s * centroid[0]],
                  [0.0, s, -s * centroid[1]],
                  [0.0, 0.0, 1.0]])
    return t, shifted * s


def fit_homography(ref_pts: np.ndarray, src_pts: np.ndarray) -> np.ndarray:
    """Direct linear transform with Hartley conditioning, least squares when
    more than 4 correspondences are given.

    Raises DegenerateFit for rank-deficient configurations (e.g. three of
    four points collinear) so callers can resample.
    """
    ref_pts = np.asarray(ref_pts, dtype=np.float64).reshape(-1, 2)
    src_pts = np.asarray(src_pts, dtype=np.float64).reshape(-1, 2)
    n = len(ref_pts)
    if n < 4 or len(src_pts) != n:
        raise ValueError("need at least 4 point pairs")

    t_ref, p = _hartley_transform(ref_pts)
    t_src, q = _hartley_transform(src_pts)

    a = np.zeros((2 * n, 9), dtype=np.float64)
    a[0::2, 0] = -p[:, 0]
    a[0::2, 1] = -p[:, 1]
    a[0::2, 2] = -1.0
    a[0::2, 6] = p[:, 0] * q[:, 0]
    a[0::2, 7] = p[:, 1] * q[:, 0]
    a[0::2, 8] = q[:, 0]
    a[1::2, 3] = -p[:, 0]
    a[1::2, 4] = -p[:, 1]
    a[1::2, 5] = -1.0
    a[1::2, 6] = p[:, 0] * q[:, 1]
    a[1::2, 7] = p[:, 1] * q[:, 1]
    a[1::2, 8] = q[:, 1]

    _, sing, vt = np.linalg.svd(a)
    # a second vanishing singular value means the null space is not unique
    if sing[-2] <= _RANK_RTOL * sing[0]:
        raise DegenerateFit("rank-deficient correspondence set")
    h_cond = vt[-1].reshape(3, 3)

    h = np.linalg.inv(t_src) @ h_cond @ t_ref
    if abs(h[2, 2]) < 1e-12:
        raise DegenerateFit("homography maps the origin to infinity")
    h = h / h[2, 2]
    if abs(np.linalg.det(h)) <= MIN_DET:
        raise DegenerateFit("singular homography")
    return h


def apply_homography(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Projective map of (..., 2) points, with dehomogenization.

    Raises ValueError if any point lands at infinity.
    """
    pts = np.asarray(pts, dtype=np.float64)
    x, y = pts[..., 0], pts[..., 1]
    denom = h[2, 0] * x + h[2, 1] * y + h[2, 2]
    if np.any(np.abs(denom) < 1e-12):
        raise ValueError("point maps to infinity")
    out = np.empty_like(pts)
    out[..., 0] = (h[0, 0] * x + h[0, 1] * y + h[0, 2]) / denom
    out[..., 1] = (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / denom
    return out


def _transfer_distance(h: np.ndarray, pts: np.ndarray, targets: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    denom = h[2, 0] * x + h[2, 1] * y + h[2, 2]
    dist = np.full(len(pts), np.inf)
    ok = np.abs(denom) >= 1e-12
    mx = (h[0, 0] * x + h[0, 1] * y + h[0, 2])[ok] / denom[ok]
    my = (h[1, 0] * x + h[1, 1] * y + h[1, 2])[ok] / denom[ok]
    dist[ok] = np.hypot(mx - targets[ok, 0], my - targets[ok, 1])
    return dist


def symmetric_transfer_error(h: np.ndarray, ref_pts: np.ndarray,
                             src_pts: np.ndarray) -> np.ndarray:
    """Per-pair sqrt(d_fwd^2 + d_bwd^2) transfer distance under h."""
    ref_pts = np.asarray(ref_pts, dtype=np.float64).reshape(-1, 2)
    src_pts = np.asarray(src_pts, dtype=np.float64).reshape(-1, 2)
    h_inv = np.linalg.inv(h)
    fwd = _transfer_distance(h, ref_pts, src_pts)
    bwd = _transfer_distance(h_inv, src_pts, ref_pts)
    return np.hypot(fwd, bwd)


def inlier_mask(h: np.ndarray, ref_pts: np.ndarray, src_pts: np.ndarray,
                eps: float) -> np.ndarray:
    """Boolean mask of pairs whose symmetric transfer error is below eps."""
    return symmetric_transfer_error(h, ref_pts, src_pts) < eps


def homography_pixel_flow(h: np.ndarray, width: int, height: int) -> np.ndarray:
    """Dense (h, w, 2) pixel flow induced by a normalized-coordinate homography."""
    ys, xs = np.mgrid[0:height, 0:width]
    xn, yn = to_normalized(xs, ys, width, height)
    denom = h[2, 0] * xn + h[2, 1] * yn + h[2, 2]
    safe = np.where(np.abs(denom) < 1e-12, 1.0, denom)
    mx = (h[0, 0] * xn + h[0, 1] * yn + h[0, 2]) / safe
    my = (h[1, 0] * xn + h[1, 1] * yn + h[1, 2]) / safe
    px, py = from_normalized(mx, my, width, height)
    flow = np.stack([px - xs, py - ys], axis=-1)
    flow[np.abs(denom) < 1e-12] = 0.0
    return flow.astype(np.float32)
