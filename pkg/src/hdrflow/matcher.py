"""Corner detection and coarse-to-fine SSD patch matching.

Corners score by the cyclic sum of absolute differences between the mean
luminances of the four quadrants around a point (top-left, top-right,
bottom-right, bottom-left); a candidate is admitted only when the minimum
difference between contiguous quadrants clears an activity threshold, which
rejects plain edges and flat regions. One corner is kept per image tile,
evaluated on a sparse candidate grid rather than at every pixel.

Matching runs coarse-to-fine over an image pyramid. Corners are detected
fresh on every level of the reference; the search window in the source is
centered on the prediction of a single homography fitted to the previous
(coarser) level's weeded matches, expressed in normalized coordinates so
the same matrix is valid across levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .geometry import DegenerateFit, fit_homography
from .image import from_normalized, integral, rect_sum, to_normalized
from .weeding import (DEFAULT_COARSE_ITERATIONS, DEFAULT_ITERATIONS,
                      WeedParams, weed_parallel)

DEFAULT_TILE = 64
DEFAULT_THRESHOLD = 4.0 / 255.0
DEFAULT_QUADRANT_HALF = 8
DEFAULT_RADIUS = 10
DEFAULT_PATCH = 21
DEFAULT_EPS_PX = 2.0


def _quadrant_diffs(table, xs, ys, half):
    x0, x1 = xs - half, xs + half
    y0, y1 = ys - half, ys + half
    area = float(half * half)
    tl = rect_sum(table, x0, y0, xs, ys) / area
    tr = rect_sum(table, xs, y0, x1, ys) / area
    br = rect_sum(table, xs, ys, x1, y1) / area
    bl = rect_sum(table, x0, ys, xs, y1) / area
    diffs = np.stack([np.abs(tr - tl), np.abs(br - tr),
                      np.abs(bl - br), np.abs(tl - bl)])
    return diffs.sum(axis=0), diffs.min(axis=0)


def cornerness(table: np.ndarray, x: int, y: int,
               half: int = DEFAULT_QUADRANT_HALF) -> tuple[float, float]:
    """Cornerness and minimum contiguous-quadrant contrast at (x, y).

    `table` is an integral image; the 2*half x 2*half neighborhood of the
    point must fit inside the underlying image.
    """
    h1, w1 = table.shape
    if not (half <= x <= w1 - 1 - half and half <= y <= h1 - 1 - half):
        raise ValueError("quadrant neighborhood out of bounds")
    c, min_diff = _quadrant_diffs(table, np.asarray(x), np.asarray(y), half)
    return float(c), float(min_diff)


def detect_corners(lum: np.ndarray, tile: int = DEFAULT_TILE,
                   threshold: float = DEFAULT_THRESHOLD,
                   half: int = DEFAULT_QUADRANT_HALF) -> np.ndarray:
    """Best admissible corner per tile, as an (n, 3) array of (x, y, score).

    Candidates sit on a grid spaced tile/16 inside each tile; tiles whose
    candidates all fail the activity threshold yield no corner.
    """
    if tile < 16:
        raise ValueError("tile must be >= 16")
    h, w = lum.shape
    spacing = max(1, tile // 16)
    offs = np.arange(spacing // 2, tile, spacing)

    xs = np.concatenate([t0 + offs[offs < min(tile, w - t0)]
                         for t0 in range(0, w, tile)])
    ys = np.concatenate([t0 + offs[offs < min(tile, h - t0)]
                         for t0 in range(0, h, tile)])
    gx, gy = np.meshgrid(xs, ys)
    gx, gy = gx.ravel(), gy.ravel()

    fits = (gx >= half) & (gx <= w - half) & (gy >= half) & (gy <= h - half)
    gx, gy = gx[fits], gy[fits]
    if gx.size == 0:
        return np.zeros((0, 3), dtype=np.float64)

    table = integral(lum)
    score, min_diff = _quadrant_diffs(table, gx, gy, half)
    admissible = min_diff > threshold
    gx, gy, score = gx[admissible], gy[admissible], score[admissible]
    if gx.size == 0:
        return np.zeros((0, 3), dtype=np.float64)

    tiles_x = -(-w // tile)
    tile_id = (gy // tile) * tiles_x + (gx // tile)
    # per tile, keep the highest score; ties go to the first candidate in
    # row-major order
    order = np.lexsort((np.arange(gx.size), -score, tile_id))
    tid_sorted = tile_id[order]
    first = np.flatnonzero(np.r_[True, tid_sorted[1:] != tid_sorted[:-1]])
    best = order[first]
    return np.column_stack([gx[best], gy[best], score[best]]).astype(np.float64)


def ssd_match(ref: np.ndarray, src: np.ndarray, p_ref, p_init,
              radius: int = DEFAULT_RADIUS, patch: int = DEFAULT_PATCH):
    """Exhaustive integer-offset SSD search around p_init.

    Returns (x_src, y_src, score) for the window minimizing the sum of
    squared differences against the reference patch, or None when every
    candidate window falls outside the source. Ties resolve to the smallest
    displacement from p_init, then to row-major window order.
    """
    hp = patch // 2
    xr, yr = int(p_ref[0]), int(p_ref[1])
    xi, yi = int(p_init[0]), int(p_init[1])
    hr, wr = ref.shape
    hs, ws = src.shape
    if not (hp <= xr <= wr - 1 - hp and hp <= yr <= hr - 1 - hp):
        raise ValueError("reference patch out of bounds")

    cx0, cx1 = max(xi - radius, hp), min(xi + radius, ws - 1 - hp)
    cy0, cy1 = max(yi - radius, hp), min(yi + radius, hs - 1 - hp)
    if cx0 > cx1 or cy0 > cy1:
        return None

    ref_patch = ref[yr - hp:yr + hp + 1, xr - hp:xr + hp + 1].astype(np.float64)
    region = src[cy0 - hp:cy1 + hp + 1, cx0 - hp:cx1 + hp + 1].astype(np.float64)
    windows = sliding_window_view(region, (patch, patch))
    diff = windows - ref_patch
    scores = np.einsum("ijkl,ijkl->ij", diff, diff)

    best = scores.min()
    ties = np.flatnonzero(scores.ravel() == best)
    ty, tx = np.unravel_index(ties, scores.shape)
    cx, cy = tx + cx0, ty + cy0
    d2 = (cx - xi) ** 2 + (cy - yi) ** 2
    pick = ties[np.lexsort((cx, cy, d2))[0]]
    py, px = np.unravel_index(pick, scores.shape)
    return px + cx0, py + cy0, float(scores[py, px])


def level_seed(seed: int, level: int) -> int:
    """Deterministic weeding seed for one pyramid level."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(level,))
    return int(seq.generate_state(1)[0])


@dataclass
class MatcherParams:
    tile: int = DEFAULT_TILE
    threshold: float = DEFAULT_THRESHOLD
    quadrant_half: int = DEFAULT_QUADRANT_HALF
    radius: int = DEFAULT_RADIUS
    patch: int = DEFAULT_PATCH
    iterations: int = DEFAULT_ITERATIONS
    coarse_iterations: int = DEFAULT_COARSE_ITERATIONS
    delta: int | None = None
    eps_px: float = DEFAULT_EPS_PX
    seed: int = 0
    workers: int = 1

    def weed_params(self, level: int, width: int) -> WeedParams:
        iterations = self.iterations if level == 0 else self.coarse_iterations
        return WeedParams(iterations=iterations, delta=self.delta,
                          eps=2.0 * self.eps_px / width,
                          seed=level_seed(self.seed, level))


@dataclass
class MatchResult:
    matches: np.ndarray                 # weeded finest-level matches, (m, 5)
    raw_matches: np.ndarray             # finest-level matches before weeding
    homography: np.ndarray | None       # fit to the weeded set, normalized coords
    level_counts: list[tuple[int, int]] = field(default_factory=list)


def _match_level(lum_ref, lum_src, h_pred, params):
    h, w = lum_ref.shape
    hp = params.patch // 2
    corners = detect_corners(lum_ref, params.tile, params.threshold,
                             params.quadrant_half)
    rows = []
    for x, y, _ in corners:
        x, y = int(x), int(y)
        if not (hp <= x <= w - 1 - hp and hp <= y <= h - 1 - hp):
            continue
        xn, yn = to_normalized(x, y, w, h)
        denom = h_pred[2, 0] * xn + h_pred[2, 1] * yn + h_pred[2, 2]
        if abs(denom) < 1e-12:
            continue
        mx = (h_pred[0, 0] * xn + h_pred[0, 1] * yn + h_pred[0, 2]) / denom
        my = (h_pred[1, 0] * xn + h_pred[1, 1] * yn + h_pred[1, 2]) / denom
        px, py = from_normalized(mx, my, w, h)
        if not (np.isfinite(px) and np.isfinite(py)):
            continue
        if abs(px) > 8 * w or abs(py) > 8 * h:
            continue
        found = ssd_match(lum_ref, lum_src, (x, y),
                          (int(round(px)), int(round(py))),
                          params.radius, params.patch)
        if found is not None:
            rows.append((float(x), float(y), float(found[0]), float(found[1]),
                         found[2]))
    if not rows:
        return np.zeros((0, 5), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def fit_matches_homography(matches: np.ndarray, width: int, height: int) -> np.ndarray:
    """Fit one homography to an (n, 5) match array, in normalized coordinates."""
    matches = np.asarray(matches, dtype=np.float64)
    rx, ry = to_normalized(matches[:, 0], matches[:, 1], width, height)
    sx, sy = to_normalized(matches[:, 2], matches[:, 3], width, height)
    return fit_homography(np.column_stack([rx, ry]), np.column_stack([sx, sy]))


def pyramidal_match(ref_pyr: list[np.ndarray], src_pyr: list[np.ndarray],
                    params: MatcherParams | None = None) -> MatchResult:
    """Coarse-to-fine matching over aligned luminance pyramids.

    Corners are re-detected on each level (never upsampled); search starts
    from the previous level's homography prediction, identity at the
    coarsest level. Each level's matches are weeded before fitting the
    homography handed to the next finer level. When a level produces too few
    matches to weed or fit, the previous homography is carried along.
    """
    params = params or MatcherParams()
    if len(ref_pyr) != len(src_pyr):
        raise ValueError("pyramids must have equal level counts")
    for a, b in zip(ref_pyr, src_pyr):
        if a.shape != b.shape:
            raise ValueError("pyramid levels must have matching dimensions")

    h_pred = np.eye(3)
    homography = None
    counts: list[tuple[int, int]] = [(0, 0)] * len(ref_pyr)
    raw = weeded = np.zeros((0, 5), dtype=np.float64)

    for level in range(len(ref_pyr) - 1, -1, -1):
        lum_ref, lum_src = ref_pyr[level], src_pyr[level]
        h, w = lum_ref.shape
        raw = _match_level(lum_ref, lum_src, h_pred, params)
        if len(raw) >= 4:
            result = weed_parallel(raw, (w, h), params.weed_params(level, w),
                                   params.workers)
            weeded = raw[result.kept]
        else:
            weeded = np.zeros((0, 5), dtype=np.float64)
        counts[level] = (len(raw), len(weeded))
        if len(weeded) >= 4:
            try:
                h_pred = fit_matches_homography(weeded, w, h)
                if level == 0:
                    homography = h_pred
            except DegenerateFit:
                pass

    return MatchResult(matches=weeded, raw_matches=raw, homography=homography,
                       level_counts=counts)
