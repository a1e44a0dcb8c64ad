"""Spurious-match removal by an iterative union-of-inliers filter.

Each iteration samples 4 matches, fits a homography, and collects its
inliers over the full original set; inlier sets larger than the threshold
delta are unioned into the reliable set. Iterations never remove matches,
so the reliable set only grows.

Every iteration draws from its own counter-based RNG keyed by
(seed, iteration index). Iterations are therefore independent of execution
order, and splitting the budget across n workers yields exactly the same
set as one serial run.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import DegenerateFit, fit_homography, inlier_mask
from .image import to_normalized

DEFAULT_ITERATIONS = 256
DEFAULT_COARSE_ITERATIONS = 64
MAX_RESAMPLE = 10


def default_delta(n_matches: int) -> int:
    """Minimum inlier count for a homography to contribute its inliers."""
    return max(12, math.ceil(0.15 * n_matches))


@dataclass
class WeedParams:
    """Knobs for one weeding run.

    eps is the inlier distance in normalized units (pixels scale by 2/width);
    delta=None selects default_delta at run time.
    """
    iterations: int = DEFAULT_ITERATIONS
    delta: int | None = None
    eps: float = 2.0 * 2.0 / 640.0
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.delta is not None and self.delta < 4:
            raise ValueError("delta must be >= 4")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass
class WeedResult:
    kept: np.ndarray      # sorted indices into the input match array
    witness: np.ndarray   # per match, largest accepted inlier set containing it


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    # Philox keyed per iteration: draw order inside one iteration is fixed,
    # and iterations can run in any order or thread without changing results.
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(iteration,))
    return np.random.Generator(np.random.Philox(seq))


def _run_iterations(ref_n, src_n, eps, delta, seed, start, stop):
    n = len(ref_n)
    reliable = np.zeros(n, dtype=bool)
    witness = np.zeros(n, dtype=np.int64)
    for it in range(start, stop):
        rng = _iteration_rng(seed, it)
        h = None
        for _ in range(MAX_RESAMPLE):
            pick = rng.choice(n, size=4, replace=False)
            try:
                h = fit_homography(ref_n[pick], src_n[pick])
                break
            except DegenerateFit:
                continue
        if h is None:
            continue
        inl = inlier_mask(h, ref_n, src_n, eps)
        count = int(inl.sum())
        if count > delta:
            reliable |= inl
            np.maximum(witness, np.where(inl, count, 0), out=witness)
    return reliable, witness


def _normalized_pairs(matches: np.ndarray, width: int, height: int):
    m = np.asarray(matches, dtype=np.float64)
    rx, ry = to_normalized(m[:, 0], m[:, 1], width, height)
    sx, sy = to_normalized(m[:, 2], m[:, 3], width, height)
    return np.column_stack([rx, ry]), np.column_stack([sx, sy])


def weed(matches: np.ndarray, image_size: tuple[int, int],
         params: WeedParams) -> WeedResult:
    """Run the union-of-inliers filter serially over the full budget."""
    n = len(matches)
    if n < 4:
        raise ValueError("need at least 4 matches to weed")
    width, height = image_size
    ref_n, src_n = _normalized_pairs(matches, width, height)
    delta = default_delta(n) if params.delta is None else params.delta
    reliable, witness = _run_iterations(ref_n, src_n, params.eps, delta,
                                        params.seed, 0, params.iterations)
    return WeedResult(np.flatnonzero(reliable), witness)


def weed_parallel(matches: np.ndarray, image_size: tuple[int, int],
                  params: WeedParams, workers: int) -> WeedResult:
    """Split the iteration budget over `workers` threads and merge the sets.

    Exactly equivalent to `weed` because iterations are independent and the
    update rule is a union.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if params.iterations % workers != 0:
        raise ValueError("iterations must be divisible by the worker count")
    n = len(matches)
    if n < 4:
        raise ValueError("need at least 4 matches to weed")
    if workers == 1:
        return weed(matches, image_size, params)

    width, height = image_size
    ref_n, src_n = _normalized_pairs(matches, width, height)
    delta = default_delta(n) if params.delta is None else params.delta
    step = params.iterations // workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_iterations, ref_n, src_n, params.eps,
                               delta, params.seed, k * step, (k + 1) * step)
                   for k in range(workers)]
        parts = [f.result() for f in futures]
    reliable = np.zeros(n, dtype=bool)
    witness = np.zeros(n, dtype=np.int64)
    for mask, wit in parts:
        reliable |= mask
        np.maximum(witness, wit, out=witness)
    return WeedResult(np.flatnonzero(reliable), witness)
