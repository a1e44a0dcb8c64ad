"""Exposure-offset selection and reference picking for a two-image stack."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import luminance

DARK_LEVEL = 0.05
OFFSET_CUTOFFS = (0.02, 0.10)


@dataclass
class ExposurePlan:
    offset_stops: int
    reference_index: int


def select_offset(img: np.ndarray, dark_level: float = DARK_LEVEL,
                  cutoffs: tuple[float, float] = OFFSET_CUTOFFS) -> int:
    """Second-exposure offset (2, 3, or 4 stops) from the underexposed fraction.

    More underexposed pixels ask for a brighter second shot; the mapping is
    monotone in the dark-pixel fraction.
    """
    lum = luminance(img) if img.ndim == 3 else img
    q = float(np.mean(lum < dark_level))
    if q < cutoffs[0]:
        return 2
    if q < cutoffs[1]:
        return 3
    return 4


def choose_reference(images: list[np.ndarray], exposures: list[float]) -> int:
    """Index of the darkest exposure; ties resolve to the lowest mean luminance."""
    if not images or len(images) != len(exposures):
        raise ValueError("need one exposure per image")
    exposures = [float(e) for e in exposures]
    shortest = min(exposures)
    candidates = [i for i, e in enumerate(exposures) if e == shortest]
    if len(candidates) == 1:
        return candidates[0]

    def mean_lum(i):
        img = images[i]
        return float(np.mean(luminance(img) if img.ndim == 3 else img))

    return min(candidates, key=lambda i: (mean_lum(i), i))


def plan_stack(images: list[np.ndarray], exposures: list[float]) -> ExposurePlan:
    ref = choose_reference(images, exposures)
    return ExposurePlan(offset_stops=select_offset(images[ref]),
                        reference_index=ref)
