"""Error-tolerant exposure fusion.

Per-image weights follow the exposure-fusion recipe (contrast, saturation,
well-exposedness); the warped source additionally carries a registration
trust weight from its structural similarity to the reference, so regions
where the warp went wrong fall back to the reference content. Blending runs
through Laplacian pyramids of the images against Gaussian pyramids of the
normalized weights.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .image import luminance

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
WELL_EXPOSED_SIGMA = 0.2
WEIGHT_FLOOR = 1e-12

_PYR_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def ssim_map(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW,
             sigma: float = SSIM_SIGMA, c1: float = SSIM_C1,
             c2: float = SSIM_C2) -> np.ndarray:
    """Pointwise structural similarity of two single-channel images.

    Local statistics come from five convolutions with one truncated Gaussian
    window (means of a, b, a^2, b^2, ab); the result is clamped to [-1, 1].
    """
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("ssim_map expects two single-channel images of equal size")
    if window % 2 != 1:
        raise ValueError("window must be odd")
    kernel = _gaussian_kernel(sigma, window // 2)

    def blur(img):
        out = ndimage.convolve1d(img, kernel, axis=0, mode="reflect")
        return ndimage.convolve1d(out, kernel, axis=1, mode="reflect")

    af = a.astype(np.float64)
    bf = b.astype(np.float64)
    mu_a = blur(af)
    mu_b = blur(bf)
    e_aa = blur(af * af)
    e_bb = blur(bf * bf)
    e_ab = blur(af * bf)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    score = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / \
            ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
    return np.clip(score, -1.0, 1.0)


def quality_weights(img: np.ndarray) -> np.ndarray:
    """Contrast x saturation x well-exposedness weight map, floored at 1e-12."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("quality_weights expects an (h, w, 3) image")
    imgf = img.astype(np.float64)
    contrast = np.abs(ndimage.laplace(luminance(img).astype(np.float64),
                                      mode="reflect"))
    saturation = imgf.std(axis=2)
    exposed = np.exp(-((imgf - 0.5) ** 2).sum(axis=2)
                     / (2.0 * WELL_EXPOSED_SIGMA ** 2))
    return contrast * saturation * exposed + WEIGHT_FLOOR


def _blur5(img: np.ndarray) -> np.ndarray:
    out = ndimage.convolve1d(img, _PYR_KERNEL, axis=0, mode="reflect")
    return ndimage.convolve1d(out, _PYR_KERNEL, axis=1, mode="reflect")


def _pyr_down(img: np.ndarray) -> np.ndarray:
    return _blur5(img)[::2, ::2]


def _pyr_up(img: np.ndarray, shape) -> np.ndarray:
    up = np.zeros(shape[:2] + img.shape[2:], dtype=img.dtype)
    up[::2, ::2] = img
    out = ndimage.convolve1d(up, 2.0 * _PYR_KERNEL, axis=0, mode="reflect")
    return ndimage.convolve1d(out, 2.0 * _PYR_KERNEL, axis=1, mode="reflect")


def gaussian_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [np.asarray(img, dtype=np.float64)]
    while len(pyr) < levels and min(pyr[-1].shape[:2]) >= 2:
        pyr.append(_pyr_down(pyr[-1]))
    return pyr


def laplacian_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    gp = gaussian_pyramid(img, levels)
    laps = [gp[i] - _pyr_up(gp[i + 1], gp[i].shape) for i in range(len(gp) - 1)]
    laps.append(gp[-1])
    return laps


def collapse_pyramid(laps: list[np.ndarray]) -> np.ndarray:
    out = laps[-1]
    for lap in laps[-2::-1]:
        out = lap + _pyr_up(out, lap.shape)
    return out


def fusion_weights(ref: np.ndarray, warped: np.ndarray, ssim: np.ndarray,
                   valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel normalized blending weights (reference, warped source).

    The source weight is scaled by clamped SSIM and the warp validity mask;
    the reference is trusted as-is.
    """
    w_ref = quality_weights(ref)
    w_src = quality_weights(warped) * np.clip(ssim, 0.0, 1.0) \
        * np.asarray(valid, dtype=np.float64)
    total = w_ref + w_src
    return w_ref / total, w_src / total


def default_fusion_levels(height: int, width: int) -> int:
    return max(1, int(np.floor(np.log2(min(height, width)))) - 1)


def fuse(ref: np.ndarray, warped: np.ndarray, ssim: np.ndarray,
         valid: np.ndarray, levels: int | None = None) -> np.ndarray:
    """Blend reference and warped source through Laplacian pyramids.

    Returns a float32 composite clamped to [0, 1].
    """
    if ref.shape != warped.shape:
        raise ValueError("reference and warped source dimensions differ")
    if ssim.shape != ref.shape[:2] or valid.shape != ref.shape[:2]:
        raise ValueError("ssim/valid dimensions differ from the images")
    h, w = ref.shape[:2]
    if levels is None:
        levels = default_fusion_levels(h, w)

    w_ref, w_src = fusion_weights(ref, warped, ssim, valid)
    lap_ref = laplacian_pyramid(ref, levels)
    lap_src = laplacian_pyramid(warped, levels)
    g_ref = gaussian_pyramid(w_ref, levels)
    g_src = gaussian_pyramid(w_src, levels)
    blended = [gr[:, :, None] * lr + gs[:, :, None] * ls
               for gr, gs, lr, ls in zip(g_ref, g_src, lap_ref, lap_src)]
    out = collapse_pyramid(blended)
    return np.clip(out, 0.0, 1.0).astype(np.float32)
