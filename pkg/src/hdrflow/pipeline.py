"""End-to-end HDR pair processing and per-stage entry points.

Stage order: equalize source luminance to the reference, build pyramids,
match coarse-to-fine, weed the finest-level matches, densify the sparse flow
edge-aware, backward-warp the source, score registration quality with SSIM,
and fuse. The CLI exposes each stage against files; the functions here work
on arrays so the staged file path and the in-memory path produce identical
results.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import densify, fileio, fusion, viz
from .geometry import DegenerateFit
from .image import (PYRAMID_MAX_LEVELS, build_pyramid, image_size, luminance,
                    match_histogram)
from .matcher import MatcherParams, MatchResult, pyramidal_match
from .metering import choose_reference
from .weeding import weed_parallel


class RegistrationError(RuntimeError):
    """Too few reliable matches to register the pair."""


class ConfigError(ValueError):
    """Invalid parameter value or malformed configuration."""


@dataclass
class PipelineParams:
    """Algorithm knobs; defaults follow the reference implementation values
    (tile 64, activity threshold 4/255, search radius 10, 21x21 patches,
    up to 5 pyramid levels, sigma_s 400)."""
    tile: int = 64
    threshold: float = 4.0 / 255.0
    quadrant_half: int = 8
    radius: int = 10
    patch: int = 21
    max_levels: int = PYRAMID_MAX_LEVELS
    iterations: int = 256
    coarse_iterations: int = 64
    delta: int | None = None
    eps_px: float = 2.0
    sigma_s: float = 400.0
    sigma_r: float = 0.2
    passes: int = 3
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    normalization_floor: float = 1e-4
    seed: int = 0
    workers: int = 1

    def validate(self):
        checks = [
            (self.tile >= 16, "tile must be >= 16"),
            (self.threshold > 0, "threshold must be positive"),
            (self.quadrant_half >= 2, "quadrant_half must be >= 2"),
            (self.radius >= 1, "radius must be >= 1"),
            (self.patch >= 3 and self.patch % 2 == 1, "patch must be odd and >= 3"),
            (1 <= self.max_levels <= PYRAMID_MAX_LEVELS,
             f"max_levels must be in [1, {PYRAMID_MAX_LEVELS}]"),
            (self.iterations >= 1, "iterations must be >= 1"),
            (self.coarse_iterations >= 1, "coarse_iterations must be >= 1"),
            (self.delta is None or self.delta >= 4, "delta must be >= 4"),
            (self.eps_px > 0, "eps_px must be positive"),
            (self.sigma_s > 0, "sigma_s must be positive"),
            (self.sigma_r > 0, "sigma_r must be positive"),
            (self.passes >= 1, "passes must be >= 1"),
            (self.ssim_window >= 3 and self.ssim_window % 2 == 1,
             "ssim_window must be odd and >= 3"),
            (self.ssim_sigma > 0, "ssim_sigma must be positive"),
            (self.normalization_floor > 0, "normalization_floor must be positive"),
            (self.workers >= 1, "workers must be >= 1"),
            (self.iterations % self.workers == 0,
             "iterations must be divisible by workers"),
            (self.coarse_iterations % self.workers == 0,
             "coarse_iterations must be divisible by workers"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def matcher_params(self) -> MatcherParams:
        return MatcherParams(tile=self.tile, threshold=self.threshold,
                             quadrant_half=self.quadrant_half,
                             radius=self.radius, patch=self.patch,
                             iterations=self.iterations,
                             coarse_iterations=self.coarse_iterations,
                             delta=self.delta, eps_px=self.eps_px,
                             seed=self.seed, workers=self.workers)


@dataclass
class RegistrationOutput:
    composite: np.ndarray
    flow: np.ndarray
    warped: np.ndarray
    valid: np.ndarray
    ssim: np.ndarray
    matches: np.ndarray
    raw_matches: np.ndarray
    homography: np.ndarray | None
    level_counts: list[tuple[int, int]] = field(default_factory=list)


def as_rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return np.repeat(img[:, :, None], 3, axis=2)
    return img


def equalize_source(lum_ref: np.ndarray, lum_src: np.ndarray) -> np.ndarray:
    return match_histogram(lum_src, lum_ref)


def match_stack(ref: np.ndarray, src: np.ndarray,
                params: PipelineParams) -> MatchResult:
    """Equalize, build pyramids, and run the coarse-to-fine matcher."""
    lum_ref = luminance(as_rgb(ref))
    lum_src = luminance(as_rgb(src))
    eq_src = equalize_source(lum_ref, lum_src)
    ref_pyr = build_pyramid(lum_ref, params.max_levels)
    src_pyr = build_pyramid(eq_src, params.max_levels)
    return pyramidal_match(ref_pyr, src_pyr, params.matcher_params())


def weed_finest(raw_matches: np.ndarray, size: tuple[int, int],
                params: PipelineParams) -> np.ndarray:
    """Weed finest-level matches exactly as pyramidal_match does internally."""
    if len(raw_matches) < 4:
        return np.zeros((0, 5), dtype=np.float64)
    wp = params.matcher_params().weed_params(0, size[0])
    result = weed_parallel(raw_matches, size, wp, params.workers)
    return raw_matches[result.kept]


def fit_fallback(matches: np.ndarray, width: int, height: int):
    """Global homography for normalization fallback; None when unfittable."""
    if len(matches) < 4:
        return None
    try:
        return fit_matches_homography(matches, width, height)
    except DegenerateFit:
        return None


def make_flow(matches: np.ndarray, lum_ref: np.ndarray,
              params: PipelineParams) -> np.ndarray:
    """Densify weeded matches against the reference-luminance guide."""
    w, h = image_size(lum_ref)
    maps = densify.build_sparse_maps(matches, w, h)
    fallback = fit_fallback(matches, w, h)
    return densify.densify_flow(lum_ref, maps, fallback,
                                sigma_s=params.sigma_s, sigma_r=params.sigma_r,
                                passes=params.passes,
                                floor=params.normalization_floor)


def make_ssim(lum_ref: np.ndarray, warped: np.ndarray,
              params: PipelineParams) -> np.ndarray:
    """SSIM between reference luminance and exposure-equalized warped luminance."""
    lum_w = luminance(as_rgb(warped))
    eq_w = match_histogram(lum_w, lum_ref)
    return fusion.ssim_map(lum_ref, eq_w, window=params.ssim_window,
                           sigma=params.ssim_sigma)


def register_and_fuse(ref: np.ndarray, src: np.ndarray,
                      params: PipelineParams | None = None) -> RegistrationOutput:
    """Full in-memory pipeline for a (reference, source) pair."""
    params = params or PipelineParams()
    params.validate()
    ref = as_rgb(np.asarray(ref, dtype=np.float32))
    src = as_rgb(np.asarray(src, dtype=np.float32))
    if ref.shape != src.shape:
        raise ConfigError("reference and source dimensions differ")

    result = match_stack(ref, src, params)
    if len(result.matches) < 4:
        raise RegistrationError(
            f"only {len(result.matches)} reliable matches at full resolution")

    lum_ref = luminance(ref)
    flow = make_flow(result.matches, lum_ref, params)
    warped, valid = densify.warp_image(src, flow)
    ssim = make_ssim(lum_ref, warped, params)
    composite = fusion.fuse(ref, warped, ssim, valid.astype(np.float32))
    return RegistrationOutput(composite=composite, flow=flow, warped=warped,
                              valid=valid, ssim=ssim, matches=result.matches,
                              raw_matches=result.raw_matches,
                              homography=result.homography,
                              level_counts=result.level_counts)


@dataclass
class PipelineConfig:
    """File-level run description: inputs, exposures, outputs, dump flags."""
    inputs: list[str] = field(default_factory=list)
    exposures: list[float] | None = None
    exposure_file: str | None = None
    output: str = "composite.png"
    dump_all: bool = False
    out_dir: str | None = None
    params: PipelineParams = field(default_factory=PipelineParams)


def _resolve_exposures(config: PipelineConfig) -> tuple[list[str], list[float]]:
    inputs = list(config.inputs)
    if config.exposure_file:
        entries = fileio.load_exposures(config.exposure_file)
        if inputs:
            table = dict(entries)
            try:
                return inputs, [table[p] for p in inputs]
            except KeyError as exc:
                raise ConfigError(f"no exposure for input {exc}") from exc
        return [p for p, _ in entries], [e for _, e in entries]
    if config.exposures is not None:
        if len(config.exposures) != len(inputs):
            raise ConfigError("need one exposure per input image")
        return inputs, list(config.exposures)
    return inputs, [1.0] * len(inputs)


def dump_intermediates(out: RegistrationOutput, lum_ref: np.ndarray,
                       ref: np.ndarray, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    join = lambda name: os.path.join(directory, name)
    fileio.save_matches_csv(join("matches_raw.csv"), out.raw_matches)
    fileio.save_matches_csv(join("matches.csv"), out.matches)
    fileio.save_png(join("matches.png"), viz.overlay_matches(lum_ref, out.matches))
    fileio.save_pfm(join("flow.pfm"), flow_to_pfm(out.flow))
    fileio.save_png(join("flow.png"), viz.flow_to_color(out.flow))
    fileio.save_pfm(join("warped.pfm"), out.warped)
    fileio.save_png(join("warped.png"), out.warped)
    fileio.save_pfm(join("valid.pfm"), out.valid.astype(np.float32))
    fileio.save_pfm(join("ssim.pfm"), out.ssim.astype(np.float32))
    fileio.save_png(join("ssim.png"), viz.heatmap(out.ssim, -1.0, 1.0))
    w_ref, w_src = fusion.fusion_weights(ref, out.warped, out.ssim,
                                         out.valid.astype(np.float32))
    fileio.save_pfm(join("weight_ref.pfm"), w_ref.astype(np.float32))
    fileio.save_pfm(join("weight_src.pfm"), w_src.astype(np.float32))
    fileio.save_png(join("weight_ref.png"), viz.heatmap(w_ref, 0.0, 1.0))
    fileio.save_png(join("weight_src.png"), viz.heatmap(w_src, 0.0, 1.0))


def flow_to_pfm(flow: np.ndarray) -> np.ndarray:
    """Pack (h, w, 2) flow into 3-channel PFM data with a zero third plane."""
    h, w = flow.shape[:2]
    out = np.zeros((h, w, 3), dtype=np.float32)
    out[:, :, :2] = flow
    return out


def pfm_to_flow(data: np.ndarray) -> np.ndarray:
    if data.ndim != 3 or data.shape[2] != 3:
        raise fileio.FileFormatError("flow PFM must have 3 channels")
    return np.ascontiguousarray(data[:, :, :2])


def run_hdr(config: PipelineConfig) -> RegistrationOutput:
    """Load a pair, register and fuse it, and write the requested outputs."""
    config.params.validate()
    inputs, exposures = _resolve_exposures(config)
    if len(inputs) != 2:
        raise ConfigError("exactly 2 input images are required")
    images = [as_rgb(fileio.load_png(p)) for p in inputs]
    ref_idx = choose_reference(images, exposures)
    ref, src = images[ref_idx], images[1 - ref_idx]

    out = register_and_fuse(ref, src, config.params)
    fileio.save_png(config.output, out.composite)
    if config.dump_all:
        directory = config.out_dir or os.path.dirname(os.path.abspath(config.output))
        dump_intermediates(out, luminance(ref), ref, directory)
    return out
