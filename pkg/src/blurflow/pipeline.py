"""Coarse-to-fine blur-robust flow: the motion-guided and automatic variants.

Per pyramid level each frame goes through blind kernel pre-estimation,
optional directional kernel enhancement, and non-blind deconvolution; the
frames are then mutually re-blurred and the flow is refined on the result.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .automotion import NoConsensusError, RansacParams, affine_to_motion_angle, estimate_affine_ransac
from .deconv import KernelEstimationParams, blind_deconvolve, center_kernel, non_blind_deconvolve, rescale_kernel
from .dirfilter import FRAME1_WEIGHTS, FRAME2_WEIGHTS, DirectionalFilterParams, enhance_kernel
from .flowsolver import EnergyParams, mutual_blur, solve_level
from .imgcore import as_image, pyramid_shapes, resample, resize_flow, suppress_impulses, to_luminance
from .motion import fold_angle

log = logging.getLogger(__name__)

MODES = ("moblur", "auto", "nonGC", "nonDF", "nonGCDF")


class PipelineError(RuntimeError):
    """A stage failed; the message names the level, frame and stage."""


@dataclass
class PipelineConfig:
    mode: str = "moblur"
    pyramid_factor: float = 0.75
    min_side: int = 8
    # switching-median threshold for impulse noise; 0 disables
    impulse_threshold: float = 0.2
    kernel: KernelEstimationParams = field(default_factory=KernelEstimationParams)
    filter: DirectionalFilterParams = field(default_factory=DirectionalFilterParams)
    solver: EnergyParams = field(default_factory=EnergyParams)
    ransac: RansacParams = field(default_factory=RansacParams)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if not 0.0 < self.pyramid_factor < 1.0:
            raise ValueError("pyramid_factor must lie in (0, 1)")
        if self.min_side < 8:
            raise ValueError("min_side must be at least 8")
        if self.impulse_threshold < 0:
            raise ValueError("impulse_threshold must be non-negative")

    @property
    def gradient_constancy(self) -> bool:
        return self.mode in ("moblur", "auto", "nonDF")

    @property
    def directional_filter(self) -> bool:
        return self.mode in ("moblur", "auto", "nonGC")


@dataclass
class LevelRecord:
    index: int
    shape: tuple
    kernel_size: int
    kernel_residuals: tuple
    cg_residual: float
    energy_before: float
    energy_after: float
    theta: Optional[float] = None


@dataclass
class PipelineResult:
    flow: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    latent1: np.ndarray
    latent2: np.ndarray
    levels: List[LevelRecord]

    @property
    def level_thetas(self) -> List[Optional[float]]:
        return [rec.theta for rec in self.levels]


def level_kernel_size(finest: int, factor: float, depth: int, shape) -> int:
    """Odd kernel side for a level ``depth`` steps above the finest one.

    The finest size is scaled by ``factor**depth``, rounded to the nearest odd
    integer >= 3 and capped so the kernel fits within half the level.
    """
    s = finest * factor**depth
    size = max(3, 2 * int(math.floor(s / 2.0)) + 1)
    cap = min(shape) // 2
    cap = cap if cap % 2 == 1 else cap - 1
    return max(3, min(size, cap))


def _frame_thetas(thetas: Sequence[float]):
    if len(thetas) != 3:
        raise ValueError("expected three motion directions (theta1, theta2, theta12)")
    return [fold_angle(t) for t in thetas]


def _run(I1, I2, cfg: PipelineConfig, thetas: Optional[Sequence[float]]) -> PipelineResult:
    g1 = to_luminance(as_image(I1))
    g2 = to_luminance(as_image(I2))
    if g1.shape != g2.shape:
        raise ValueError(f"frame shapes differ: {g1.shape} vs {g2.shape}")
    if cfg.impulse_threshold > 0:
        g1 = suppress_impulses(g1, cfg.impulse_threshold)
        g2 = suppress_impulses(g2, cfg.impulse_threshold)
    auto = thetas is None
    theta_auto = 0.0
    if not auto:
        thetas = _frame_thetas(thetas)

    shapes = pyramid_shapes(g1.shape[0], g1.shape[1], cfg.pyramid_factor, cfg.min_side)
    n = len(shapes)
    solver = cfg.solver if cfg.gradient_constancy else replace(cfg.solver, alpha=0.0)

    latents = [None, None]
    kernels = [None, None]
    w = None
    prev_shape = None
    records = []
    for i, (h, wd) in enumerate(shapes):
        frames = [resample(g1, wd, h), resample(g2, wd, h)]
        ksize = level_kernel_size(cfg.kernel.kernel_size, cfg.pyramid_factor, n - 1 - i, (h, wd))
        if w is None:
            w = np.zeros((h, wd, 2))
            latents = [frames[0].copy(), frames[1].copy()]
        else:
            w = resize_flow(w, wd, h)
            latents = [resample(lat, wd, h) for lat in latents]
            scale = wd / prev_shape[1]
            kernels = [rescale_kernel(k, scale, ksize) for k in kernels]

        residuals = []
        for f in range(2):
            stage = "blind deconvolution"
            try:
                k, _, info = blind_deconvolve(latents[f], frames[f], cfg.kernel, ksize, k_init=kernels[f])
                residuals.append(info.get("data_residual", float("nan")))
                if cfg.directional_filter:
                    stage = "kernel enhancement"
                    if auto:
                        k = enhance_kernel(k, [theta_auto], [1.0], cfg.filter.sigma)
                    else:
                        weights = FRAME1_WEIGHTS if f == 0 else FRAME2_WEIGHTS
                        k = enhance_kernel(k, thetas, weights, cfg.filter.sigma)
                    if cfg.kernel.recenter:
                        k = center_kernel(k)
                stage = "non-blind deconvolution"
                latents[f] = non_blind_deconvolve(frames[f], k, cfg.kernel.lambda_reg)
                kernels[f] = k
            except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
                raise PipelineError(f"level {i}, frame {f + 1}, {stage}: {exc}") from exc

        try:
            b1, b2 = mutual_blur(frames[0], frames[1], kernels[0], kernels[1])
            history: List[float] = []
            cg_info: dict = {}
            w = solve_level(b1, b2, w, solver, history=history, info=cg_info)
        except (ValueError, FloatingPointError) as exc:
            raise PipelineError(f"level {i}, flow solve: {exc}") from exc

        theta_level = None
        if auto:
            try:
                theta_auto = affine_to_motion_angle(estimate_affine_ransac(w, cfg.ransac))
            except NoConsensusError:
                log.warning("level %d: no consensus affine, keeping theta=%.4f", i, theta_auto)
            theta_level = theta_auto

        rec = LevelRecord(
            index=i, shape=(h, wd), kernel_size=ksize, kernel_residuals=tuple(residuals),
            cg_residual=float(cg_info.get("residual", 0.0)),
            energy_before=history[0], energy_after=history[-1], theta=theta_level,
        )
        records.append(rec)
        prev_shape = (h, wd)
        log.info(
            "level %d %dx%d ksize %d kernel_residual %s cg_residual %.3g energy %.6g -> %.6g%s",
            i, wd, h, ksize, "/".join(f"{r:.4g}" for r in residuals), rec.cg_residual,
            rec.energy_before, rec.energy_after,
            "" if theta_level is None else f" theta {theta_level:.4f}",
        )

    return PipelineResult(flow=w, k1=kernels[0], k2=kernels[1], latent1=latents[0], latent2=latents[1],
                          levels=records)


def run_algorithm1(I1, I2, thetas: Sequence[float], cfg: PipelineConfig = None) -> PipelineResult:
    """Motion-guided flow between ``I1`` and ``I2``.

    ``thetas`` holds the blur directions ``(theta1, theta2, theta12)`` in
    radians. The mode in ``cfg`` selects which features are active; mode
    ``auto`` is rejected here, use :func:`run_algorithm2`.
    """
    cfg = cfg or PipelineConfig()
    if cfg.mode == "auto":
        raise ValueError("mode 'auto' takes no motion directions; use run_algorithm2")
    return _run(I1, I2, cfg, thetas)


def run_algorithm2(I1, I2, cfg: PipelineConfig = None) -> PipelineResult:
    """Flow with the blur direction re-estimated from the flow at every level.

    The first level filters along ``theta = 0``.
    """
    cfg = cfg or PipelineConfig(mode="auto")
    if cfg.mode != "auto":
        cfg = replace(cfg, mode="auto")
    return _run(I1, I2, cfg, None)


def run(I1, I2, cfg: PipelineConfig, thetas: Optional[Sequence[float]] = None) -> PipelineResult:
    """Dispatch on ``cfg.mode``."""
    if cfg.mode == "auto":
        return run_algorithm2(I1, I2, cfg)
    if thetas is None:
        raise ValueError(f"mode {cfg.mode!r} needs motion directions")
    return run_algorithm1(I1, I2, thetas, cfg)


def coarse_to_fine_flow(I1, I2, params: EnergyParams = None, factor: float = 0.75, min_side: int = 8) -> np.ndarray:
    """Plain warping flow on the raw frames, without any deblurring."""
    params = params or EnergyParams()
    g1 = to_luminance(as_image(I1))
    g2 = to_luminance(as_image(I2))
    w = None
    for h, wd in pyramid_shapes(g1.shape[0], g1.shape[1], factor, min_side):
        w = np.zeros((h, wd, 2)) if w is None else resize_flow(w, wd, h)
        w = solve_level(resample(g1, wd, h), resample(g2, wd, h), w, params)
    return w


__all__ = [
    "MODES", "PipelineConfig", "PipelineError", "PipelineResult", "LevelRecord",
    "level_kernel_size", "run_algorithm1", "run_algorithm2", "run", "coarse_to_fine_flow",
]
