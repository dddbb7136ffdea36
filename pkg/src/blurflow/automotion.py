"""Camera-motion direction from a flow field via a robust affine fit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .motion import fold_angle


class NoConsensusError(RuntimeError):
    pass


@dataclass(frozen=True)
class AffineModel:
    """``x' = [[a11, a12], [a21, a22]] x + (tx, ty)``.

    :func:`estimate_affine_ransac` expresses ``x`` relative to the image
    centre, so ``(tx, ty)`` is the displacement of the centre pixel.
    """

    a11: float = 1.0
    a12: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array().ravel()):
            raise ValueError("affine parameters must be finite")

    def as_array(self) -> np.ndarray:
        """2x3 matrix ``[A | t]``."""
        return np.array([[self.a11, self.a12, self.tx], [self.a21, self.a22, self.ty]], dtype=np.float64)

    @classmethod
    def from_array(cls, m) -> "AffineModel":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1], m[0, 2], m[1, 2])

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Map an ``(N, 2)`` array of ``(x, y)`` points."""
        m = self.as_array()
        return pts @ m[:, :2].T + m[:, 2]


@dataclass
class RansacParams:
    iterations: int = 500
    inlier_threshold: float = 0.5
    min_inlier_fraction: float = 0.2
    seed: int = 0
    stride: int = 4

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not 0.0 <= self.min_inlier_fraction <= 1.0:
            raise ValueError("min_inlier_fraction must lie in [0, 1]")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


def _fit_affine(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares 2x3 affine matrix mapping ``src`` to ``dst``."""
    design = np.column_stack([src, np.ones(len(src))])
    sol, *_ = np.linalg.lstsq(design, dst, rcond=None)
    return sol.T


def correspondences(flow: np.ndarray, stride: int = 1):
    """Subsampled ``(x, x + w)`` pairs as two ``(N, 2)`` arrays.

    Coordinates are relative to the image centre ``((W-1)/2, (H-1)/2)``.
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be shaped (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    ys, xs = np.mgrid[0:h:stride, 0:w:stride]
    src = np.column_stack([xs.ravel() - (w - 1) / 2.0, ys.ravel() - (h - 1) / 2.0])
    vec = flow[ys.ravel(), xs.ravel()]
    keep = np.all(np.isfinite(vec), axis=1)
    return src[keep], src[keep] + vec[keep]


def estimate_affine_ransac(flow, params: RansacParams = None) -> AffineModel:
    """Fit an affine motion to the correspondences ``x -> x + w(x)``.

    Minimal 3-point samples are drawn with a seeded generator; the model with
    the largest inlier set is refit by least squares on those inliers.

    Raises
    ------
    NoConsensusError
        If the best inlier fraction is below ``params.min_inlier_fraction``.
    """
    params = params or RansacParams()
    src, dst = correspondences(flow, params.stride)
    n = len(src)
    if n < 3:
        # too few samples on the strided grid; use every pixel
        src, dst = correspondences(flow, 1)
        n = len(src)
    if n < 3:
        raise ValueError("need at least 3 valid flow vectors")
    rng = np.random.default_rng(params.seed)
    thr2 = params.inlier_threshold**2
    best = None
    best_count = -1
    for _ in range(params.iterations):
        idx = rng.choice(n, size=3, replace=False)
        s = src[idx]
        # skip (near) collinear samples
        area = (s[1, 0] - s[0, 0]) * (s[2, 1] - s[0, 1]) - (s[2, 0] - s[0, 0]) * (s[1, 1] - s[0, 1])
        if abs(area) < 1e-9:
            continue
        m = _fit_affine(s, dst[idx])
        pred = src @ m[:, :2].T + m[:, 2]
        inliers = np.sum((pred - dst) ** 2, axis=1) <= thr2
        count = int(inliers.sum())
        if count > best_count:
            best, best_count = inliers, count
            if count == n:
                break
    if best is None or best_count / n < params.min_inlier_fraction or best_count < 3:
        raise NoConsensusError("no consensus affine")
    return AffineModel.from_array(_fit_affine(src[best], dst[best]))


def affine_to_motion_angle(model: AffineModel) -> float:
    """Axial direction of the affine translation part, in ``[0, pi)``."""
    if model.tx == 0.0 and model.ty == 0.0:
        return 0.0
    return fold_angle(math.atan2(model.ty, model.tx))


def estimate_motion_angle(flow, params: RansacParams = None) -> float:
    return affine_to_motion_angle(estimate_affine_ransac(flow, params))
