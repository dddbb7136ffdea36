"""Camera-motion channel: pose projection, axial directions and CSV replay."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np


def fold_angle(theta: float) -> float:
    """Map an angle onto the axial range [0, pi)."""
    t = math.fmod(float(theta), math.pi)
    if t < 0:
        t += math.pi
    if t >= math.pi:
        t = 0.0
    return t


@dataclass(frozen=True)
class CameraMotionSample:
    frame_index: int
    r: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.theta)):
            raise ValueError("motion sample must be finite")
        if self.r < 0:
            raise ValueError(f"motion magnitude must be non-negative, got {self.r}")
        if not 0.0 <= self.theta < math.pi:
            raise ValueError(f"theta must lie in [0, pi), got {self.theta}")

    def as_vector(self) -> np.ndarray:
        """Cartesian representative ``r * (cos theta, sin theta)``."""
        return self.r * np.array([math.cos(self.theta), math.sin(self.theta)])


def sample_from_vector(vec, frame_index: int = 0, zero_tol: float = 1e-12) -> CameraMotionSample:
    x, y = float(vec[0]), float(vec[1])
    r = math.hypot(x, y)
    if r <= zero_tol:
        return CameraMotionSample(frame_index, 0.0, 0.0)
    return CameraMotionSample(frame_index, r, fold_angle(math.atan2(y, x)))


@dataclass
class PoseDelta:
    """Tracked pose change between frame j and j+1.

    ``x_curr`` and ``x_next`` are either single 3-vectors or ``(n, 3)``
    arrays of per-pixel points; ``pixel_count`` defaults to the row count.
    """

    K: np.ndarray
    R: np.ndarray
    T: np.ndarray
    x_curr: np.ndarray
    x_next: np.ndarray
    pixel_count: int | None = None

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        self.T = np.asarray(self.T, dtype=np.float64).reshape(3)
        if self.K.shape != (3, 3) or self.R.shape != (3, 3):
            raise ValueError("K and R must be 3x3")
        if abs(np.linalg.det(self.K)) < 1e-12:
            raise ValueError("projection matrix K must be invertible")
        if not np.allclose(self.R.T @ self.R, np.eye(3), atol=1e-6):
            raise ValueError("R must be orthonormal")


def project_motion(pose: PoseDelta, frame_index: int = 0) -> CameraMotionSample:
    """Average projected motion ``(1/n) sum K([R|T] X_{j+1} - X_j)`` in polar form.

    The bracket is applied literally: ``R @ X_{j+1} + T - X_j``. The image-space
    vector is the first two components of the projected 3-vector.
    """
    xn = np.atleast_2d(np.asarray(pose.x_next, dtype=np.float64))
    xc = np.atleast_2d(np.asarray(pose.x_curr, dtype=np.float64))
    if xn.shape != xc.shape or xn.shape[1] != 3:
        raise ValueError("point arrays must both be (n, 3)")
    n = pose.pixel_count or xn.shape[0]
    moved = xn @ pose.R.T + pose.T - xc
    projected = moved @ pose.K.T
    if xn.shape[0] == 1 and n > 1:
        mean = projected[0]
    else:
        mean = projected.sum(axis=0) / n
    return sample_from_vector(mean[:2], frame_index)


def combine_motions(m1: CameraMotionSample, m2: CameraMotionSample) -> CameraMotionSample:
    """Vector sum of two neighbouring motions, re-expressed in folded polar form."""
    return sample_from_vector(m1.as_vector() + m2.as_vector(), m1.frame_index)


def load_motion_channel(path) -> List[CameraMotionSample]:
    """Parse a ``frameIndex,r,theta`` CSV replay of the motion channel.

    Blank lines and lines starting with ``#`` are skipped. Angles are folded
    into [0, pi).
    """
    samples = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            idx = int(parts[0])
            r = float(parts[1])
            theta = float(parts[2])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        if not (math.isfinite(r) and math.isfinite(theta)):
            raise ValueError(f"{path}:{lineno}: non-finite value")
        if r < 0:
            raise ValueError(f"{path}:{lineno}: negative magnitude {r}")
        if idx in samples:
            raise ValueError(f"{path}:{lineno}: duplicate frame index {idx}")
        samples[idx] = CameraMotionSample(idx, r, fold_angle(theta))
    return [samples[i] for i in sorted(samples)]


def save_motion_channel(path, samples) -> None:
    lines = ["# frameIndex,r,theta"]
    lines += [f"{s.frame_index},{s.r!r},{s.theta!r}" for s in samples]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
