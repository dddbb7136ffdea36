"""Synthetic blurred-sequence benchmark and flow error metrics."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .imgcore import as_image, as_kernel, convolve_frequency, warp_bilinear
from .motion import CameraMotionSample, combine_motions, fold_angle
from .pipeline import run

DEFAULT_EPS_GT = 0.04
RESULT_FIELDS = ("case", "mode", "lambda", "noiseDensity", "AEE", "AAE", "seconds")


# ---------------------------------------------------------------- metrics

def _masked(w, w_gt, mask):
    w = np.asarray(w, dtype=np.float64)
    w_gt = np.asarray(w_gt, dtype=np.float64)
    if w.shape != w_gt.shape or w.ndim != 3 or w.shape[2] != 2:
        raise ValueError(f"flow shapes differ or are not (H, W, 2): {w.shape} vs {w_gt.shape}")
    mask = np.ones(w.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != w.shape[:2]:
        raise ValueError("mask shape does not match flow")
    if not mask.any():
        raise ValueError("no ground truth support")
    return w[mask], w_gt[mask]


def compute_aee(w, w_gt, mask=None) -> float:
    """Average endpoint error in pixels over ``mask``."""
    a, b = _masked(w, w_gt, mask)
    return float(np.mean(np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])))


def compute_aae(w, w_gt, mask=None) -> float:
    """Average angular error in degrees between ``(u, v, 1)`` and ``(u_gt, v_gt, 1)``."""
    a, b = _masked(w, w_gt, mask)
    num = 1.0 + a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    den = np.sqrt(1.0 + a[:, 0] ** 2 + a[:, 1] ** 2) * np.sqrt(1.0 + b[:, 0] ** 2 + b[:, 1] ** 2)
    return float(np.degrees(np.mean(np.arccos(np.clip(num / den, -1.0, 1.0)))))


def filter_ground_truth(I1b, I2b, w_gt, eps: float = DEFAULT_EPS_GT) -> np.ndarray:
    """Pixels whose ground-truth correspondence is photometrically consistent.

    True where ``x + w_gt(x)`` stays inside the image and
    ``|I2b(x + w_gt) - I1b(x)| <= eps``.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    I1b = as_image(I1b)
    I2b = as_image(I2b)
    if I1b.shape != I2b.shape:
        raise ValueError("image shapes differ")
    warped, valid = warp_bilinear(I2b, w_gt)
    diff = np.abs(warped - I1b)
    if diff.ndim == 3:
        diff = diff.max(axis=2)
    return valid & (diff <= eps)


def add_salt_pepper(img, density: float, seed: int = 0) -> np.ndarray:
    """Set ``round(density * H * W)`` distinct pixels to 0 or 1 at random."""
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    img = as_image(img)
    out = img.copy()
    h, w = img.shape[:2]
    count = int(round(density * h * w))
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    idx = rng.choice(h * w, size=count, replace=False)
    vals = rng.integers(0, 2, size=count).astype(np.float64)
    ys, xs = np.unravel_index(idx, (h, w))
    if out.ndim == 2:
        out[ys, xs] = vals
    else:
        out[ys, xs, :] = vals[:, None]
    return out


# ---------------------------------------------------------------- synthesis

def streak_kernel(length: float, theta: float, size: int) -> np.ndarray:
    """Normalised linear motion-blur kernel of ``length`` pixels along ``theta``.

    The segment is densely sampled and splatted bilinearly.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be odd")
    if length > size:
        raise ValueError("streak longer than kernel")
    k = np.zeros((size, size))
    c = size // 2
    t = np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, max(2, int(20 * length)))
    x = c + t * math.cos(theta)
    y = c + t * math.sin(theta)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    fx, fy = x - x0, y - y0
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            np.add.at(k, (np.clip(y0 + dy, 0, size - 1), np.clip(x0 + dx, 0, size - 1)), wy * wx)
    return k / k.sum()


class ProceduralScene:
    """Continuous piecewise-smooth test scene that can be sampled anywhere.

    Random soft-edged discs and boxes over a shaded background, plus a faint
    oriented texture so no region is entirely flat.
    """

    def __init__(self, size: int, seed: int = 0, n_shapes: int = 28, softness: float = 0.6):
        rng = np.random.default_rng(seed)
        self.softness = softness
        self.background = rng.uniform(0.3, 0.7, 3)
        self.shapes = []
        for _ in range(n_shapes):
            kind = "disc" if rng.random() < 0.5 else "box"
            cx, cy = rng.uniform(-0.1 * size, 1.1 * size, 2)
            r = rng.uniform(0.04 * size, 0.22 * size)
            aspect = rng.uniform(0.4, 1.0)
            value = rng.uniform(0.05, 0.95)
            self.shapes.append((kind, cx, cy, r, aspect, value))
        self.texture = [(rng.uniform(0.15, 0.6), rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
                        for _ in range(3)]
        self.size = size

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        s = self.size
        b = self.background
        img = b[0] + (b[1] - b[0]) * x / s + (b[2] - b[0]) * y / s * 0.5
        for kind, cx, cy, r, aspect, value in self.shapes:
            if kind == "disc":
                d = np.hypot(x - cx, (y - cy) / aspect) - r
            else:
                d = np.maximum(np.abs(x - cx) - r, np.abs(y - cy) - r * aspect)
            m = 0.5 * (1.0 - np.tanh(d / self.softness))
            img = img * (1.0 - m) + value * m
        for freq, ang, ph in self.texture:
            img = img + 0.03 * np.sin(freq * (x * math.cos(ang) + y * math.sin(ang)) + ph)
        return np.clip(img, 0.0, 1.0)


@dataclass
class AffineMotion:
    """Per-frame map ``x -> A (x - c) + c + t`` about the image centre."""

    A: np.ndarray
    t: np.ndarray

    def matrix(self, center) -> np.ndarray:
        """3x3 homogeneous matrix of the map."""
        c = np.asarray(center, dtype=np.float64)
        m = np.eye(3)
        m[:2, :2] = self.A
        m[:2, 2] = self.t + c - self.A @ c
        return m


@dataclass
class BenchCase:
    name: str
    latents: List[np.ndarray]
    kernels: List[np.ndarray]
    gt_flow: np.ndarray
    motion_dirs: List[float]
    motion_lengths: List[float] = field(default_factory=list)
    epsilon_gt: float = DEFAULT_EPS_GT

    def __post_init__(self):
        if len(self.latents) != 4 or len(self.kernels) != 4 or len(self.motion_dirs) != 4:
            raise ValueError("a case holds four frames")
        shape = self.latents[0].shape
        if any(l.shape != shape for l in self.latents):
            raise ValueError("latent frames differ in size")
        if self.gt_flow.shape != shape[:2] + (2,):
            raise ValueError("ground-truth flow does not match frame size")
        if self.epsilon_gt < 0:
            raise ValueError("epsilon_gt must be non-negative")
        if not self.motion_lengths:
            self.motion_lengths = [1.0] * 4

    def blurred(self) -> List[np.ndarray]:
        return synthesize_blur_case(self.latents, self.kernels)

    def thetas(self, lam: float = 0.0) -> List[float]:
        """``(theta1, theta2, theta12)`` for the middle pair, rotated by ``lam`` radians."""
        m1 = CameraMotionSample(1, self.motion_lengths[1], fold_angle(self.motion_dirs[1] + lam))
        m2 = CameraMotionSample(2, self.motion_lengths[2], fold_angle(self.motion_dirs[2] + lam))
        return [m1.theta, m2.theta, combine_motions(m1, m2).theta]

    def mask(self) -> np.ndarray:
        b = self.blurred()
        return filter_ground_truth(b[1], b[2], self.gt_flow, self.epsilon_gt)


def synthesize_blur_case(latents: Sequence[np.ndarray], kernels: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Blur each latent frame with its own kernel."""
    if len(latents) != len(kernels):
        raise ValueError("need one kernel per latent frame")
    return [convolve_frequency(l, as_kernel(k)) for l, k in zip(latents, kernels)]


def make_case(name: str, size: int = 64, seed: int = 0, motion: Optional[AffineMotion] = None,
              blur_dirs: Sequence[float] = (0.5, 0.6, 0.55, 0.65), blur_length: float = 7.0,
              kernel_size: int = 9, epsilon_gt: float = DEFAULT_EPS_GT) -> BenchCase:
    """Render four frames of a procedural scene under a repeated affine motion.

    Frame ``j`` samples the scene at ``M**-j (x)``, so the exact flow from
    frame 1 to frame 2 is ``M(x) - x``. Frame ``j`` is blurred by a streak
    along ``blur_dirs[j]``.
    """
    motion = motion or AffineMotion(np.eye(2), np.array([1.5, -1.0]))
    scene = ProceduralScene(size, seed)
    c = ((size - 1) / 2.0, (size - 1) / 2.0)
    m = motion.matrix(c)
    minv = np.linalg.inv(m)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    pts = np.stack([xx.ravel(), yy.ravel(), np.ones(xx.size)])
    latents = []
    for j in range(4):
        q = np.linalg.matrix_power(minv, j) @ pts
        latents.append(scene(q[0].reshape(size, size), q[1].reshape(size, size)))
    fwd = m @ pts
    gt = np.stack([(fwd[0] - pts[0]).reshape(size, size), (fwd[1] - pts[1]).reshape(size, size)], axis=2)
    dirs = [fold_angle(t) for t in blur_dirs]
    kernels = [streak_kernel(blur_length, t, kernel_size) for t in dirs]
    return BenchCase(name=name, latents=latents, kernels=kernels, gt_flow=gt, motion_dirs=dirs,
                     motion_lengths=[blur_length] * 4, epsilon_gt=epsilon_gt)


def standard_suite(size: int = 64, blur_length: float = 7.0, kernel_size: int = 9) -> List[BenchCase]:
    """Three cases: translation, zoom with translation, rotation with translation.

    The translation case keeps one blur direction for all frames (the streak
    case); the other two turn the blur direction between frames.
    """
    rot = math.radians(2.0)
    return [
        make_case("translation", size, seed=1, motion=AffineMotion(np.eye(2), np.array([1.6, -0.9])),
                  blur_dirs=(0.52, 0.52, 0.52, 0.52), blur_length=blur_length, kernel_size=kernel_size),
        make_case("zoom", size, seed=2, motion=AffineMotion(np.eye(2) * 1.03, np.array([-1.0, 0.8])),
                  blur_dirs=(1.6, 1.9, 2.4, 2.6), blur_length=blur_length, kernel_size=kernel_size),
        make_case("rotation", size, seed=3,
                  motion=AffineMotion(np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]]),
                                      np.array([0.7, 1.2])),
                  blur_dirs=(2.9, 0.1, 0.6, 0.8), blur_length=blur_length, kernel_size=kernel_size),
    ]


# ---------------------------------------------------------------- runs

def run_case(case: BenchCase, cfg, lam_deg: float = 0.0, noise_density: float = 0.0,
             noise_seed: int = 0) -> Dict[str, object]:
    """Run one configuration on the middle pair and score it.

    ``cfg`` is a :class:`~blurflow.pipeline.PipelineConfig`. Noise is added
    after blurring; the ground-truth mask always comes from the noise-free
    blurred frames.
    """
    b = case.blurred()
    I1, I2 = b[1], b[2]
    if noise_density > 0:
        I1 = add_salt_pepper(I1, noise_density, noise_seed)
        I2 = add_salt_pepper(I2, noise_density, noise_seed + 1)
    thetas = None if cfg.mode == "auto" else case.thetas(math.radians(lam_deg))
    t0 = time.perf_counter()
    result = run(I1, I2, cfg, thetas)
    elapsed = time.perf_counter() - t0
    mask = filter_ground_truth(b[1], b[2], case.gt_flow, case.epsilon_gt)
    return {
        "case": case.name,
        "mode": cfg.mode,
        "lambda": lam_deg,
        "noiseDensity": noise_density,
        "AEE": compute_aee(result.flow, case.gt_flow, mask),
        "AAE": compute_aae(result.flow, case.gt_flow, mask),
        "seconds": elapsed,
        "epsilonGt": case.epsilon_gt,
        "result": result,
    }


def sweep_motion_angle(case: BenchCase, lambdas: Sequence[float], cfg) -> List[Dict[str, object]]:
    """One row per ``lambda`` (degrees): all input directions rotated by it."""
    return [run_case(case, cfg, lam_deg=lam) for lam in lambdas]


def sweep_noise(case: BenchCase, densities: Sequence[float], cfg, seed: int = 0) -> List[Dict[str, object]]:
    return [run_case(case, cfg, noise_density=d, noise_seed=seed) for d in densities]


def with_mode(cfg, mode: str):
    return replace(cfg, mode=mode)


def write_results_csv(path, rows: Sequence[Dict[str, object]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{row[k]:.6g}" if isinstance(row[k], float) else row[k]) for k in RESULT_FIELDS})
