"""Directional high-pass filtering of images and blur kernels.

The frequency response along a direction ``theta`` is

    F(u, v) = 1 - exp(-L(u, v)**2 / (2 sigma**2)),  L = u cos(theta) + v sin(theta)

with ``u`` along image columns and ``v`` along rows, in cycles per sample.
Kernels are enhanced by filtering along the direction orthogonal to each
camera-motion direction, which strips low-frequency haze while keeping the
blur streak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .deconv import normalize_kernel
from .imgcore import _bilinear_sample, as_image, as_kernel
from .motion import fold_angle

FRAME1_WEIGHTS = (1 / 2, 1 / 3, 1 / 6)
FRAME2_WEIGHTS = (1 / 3, 1 / 2, 1 / 6)


@dataclass
class DirectionalFilterParams:
    # 0.08 x Nyquist (0.5 cycles/sample)
    sigma: float = 0.04
    support_length: int = 15

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.support_length < 3 or self.support_length % 2 == 0:
            raise ValueError("support_length must be odd and >= 3")


def spatial_sigma(sigma: float) -> float:
    """Spatial standard deviation matching a frequency-domain ``sigma``."""
    return 1.0 / (2.0 * math.pi * sigma)


def spatial_taps(sigma: float, support_length: int):
    """Integer offsets and normalised taps ``m * g(t)`` of the line filter."""
    half = support_length // 2
    t = np.arange(-half, half + 1, dtype=np.float64)
    s = spatial_sigma(sigma)
    g = 1.0 - np.exp(-(t**2) / (2.0 * s**2))
    return t, g / g.sum()


def directional_highpass_spatial(img, theta: float, params: DirectionalFilterParams = None) -> np.ndarray:
    """Line filter ``m * sum_t g(t) I(x + t*Theta)`` with ``Theta = (cos, sin)``.

    Off-grid samples use bilinear interpolation with replicate edges.
    """
    params = params or DirectionalFilterParams()
    img = as_image(img)
    t, taps = spatial_taps(params.sigma, params.support_length)
    h, w = img.shape[:2]
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    c, s = math.cos(theta), math.sin(theta)

    def run(channel):
        out = np.zeros_like(channel)
        for ti, wi in zip(t, taps):
            out += wi * _bilinear_sample(channel, gx + ti * c, gy + ti * s)
        return out

    if img.ndim == 2:
        return run(img)
    return np.stack([run(img[..., ch]) for ch in range(img.shape[2])], axis=2)


def frequency_response(u, v, theta: float, sigma: float):
    """Gain of the directional high-pass filter at frequency ``(u, v)``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    line = np.asarray(u) * math.cos(theta) + np.asarray(v) * math.sin(theta)
    return -np.expm1(-(line**2) / (2.0 * sigma**2))


def filter_periodic(grid, theta: float, sigma: float) -> np.ndarray:
    """Multiply the DFT of a periodic 2-D grid by the directional response."""
    grid = np.asarray(grid, dtype=np.float64)
    u, v = np.meshgrid(np.fft.fftfreq(grid.shape[1]), np.fft.fftfreq(grid.shape[0]))
    return np.fft.ifft2(np.fft.fft2(grid) * frequency_response(u, v, theta, sigma)).real


def directional_highpass_raw(k, theta: float, sigma: float = 0.04) -> np.ndarray:
    """Linear part of the kernel filter, before renormalisation.

    The kernel is zero-padded to twice its size, filtered periodically and
    cropped back.
    """
    k = as_kernel(k)
    s = k.shape[0]
    off = s // 2
    pad = np.zeros((2 * s, 2 * s))
    pad[off : off + s, off : off + s] = k
    return filter_periodic(pad, theta, sigma)[off : off + s, off : off + s]


def directional_highpass_frequency(k, theta: float, sigma: float = 0.04) -> np.ndarray:
    """Filter a kernel along ``theta`` in the Fourier domain and renormalise.

    The kernel is zero-padded to twice its size before the transform.
    """
    return normalize_kernel(directional_highpass_raw(k, theta, sigma))


def enhance_kernel(k, thetas: Sequence[float], weights: Sequence[float], sigma: float = 0.04) -> np.ndarray:
    """Weighted multi-direction enhancement of a pre-estimated kernel.

    Each ``theta`` is a blur direction; filtering runs along ``theta + pi/2``.
    The weighted sum is renormalised once at the end.
    """
    k = as_kernel(k)
    if len(thetas) != len(weights) or not thetas:
        raise ValueError("thetas and weights must be non-empty and equally long")
    if abs(sum(weights) - 1.0) > 1e-6:
        raise ValueError(f"weights must sum to 1, got {sum(weights)!r}")
    acc = np.zeros_like(k)
    for theta, beta in zip(thetas, weights):
        if not 0.0 <= theta < math.pi:
            raise ValueError(f"theta must lie in [0, pi), got {theta}")
        acc += beta * directional_highpass_raw(k, fold_angle(theta + math.pi / 2), sigma)
    return normalize_kernel(acc)
