"""Raster primitives: convolution, derivatives, resampling, pyramids and warping.

Images are float64 numpy arrays in the nominal range [0, 1], shaped ``(H, W)``
or ``(H, W, 3)``. Blur kernels are square 2-D arrays with an odd side length.
Flow fields are ``(H, W, 2)`` arrays holding ``(u, v)`` per pixel, with ``u``
along columns (x) and ``v`` along rows (y).

All boundary handling is replicate-edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_image(img) -> np.ndarray:
    """Validate and return ``img`` as a float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValueError(f"image must be 2-D or 3-D, got shape {arr.shape}")
    if arr.ndim == 3 and arr.shape[2] not in (1, 3):
        raise ValueError(f"image must have 1 or 3 channels, got {arr.shape[2]}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite samples")
    return arr


def as_kernel(k) -> np.ndarray:
    arr = np.asarray(k, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] % 2 == 0:
        raise ValueError(f"kernel must be square with odd side, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("kernel contains non-finite weights")
    return arr


def is_valid_kernel(k, tol: float = 1e-6) -> bool:
    """True when ``k`` satisfies the blur-kernel invariants."""
    k = np.asarray(k)
    return (
        k.ndim == 2
        and k.shape[0] == k.shape[1]
        and k.shape[0] % 2 == 1
        and bool(np.all(np.isfinite(k)))
        and bool(np.all(k >= 0))
        and abs(float(k.sum()) - 1.0) <= tol
    )


def delta_kernel(size: int = 1) -> np.ndarray:
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be odd and positive")
    k = np.zeros((size, size))
    k[size // 2, size // 2] = 1.0
    return k


def to_luminance(img: np.ndarray) -> np.ndarray:
    img = as_image(img)
    if img.ndim == 2:
        return img
    if img.shape[2] == 1:
        return img[..., 0]
    return img @ LUMA_WEIGHTS


def _per_channel(fn, img: np.ndarray, *args, **kwargs) -> np.ndarray:
    if img.ndim == 2:
        return fn(img, *args, **kwargs)
    return np.stack([fn(img[..., c], *args, **kwargs) for c in range(img.shape[2])], axis=2)


def _check_extent(img: np.ndarray, k: np.ndarray) -> None:
    if k.shape[0] > img.shape[0] or k.shape[1] > img.shape[1]:
        raise ValueError("kernel exceeds image extent")


def convolve_spatial(img, k) -> np.ndarray:
    """Direct 2-D convolution with replicate-edge boundaries."""
    img = as_image(img)
    k = as_kernel(k)
    _check_extent(img, k)
    return _per_channel(ndimage.convolve, img, k, mode="nearest")


def _convolve_fft_2d(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    r = k.shape[0] // 2
    padded = np.pad(img, r, mode="edge")
    ph, pw = padded.shape
    # linear convolution size; rfft2 zero-pads both operands to it
    sh, sw = ph + 2 * r, pw + 2 * r
    prod = np.fft.rfft2(padded, s=(sh, sw)) * np.fft.rfft2(k, s=(sh, sw))
    full = np.fft.irfft2(prod, s=(sh, sw))
    h, w = img.shape
    return full[2 * r : 2 * r + h, 2 * r : 2 * r + w]


def convolve_frequency(img, k) -> np.ndarray:
    """FFT convolution, equal to :func:`convolve_spatial` up to round-off.

    The image is edge-padded by the kernel radius and zero-padded to the
    linear-convolution size, so no circular wrap-around reaches the output.
    """
    img = as_image(img)
    k = as_kernel(k)
    _check_extent(img, k)
    return _per_channel(_convolve_fft_2d, img, k)


def suppress_impulses(img, threshold: float = 0.2) -> np.ndarray:
    """Switching 3x3 median for salt-and-pepper noise.

    Only samples that sit at the range limits (0 or 1) and differ from their
    neighbourhood median by more than ``threshold`` are replaced, so clean
    images pass through unchanged.
    """
    img = as_image(img)

    def run(a):
        med = ndimage.median_filter(a, size=3, mode="nearest")
        hit = ((a <= 1e-6) | (a >= 1.0 - 1e-6)) & (np.abs(a - med) > threshold)
        return np.where(hit, med, a)

    return _per_channel(run, img)


def _dx(a: np.ndarray) -> np.ndarray:
    p = np.pad(a, ((0, 0), (1, 1)), mode="edge")
    return 0.5 * (p[:, 2:] - p[:, :-2])


def _dy(a: np.ndarray) -> np.ndarray:
    p = np.pad(a, ((1, 1), (0, 0)), mode="edge")
    return 0.5 * (p[2:, :] - p[:-2, :])


def gradient(img: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Central-difference first derivatives ``(dx, dy)`` of a 2-D array."""
    a = np.asarray(img, dtype=np.float64)
    return _dx(a), _dy(a)


def derivatives(img) -> Tuple[np.ndarray, ...]:
    """Return ``(dx, dy, dxx, dyy, dxy)`` of a single-channel image.

    Second derivatives are repeated central differences.
    """
    img = as_image(img)
    if img.ndim != 2:
        raise ValueError("derivatives expects a single-channel image")
    dx, dy = _dx(img), _dy(img)
    return dx, dy, _dx(dx), _dy(dy), _dy(dx)


def _smooth_sigma(scale: float) -> float:
    if scale >= 1.0:
        return 0.0
    return 0.6 * np.sqrt(1.0 / scale**2 - 1.0)


def _bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = img.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.minimum(x0, w - 1)
    y0 = np.minimum(y0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _resample_2d(img: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    h, w = img.shape
    if (h, w) == (new_h, new_w):
        return img.copy()
    sy, sx = new_h / h, new_w / w
    sigma = (_smooth_sigma(sy), _smooth_sigma(sx))
    if sigma[0] > 0 or sigma[1] > 0:
        img = ndimage.gaussian_filter(img, sigma, mode="nearest")
    # pixel-centre aligned mapping
    xs = (np.arange(new_w) + 0.5) / sx - 0.5
    ys = (np.arange(new_h) + 0.5) / sy - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return _bilinear_sample(img, gx, gy)


def resample(img, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resize with Gaussian anti-aliasing when shrinking.

    The pre-smoothing standard deviation per axis is ``0.6*sqrt(1/s**2 - 1)``
    for scale ``s < 1``.
    """
    if new_w < 1 or new_h < 1:
        raise ValueError("target size must be at least 1x1")
    img = as_image(img)
    return _per_channel(_resample_2d, img, int(new_w), int(new_h))


def resize_flow(flow: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Resample a flow field and rescale its vectors to the new grid."""
    h, w = flow.shape[:2]
    out = np.empty((new_h, new_w, 2))
    out[..., 0] = _resample_2d(flow[..., 0], new_w, new_h) * (new_w / w)
    out[..., 1] = _resample_2d(flow[..., 1], new_w, new_h) * (new_h / h)
    return out


def warp_stack(stack: np.ndarray, flow: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Warp every plane of an ``(H, W, C)`` stack by one flow field.

    Interpolation weights are computed once and shared across planes.
    """
    h, w = stack.shape[:2]
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = gx + flow[..., 0]
    ys = gy + flow[..., 1]
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), w - 1)
    y0 = np.minimum(np.floor(ys).astype(np.intp), h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    top = stack[y0, x0] * (1.0 - fx) + stack[y0, x1] * fx
    bottom = stack[y1, x0] * (1.0 - fx) + stack[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy, valid


def warp_bilinear(img, flow) -> Tuple[np.ndarray, np.ndarray]:
    """Sample ``img`` at ``x + w(x)``.

    Returns the warped image and a boolean mask that is False wherever the
    sampling position falls outside the image. Out-of-range samples take the
    nearest edge value so the output stays finite.
    """
    img = as_image(img)
    flow = np.asarray(flow, dtype=np.float64)
    h, w = img.shape[:2]
    if flow.shape != (h, w, 2):
        raise ValueError(f"flow shape {flow.shape} does not match image {(h, w)}")
    if img.ndim == 2:
        warped, valid = warp_stack(img[..., None], flow)
        return warped[..., 0], valid
    return warp_stack(img, flow)


@dataclass
class Pyramid:
    """Image levels ordered coarsest first."""

    levels: List[np.ndarray]
    factor: float

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def shapes(self) -> List[Tuple[int, int]]:
        return [lvl.shape[:2] for lvl in self.levels]


def pyramid_shapes(height: int, width: int, factor: float, min_side: int) -> List[Tuple[int, int]]:
    """Level shapes ``(h, w)`` coarsest first; see :func:`build_pyramid`."""
    if not 0.0 < factor < 1.0:
        raise ValueError("pyramid factor must lie in (0, 1)")
    if min_side < 8:
        raise ValueError("min_side must be at least 8")
    if height < min_side or width < min_side:
        return [(height, width)]
    shapes = []
    n = 0
    while True:
        s = factor**n
        hh, ww = int(round(height * s)), int(round(width * s))
        if hh < min_side or ww < min_side:
            break
        shapes.append((hh, ww))
        n += 1
    return shapes[::-1]


def build_pyramid(img, factor: float = 0.75, min_side: int = 8) -> Pyramid:
    """Build a top-down pyramid.

    Level ``i`` of ``n`` has sides ``round(side * factor**(n-1-i))`` and each
    level is resampled directly from the finest image.
    """
    img = as_image(img)
    shapes = pyramid_shapes(img.shape[0], img.shape[1], factor, min_side)
    levels = [resample(img, w, h) for h, w in shapes]
    return Pyramid(levels=levels, factor=factor)
