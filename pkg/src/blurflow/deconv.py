"""Blind kernel pre-estimation and non-blind deconvolution.

Kernel estimation follows the fast-deblurring recipe: predict salient
gradients of the current latent image, then fit the kernel to the blurred
image's derivatives by Tikhonov-regularised least squares solved with
conjugate gradients in the Fourier domain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from .imgcore import as_image, as_kernel, delta_kernel, gradient, resample
from .linalg import conjugate_gradient

log = logging.getLogger(__name__)


@dataclass
class KernelEstimationParams:
    """Parameters for :func:`estimate_kernel` and :func:`blind_deconvolve`.

    ``shock_iterations`` sharpens the latent before each kernel fit inside the
    blind loop; 0 disables it. ``recenter`` shifts each blind estimate so its
    centroid sits on the centre pixel.
    """

    delta: float = 5.0
    omega1: float = 1.0
    omega2: float = 0.5
    inner_iterations: int = 20
    kernel_size: int = 41
    quantile: float = 0.1
    lambda_reg: float = 2e-3
    shock_iterations: int = 4
    shock_step: float = 0.5
    blind_iterations: int = 3
    recenter: bool = True

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise ValueError("omega weights must be positive")
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 3")
        if not 0.0 < self.quantile <= 1.0:
            raise ValueError("quantile must lie in (0, 1]")
        if self.inner_iterations < 1 or self.blind_iterations < 1:
            raise ValueError("iteration counts must be >= 1")


def normalize_kernel(k) -> np.ndarray:
    """Clip negative weights and rescale to unit sum.

    A kernel with (near) zero mass becomes a centred delta.
    """
    k = as_kernel(k)
    k = np.where(k > 0, k, 0.0)
    s = k.sum()
    if s <= 1e-12:
        return delta_kernel(k.shape[0])
    return k / s


def shock_filter(img: np.ndarray, iterations: int, step: float = 0.5, sigma: float = 1.0) -> np.ndarray:
    """Osher-Rudin shock filter with an upwind scheme.

    The sign of the Laplacian is taken from a Gaussian-smoothed copy, which
    keeps the flow of edges stable on noisy inputs.
    """
    out = np.array(img, dtype=np.float64, copy=True)
    for _ in range(iterations):
        lap = ndimage.laplace(ndimage.gaussian_filter(out, sigma, mode="nearest"), mode="nearest")
        s = np.sign(lap)
        p = np.pad(out, 1, mode="edge")
        dxm = out - p[1:-1, :-2]
        dxp = p[1:-1, 2:] - out
        dym = out - p[:-2, 1:-1]
        dyp = p[2:, 1:-1] - out
        grad_pos = np.sqrt(
            np.maximum(dxm, 0) ** 2 + np.minimum(dxp, 0) ** 2
            + np.maximum(dym, 0) ** 2 + np.minimum(dyp, 0) ** 2
        )
        grad_neg = np.sqrt(
            np.minimum(dxm, 0) ** 2 + np.maximum(dxp, 0) ** 2
            + np.minimum(dym, 0) ** 2 + np.maximum(dyp, 0) ** 2
        )
        out -= step * (np.maximum(s, 0) * grad_pos + np.minimum(s, 0) * grad_neg)
    return out


def forward_gradient(img: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Forward differences ``I(x+1) - I(x)``, zero on the last row/column.

    Unlike central differences these keep the Nyquist band, so a kernel fit
    on them can resolve single-pixel structure.
    """
    a = np.asarray(img, dtype=np.float64)
    gx = np.zeros_like(a)
    gy = np.zeros_like(a)
    gx[:, :-1] = a[:, 1:] - a[:, :-1]
    gy[:-1, :] = a[1:, :] - a[:-1, :]
    return gx, gy


def predict_gradients(
    latent,
    quantile: float = 0.1,
    difference=gradient,
) -> Tuple[np.ndarray, np.ndarray]:
    """Salient-edge gradient maps of ``latent``.

    Keeps the gradients of the ``ceil(quantile * n)`` pixels with the largest
    gradient magnitude (ties at the threshold are kept, zero gradients never
    are) and zeroes the rest.
    """
    latent = as_image(latent)
    if latent.ndim != 2:
        raise ValueError("predict_gradients expects a single-channel image")
    gx, gy = difference(latent)
    mag = np.hypot(gx, gy)
    n_keep = int(np.ceil(quantile * mag.size))
    flat = mag.ravel()
    thresh = np.partition(flat, flat.size - n_keep)[flat.size - n_keep]
    keep = (mag >= thresh) & (mag > 0)
    return np.where(keep, gx, 0.0), np.where(keep, gy, 0.0)


class KernelProblem:
    """Least-squares kernel fit over derivative pairs.

    Minimises ``sum_p w_p ||I_p - k * l_p||^2 + delta ||k||^2`` where the
    convolution is restricted to pixels whose kernel footprint lies inside the
    image. Convolutions are evaluated with FFTs of the full image size.
    """

    def __init__(self, pairs: List[Tuple[float, np.ndarray, np.ndarray]], size: int, delta: float):
        if not pairs:
            raise ValueError("at least one derivative pair is required")
        h, w = pairs[0][1].shape
        if size > h or size > w:
            raise ValueError("kernel exceeds image extent")
        self.size = size
        self.delta = delta
        self.shape = (h, w)
        c = size // 2
        self._weights = [wt for wt, _, _ in pairs]
        self._lhat = [np.fft.rfft2(lp) for _, _, lp in pairs]
        self._targets = [ip[c : h - c, c : w - c] for _, ip, _ in pairs]
        self._rhs = self._adjoint([t for t in self._targets])

    def _valid(self, full: np.ndarray) -> np.ndarray:
        s = self.size
        return full[s - 1 :, s - 1 :]

    def _forward(self, k: np.ndarray) -> List[np.ndarray]:
        khat = np.fft.rfft2(k, s=self.shape)
        return [self._valid(np.fft.irfft2(khat * lh, s=self.shape)) for lh in self._lhat]

    def _adjoint(self, residuals: List[np.ndarray]) -> np.ndarray:
        s = self.size
        acc = np.zeros((self.shape[0], self.shape[1] // 2 + 1), dtype=complex)
        for wt, lh, r in zip(self._weights, self._lhat, residuals):
            full = np.zeros(self.shape)
            full[s - 1 :, s - 1 :] = r
            acc += wt * np.fft.rfft2(full) * np.conj(lh)
        return np.fft.irfft2(acc, s=self.shape)[:s, :s]

    @property
    def rhs(self) -> np.ndarray:
        return self._rhs

    def normal_op(self, k: np.ndarray) -> np.ndarray:
        return self._adjoint(self._forward(k)) + self.delta * k

    def data_residual(self, k: np.ndarray) -> float:
        """Weighted squared residual ``sum_p w_p ||I_p - k * l_p||^2``."""
        preds = self._forward(k)
        return float(sum(wt * np.sum((t - p) ** 2) for wt, t, p in zip(self._weights, self._targets, preds)))

    def objective(self, k: np.ndarray) -> float:
        return self.data_residual(k) + self.delta * float(np.sum(k * k))

    def solve(self, x0: Optional[np.ndarray] = None, maxiter: int = 20, rtol: float = 1e-6,
              callback: Optional[Callable[[np.ndarray], None]] = None):
        return conjugate_gradient(self.normal_op, self.rhs, x0=x0, maxiter=maxiter, rtol=rtol, callback=callback)


def derivative_pairs(latent, blurred, params: KernelEstimationParams):
    """Weighted (blurred, latent) derivative pairs used by the kernel fit."""
    latent = as_image(latent)
    blurred = as_image(blurred)
    if latent.shape != blurred.shape or latent.ndim != 2:
        raise ValueError("latent and blurred must be single-channel images of equal size")
    px, py = predict_gradients(latent, params.quantile, difference=forward_gradient)
    bx, by = forward_gradient(blurred)
    bxx, bxy = forward_gradient(bx)
    _, byy = forward_gradient(by)
    lxx, lxy = forward_gradient(px)
    lyx, lyy = forward_gradient(py)
    w1, w2 = params.omega1, params.omega2
    return [
        (w1, bx, px),
        (w1, by, py),
        (w2, bxx, lxx),
        (w2, byy, lyy),
        (w2, bxy, 0.5 * (lxy + lyx)),
    ]


def solve_kernel(latent, blurred, params: KernelEstimationParams, size: Optional[int] = None,
                 x0: Optional[np.ndarray] = None, callback=None):
    """Unnormalised least-squares kernel plus CG diagnostics.

    ``info`` gains ``objective`` and ``data_residual`` entries for the returned
    iterate.
    """
    size = params.kernel_size if size is None else size
    problem = KernelProblem(derivative_pairs(latent, blurred, params), size, params.delta)
    k, info = problem.solve(x0=x0, maxiter=params.inner_iterations, callback=callback)
    info["objective"] = problem.objective(k)
    info["data_residual"] = problem.data_residual(k)
    if not info["converged"]:
        log.debug("kernel CG stopped after %d iterations (rel. residual %.3g)",
                  info["iterations"], info["residual"])
    return k, info


def estimate_kernel(latent, blurred, params: KernelEstimationParams = None, size: Optional[int] = None,
                    x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Estimate a normalised blur kernel mapping ``latent`` to ``blurred``."""
    params = params or KernelEstimationParams()
    k, _ = solve_kernel(latent, blurred, params, size=size, x0=x0)
    return normalize_kernel(k)


def _psf_to_otf(k: np.ndarray, shape) -> np.ndarray:
    pad = np.zeros(shape)
    s = k.shape[0]
    pad[:s, :s] = k
    pad = np.roll(pad, (-(s // 2), -(s // 2)), axis=(0, 1))
    return np.fft.rfft2(pad)


def _periodic_pad(img: np.ndarray, p: int) -> np.ndarray:
    """Edge-pad and blend the margin towards a wrap-smoothed copy.

    This removes the seam that circular FFTs would otherwise see at the
    outer border, which limits ringing near the image frame.
    """
    padded = np.pad(img, p, mode="edge")
    smooth = ndimage.gaussian_filter(padded, max(p / 3.0, 1.0), mode="wrap")
    h, w = img.shape
    dy = np.minimum(np.arange(h + 2 * p), np.arange(h + 2 * p)[::-1])
    dx = np.minimum(np.arange(w + 2 * p), np.arange(w + 2 * p)[::-1])
    wy = np.clip(dy / p, 0.0, 1.0)
    wx = np.clip(dx / p, 0.0, 1.0)
    weight = np.minimum.outer(wy, wx)
    return weight * padded + (1.0 - weight) * smooth


def _deconvolve_2d(blurred: np.ndarray, k: np.ndarray, lambda_reg: float) -> np.ndarray:
    p = k.shape[0]
    padded = _periodic_pad(blurred, p)
    shape = padded.shape
    kf = _psf_to_otf(k, shape)
    dxf = _psf_to_otf(np.array([[0, 0, 0], [0, -1, 1], [0, 0, 0]], dtype=float), shape)
    dyf = _psf_to_otf(np.array([[0, 0, 0], [0, -1, 0], [0, 1, 0]], dtype=float), shape)
    denom = np.abs(kf) ** 2 + lambda_reg * (np.abs(dxf) ** 2 + np.abs(dyf) ** 2) + 1e-12
    latent = np.fft.irfft2(np.conj(kf) * np.fft.rfft2(padded) / denom, s=shape)
    h, w = blurred.shape
    return latent[p : p + h, p : p + w]


def non_blind_deconvolve(blurred, k, lambda_reg: float = 2e-3) -> np.ndarray:
    """Closed-form deconvolution with a quadratic gradient prior.

    Minimises ``||blurred - k * l||^2 + lambda_reg ||grad l||^2`` in the
    Fourier domain; the result is clipped to [0, 1].
    """
    blurred = as_image(blurred)
    k = as_kernel(k)
    if lambda_reg < 0:
        raise ValueError("lambda_reg must be non-negative")
    if blurred.ndim == 2:
        out = _deconvolve_2d(blurred, k, lambda_reg)
    else:
        out = np.stack([_deconvolve_2d(blurred[..., c], k, lambda_reg) for c in range(blurred.shape[2])], axis=2)
    return np.clip(out, 0.0, 1.0)


def resize_kernel(k: np.ndarray, size: int) -> np.ndarray:
    """Resample a kernel to ``size`` x ``size`` and renormalise."""
    k = as_kernel(k)
    if k.shape[0] == size:
        return k.copy()
    return normalize_kernel(resample(k, size, size))


def kernel_centroid(k: np.ndarray) -> Tuple[float, float]:
    """Centroid ``(x, y)`` relative to the centre pixel."""
    k = as_kernel(k)
    s = k.shape[0]
    y, x = np.mgrid[0:s, 0:s] - s // 2
    m = k.sum()
    if m <= 0:
        return 0.0, 0.0
    return float((k * x).sum() / m), float((k * y).sum() / m)


def center_kernel(k: np.ndarray, tol: float = 1e-3, max_steps: int = 5) -> np.ndarray:
    """Shift ``k`` (bilinearly) so its centroid lies on the centre pixel.

    Mass pushed past the border is lost, so the shift is repeated until the
    centroid is within ``tol`` pixels of the centre.
    """
    k = as_kernel(k).copy()
    for _ in range(max_steps):
        cx, cy = kernel_centroid(k)
        if abs(cx) <= tol and abs(cy) <= tol:
            break
        k = normalize_kernel(ndimage.shift(k, (-cy, -cx), order=1, mode="grid-constant"))
    return k


def rescale_kernel(k: np.ndarray, scale: float, size: int) -> np.ndarray:
    """Magnify the blur footprint by ``scale`` onto a ``size`` x ``size`` grid.

    The centre pixel maps to the centre pixel, so a centred kernel stays
    centred. Used when moving a kernel to a finer pyramid level.
    """
    k = as_kernel(k)
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be odd")
    if scale <= 0:
        raise ValueError("scale must be positive")
    c_old, c_new = k.shape[0] // 2, size // 2
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    coords = [(y - c_new) / scale + c_old, (x - c_new) / scale + c_old]
    if scale < 1:
        k = ndimage.gaussian_filter(k, 0.6 * np.sqrt(1.0 / scale**2 - 1.0), mode="constant")
    return normalize_kernel(ndimage.map_coordinates(k, coords, order=1, mode="grid-constant"))


def blind_deconvolve(latent, blurred, params: KernelEstimationParams, size: int,
                     k_init: Optional[np.ndarray] = None):
    """Alternate kernel estimation and latent update ``blind_iterations`` times.

    Returns ``(kernel, latent, info)`` where ``info`` is the CG record of the
    last kernel solve.
    """
    k = k_init
    info = {}
    for _ in range(params.blind_iterations):
        sharp = shock_filter(latent, params.shock_iterations, params.shock_step)
        raw, info = solve_kernel(sharp, blurred, params, size=size, x0=k)
        k = normalize_kernel(raw)
        if params.recenter:
            k = center_kernel(k)
        latent = non_blind_deconvolve(blurred, k, params.lambda_reg)
    return k, latent, info
