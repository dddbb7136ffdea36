"""Blur-robust variational optical flow on mutually re-blurred images.

The energy is

    E(w) = sum_x phi(|b2(x+w) - b1(x)|^2 + alpha |grad b2(x+w) - grad b1(x)|^2)
           + gamma * sum_x phi(|grad u|^2 + |grad v|^2)

with the Lorentzian ``phi(s2) = log(1 + s2 / (2 eps^2))``. Image gradients use
central differences; flow gradients use forward differences (zero across the
last row/column), which is the discretisation the solver minimises exactly.

Minimisation uses outer warping iterations, a first-order Taylor expansion of
the warped terms, and inner fixed-point iterations that freeze the robust
weights so each step is a sparse SPD system solved by conjugate gradients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import ndimage

from .imgcore import as_image, convolve_frequency, derivatives, warp_stack
from .linalg import conjugate_gradient

log = logging.getLogger(__name__)


@dataclass
class EnergyParams:
    gamma: float = 0.03
    alpha: float = 0.95
    lorentz_eps: float = 0.1
    outer_iterations: int = 5
    inner_iterations: int = 5
    cg_iterations: int = 45
    cg_tolerance: float = 1e-4
    median_filter: bool = False
    # step halvings tried when a full increment raises the energy; 0 disables
    backtracking: int = 4

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lorentz_eps <= 0:
            raise ValueError("lorentz_eps must be positive")
        if self.cg_iterations < 1 or self.outer_iterations < 1 or self.inner_iterations < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.backtracking < 0:
            raise ValueError("backtracking must be >= 0")


def lorentz(s2, eps: float):
    """``log(1 + s2 / (2 eps^2))``."""
    return np.log1p(np.asarray(s2) / (2.0 * eps * eps))


def lorentz_deriv(s2, eps: float):
    """Derivative of :func:`lorentz` with respect to ``s2``."""
    return 1.0 / (2.0 * eps * eps + np.asarray(s2))


def mutual_blur(img1, img2, k1, k2):
    """Cross-apply kernels: ``b1 = img1 * k2`` and ``b2 = img2 * k1``."""
    img1 = as_image(img1)
    img2 = as_image(img2)
    if img1.shape != img2.shape:
        raise ValueError(f"image shapes differ: {img1.shape} vs {img2.shape}")
    return convolve_frequency(img1, k2), convolve_frequency(img2, k1)


@dataclass
class WarpTerms:
    """Warped image terms at the current flow.

    Derivatives of ``b2`` are computed on the grid and then sampled at
    ``x + w``; ``mask`` is False where that position leaves the image.
    """

    bx: np.ndarray
    by: np.ndarray
    bxx: np.ndarray
    byy: np.ndarray
    bxy: np.ndarray
    bz: np.ndarray
    bxz: np.ndarray
    byz: np.ndarray
    mask: np.ndarray


def warp_terms(b1, b2, w) -> WarpTerms:
    b1 = as_image(b1)
    b2 = as_image(b2)
    w = np.asarray(w, dtype=np.float64)
    if b1.shape != b2.shape or b1.ndim != 2:
        raise ValueError("b1 and b2 must be single-channel images of equal size")
    if w.shape != b1.shape + (2,):
        raise ValueError(f"flow shape {w.shape} does not match image {b1.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("flow contains non-finite values")
    d2 = derivatives(b2)
    d1x, d1y = derivatives(b1)[:2]
    stack = np.stack((b2,) + d2, axis=2)
    warped, mask = warp_stack(stack, w)
    b2w, bx, by, bxx, byy, bxy = (warped[..., i] for i in range(6))
    return WarpTerms(
        bx=bx, by=by, bxx=bxx, byy=byy, bxy=bxy,
        bz=b2w - b1, bxz=bx - d1x, byz=by - d1y, mask=mask,
    )


def _forward_diff(a: np.ndarray):
    gx = np.zeros_like(a)
    gy = np.zeros_like(a)
    gx[:, :-1] = a[:, 1:] - a[:, :-1]
    gy[:-1, :] = a[1:, :] - a[:-1, :]
    return gx, gy


def _forward_diff_adjoint(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    out = np.zeros_like(gx)
    out[:, :-1] -= gx[:, :-1]
    out[:, 1:] += gx[:, :-1]
    out[:-1, :] -= gy[:-1, :]
    out[1:, :] += gy[:-1, :]
    return out


def smoothness_s2(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Per-pixel ``|grad u|^2 + |grad v|^2`` with forward differences."""
    ux, uy = _forward_diff(u)
    vx, vy = _forward_diff(v)
    return ux * ux + uy * uy + vx * vx + vy * vy


def _weighted_laplacian(d: np.ndarray, psi: np.ndarray) -> np.ndarray:
    gx, gy = _forward_diff(d)
    return _forward_diff_adjoint(psi * gx, psi * gy)


def _laplacian_diag(psi: np.ndarray) -> np.ndarray:
    h, w = psi.shape
    diag = np.zeros_like(psi)
    if w > 1:
        diag[:, :-1] += psi[:, :-1]
        diag[:, 1:] += psi[:, :-1]
    if h > 1:
        diag[:-1, :] += psi[:-1, :]
        diag[1:, :] += psi[:-1, :]
    return diag


def data_s2(terms: WarpTerms, alpha: float, du=0.0, dv=0.0) -> np.ndarray:
    """Linearised data argument ``r0^2 + alpha (r1^2 + r2^2)`` at ``(du, dv)``."""
    r0, r1, r2 = linearized_residuals(terms, du, dv)
    return r0 * r0 + alpha * (r1 * r1 + r2 * r2)


def linearized_residuals(terms: WarpTerms, du, dv):
    """First-order Taylor models of the brightness and gradient residuals."""
    r0 = terms.bz + terms.bx * du + terms.by * dv
    r1 = terms.bxz + terms.bxx * du + terms.bxy * dv
    r2 = terms.byz + terms.bxy * du + terms.byy * dv
    return r0, r1, r2


def energy_components(b1, b2, w, params: EnergyParams):
    """Return ``(data, smoothness)`` sums; the energy is ``data + gamma * smoothness``."""
    terms = warp_terms(b1, b2, w)
    eps = params.lorentz_eps
    data = lorentz(data_s2(terms, params.alpha), eps)
    data_sum = float(np.sum(np.where(terms.mask, data, 0.0)))
    smooth_sum = float(np.sum(lorentz(smoothness_s2(w[..., 0], w[..., 1]), eps)))
    return data_sum, smooth_sum


def evaluate_energy(b1, b2, w, params: EnergyParams) -> float:
    data, smooth = energy_components(b1, b2, w, params)
    return data + params.gamma * smooth


def assemble_and_solve_increment(b1, b2, w, params: EnergyParams, info: Optional[dict] = None) -> np.ndarray:
    """Solve for the flow increment at fixed warp ``w``.

    Runs ``inner_iterations`` fixed-point steps starting from ``du = dv = 0``;
    each step recomputes the data and smoothness robustness factors and solves
    the resulting linear system with block-Jacobi (2x2 per pixel) preconditioned CG.
    """
    terms = warp_terms(b1, b2, w)
    a = params.alpha
    eps = params.lorentz_eps
    gamma = params.gamma
    u, v = w[..., 0], w[..., 1]
    m = terms.mask.astype(np.float64)

    a11 = terms.bx**2 + a * (terms.bxx**2 + terms.bxy**2)
    a12 = terms.bx * terms.by + a * (terms.bxx * terms.bxy + terms.bxy * terms.byy)
    a22 = terms.by**2 + a * (terms.byy**2 + terms.bxy**2)
    g1 = terms.bx * terms.bz + a * (terms.bxx * terms.bxz + terms.bxy * terms.byz)
    g2 = terms.by * terms.bz + a * (terms.bxy * terms.bxz + terms.byy * terms.byz)

    dw = np.zeros((2,) + u.shape)
    last = {"iterations": 0, "residual": 0.0, "converged": True}
    for _ in range(params.inner_iterations):
        du, dv = dw
        psi_b = m * lorentz_deriv(data_s2(terms, a, du, dv), eps)
        psi_s = lorentz_deriv(smoothness_s2(u + du, v + dv), eps)

        c11, c12, c22 = psi_b * a11, psi_b * a12, psi_b * a22
        diag_s = gamma * _laplacian_diag(psi_s)

        def apply_h(x):
            xu, xv = x
            return np.stack((
                c11 * xu + c12 * xv + gamma * _weighted_laplacian(xu, psi_s),
                c12 * xu + c22 * xv + gamma * _weighted_laplacian(xv, psi_s),
            ))

        p11 = c11 + diag_s + 1e-12
        p22 = c22 + diag_s + 1e-12
        det = p11 * p22 - c12 * c12

        def precond(r):
            ru, rv = r
            return np.stack(((p22 * ru - c12 * rv) / det, (p11 * rv - c12 * ru) / det))

        rhs = -np.stack((
            psi_b * g1 + gamma * _weighted_laplacian(u, psi_s),
            psi_b * g2 + gamma * _weighted_laplacian(v, psi_s),
        ))
        dw, last = conjugate_gradient(apply_h, rhs, x0=dw, maxiter=params.cg_iterations,
                                      rtol=params.cg_tolerance, precond=precond)
    if info is not None:
        info.update(last)
    return np.stack((dw[0], dw[1]), axis=2)


def solve_level(b1, b2, w_init, params: EnergyParams, history: Optional[List[float]] = None,
                info: Optional[dict] = None) -> np.ndarray:
    """Outer warping loop on one pyramid level.

    With ``params.backtracking > 0`` an increment that raises the energy is
    halved up to that many times; if no step lowers it the loop stops early,
    so the energy never increases.

    When ``history`` is given it receives the energy before the first and
    after every completed outer iteration. ``info`` receives the CG record of
    the last linear solve.
    """
    w = np.array(w_init, dtype=np.float64, copy=True)
    check = params.backtracking > 0
    energy = evaluate_energy(b1, b2, w, params) if (check or history is not None) else None
    if history is not None:
        history.append(energy)
    cg = {"iterations": 0, "residual": 0.0, "converged": True}
    for it in range(params.outer_iterations):
        cg = {}
        dw = assemble_and_solve_increment(b1, b2, w, params, cg)
        if params.median_filter:
            dw = np.stack([ndimage.median_filter(dw[..., c], size=3, mode="nearest") for c in range(2)], axis=2)
        if not np.all(np.isfinite(dw)):
            raise FloatingPointError("flow increment became non-finite")
        if check:
            step = 1.0
            for _ in range(params.backtracking + 1):
                trial = w + step * dw
                e_trial = evaluate_energy(b1, b2, trial, params)
                if e_trial <= energy:
                    break
                step *= 0.5
            else:
                log.debug("outer %d: no descent step, stopping", it)
                break
            w, energy = trial, e_trial
        else:
            w = w + dw
            if history is not None:
                energy = evaluate_energy(b1, b2, w, params)
        if history is not None:
            history.append(energy)
        log.debug("outer %d: cg residual %.3g after %d iterations", it, cg["residual"], cg["iterations"])
    if info is not None:
        info.update(cg)
    return w
