"""Matrix-free (preconditioned) conjugate gradients on array-shaped unknowns."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg


def conjugate_gradient(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    maxiter: int = 45,
    rtol: float = 1e-4,
    precond: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    callback: Optional[Callable[[np.ndarray], None]] = None,
):
    """Solve ``A x = b`` for symmetric positive (semi-)definite ``A``.

    Wraps :func:`scipy.sparse.linalg.cg`. ``apply_a`` and ``precond`` act on
    arrays shaped like ``b``; ``callback`` receives the iterate in that shape.
    Stops when ``||r|| <= rtol * ||b||`` or after ``maxiter`` iterations.

    Returns
    -------
    x : ndarray
    info : dict
        ``iterations``, ``residual`` (relative), ``converged``.
    """
    b = np.asarray(b, dtype=np.float64)
    shape, n = b.shape, b.size
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), {"iterations": 0, "residual": 0.0, "converged": True}

    def flat(fn):
        return lambda v: np.asarray(fn(v.reshape(shape)), dtype=np.float64).ravel()

    op = LinearOperator((n, n), matvec=flat(apply_a), dtype=np.float64)
    m = LinearOperator((n, n), matvec=flat(precond), dtype=np.float64) if precond is not None else None
    count = [0]

    def track(xk):
        count[0] += 1
        if callback is not None:
            callback(xk.reshape(shape))

    start = None if x0 is None else np.asarray(x0, dtype=np.float64).ravel()
    x, _ = cg(op, b.ravel(), x0=start, rtol=rtol, atol=0.0, maxiter=maxiter, M=m, callback=track)
    x = x.reshape(shape)
    rel = float(np.linalg.norm(b - apply_a(x))) / bnorm
    return x, {"iterations": count[0], "residual": rel, "converged": bool(rel <= rtol)}
