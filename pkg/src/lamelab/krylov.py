"""Matrix-free conjugate gradients for the SPD solves used by the steppers."""

from __future__ import annotations

from typing import Callable

import numpy as np


class SolverFailureError(RuntimeError):
    """An inner linear solve did not reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def conjugate_gradient(
    matvec: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    x0: np.ndarray | None = None,
    rtol: float = 1e-10,
    maxiter: int = 1000,
) -> np.ndarray:
    """Solve A x = rhs for symmetric positive definite A to a relative residual.

    Convergence criterion: ||rhs - A x|| <= rtol * ||rhs|| (absolute floor of
    rtol when rhs vanishes).  Raises SolverFailureError if maxiter is hit.
    """
    rhs = np.asarray(rhs, dtype=float)
    bnorm = float(np.linalg.norm(rhs))
    target = rtol * max(bnorm, 1e-300)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - matvec(x)
    rnorm = float(np.linalg.norm(r))
    if rnorm <= target:
        return x
    p = r.copy()
    rs = rnorm * rnorm
    for _ in range(maxiter):
        ap = matvec(p)
        denom = float(p @ ap)
        if denom <= 0.0:
            raise SolverFailureError(
                f"conjugate gradients hit a non-positive curvature direction ({denom})",
                residual=rnorm / max(bnorm, 1e-300),
            )
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        rnorm = np.sqrt(rs_new)
        if rnorm <= target:
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverFailureError(
        f"conjugate gradients did not converge in {maxiter} iterations "
        f"(relative residual {rnorm / max(bnorm, 1e-300):.3e})",
        residual=rnorm / max(bnorm, 1e-300),
    )
