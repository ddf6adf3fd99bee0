"""Sparse LU solve for assembled systems, rank-one term by Sherman-Morrison."""
from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla


class SingularSystemError(RuntimeError):
    def __init__(self, message: str, pivot: float):
        super().__init__(f"{message} (smallest pivot magnitude {pivot:.3e})")
        self.pivot = pivot


def _factorize(A):
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse LU failed: {exc}", 0.0) from None
    pivots = np.abs(lu.U.diagonal())
    pmin = float(pivots.min()) if len(pivots) else 0.0
    if pmin == 0.0 or not np.all(np.isfinite(pivots)):
        raise SingularSystemError("matrix is singular to working precision", pmin)
    return lu


def _extended(system):
    """Residual function evaluated in extended precision, if the platform has it."""
    if np.finfo(np.longdouble).eps >= np.finfo(np.float64).eps:
        return None
    A = system.matrix.astype(np.longdouble)
    b = system.rhs.astype(np.longdouble)
    if system.rank_one is None:
        return lambda x: np.asarray(b - A @ x.astype(np.longdouble), dtype=float)
    u, v = (a.astype(np.longdouble) for a in system.rank_one)

    def residual(x):
        xl = x.astype(np.longdouble)
        return np.asarray(b - A @ xl - u * (v @ xl), dtype=float)

    return residual


def direct_solve(system, refine_steps: int = 3) -> np.ndarray:
    """Solve ``(matrix + u v^T) x = rhs``.

    The sparse part is factored once and the rank-one update folded in with
    Sherman-Morrison. The answer is polished by ``refine_steps`` rounds of
    iterative refinement with residuals in extended precision, which
    recovers the digits the ``1/eps`` scaling of the Nitsche systems costs.
    """
    lu = _factorize(system.matrix)
    rank_one = system.rank_one
    if rank_one is not None:
        u, v = rank_one
        zu = lu.solve(u)
        denom = 1.0 + v @ zu
        if denom == 0.0 or not np.isfinite(denom):
            raise SingularSystemError("rank-one update makes the operator singular", abs(denom))

    def inner(b):
        x = lu.solve(b)
        if rank_one is not None:
            x = x - zu * ((v @ x) / denom)
        return x

    residual = _extended(system) or system.residual
    x = inner(system.rhs)
    for _ in range(refine_steps):
        x = x + inner(residual(x))
    return x


def backward_error(system, x: np.ndarray) -> float:
    """Normwise backward error ``||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf)``."""
    r = system.residual(x)
    anorm = abs(system.matrix).sum(axis=1).max()
    if system.rank_one is not None:
        u, v = system.rank_one
        anorm += np.abs(u).max() * np.abs(v).sum()
    return float(np.abs(r).max() / (anorm * np.abs(x).max() + np.abs(system.rhs).max()))
