"""Restarted, right-preconditioned GMRES with a true-residual stopping test."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass
class SolveStats:
    iterations: int
    residual: float
    converged: bool
    seconds: float = 0.0
    restarts: int = 0
    history: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    reason: str = ""


def _as_matvec(op) -> Callable[[np.ndarray], np.ndarray]:
    if callable(op) and not hasattr(op, "shape"):
        return op
    return lambda x: op @ x


def gmres(
    op,
    b: np.ndarray,
    precond: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    tol_abs: float = 1e-7,
    restart: int = 30,
    max_iter: int = 1000,
    x0: Optional[np.ndarray] = None,
    stall_cycles: int = 3,
    stall_reduction: float = 1e-3,
    extended: bool = True,
) -> tuple[np.ndarray, SolveStats]:
    """Solve ``op x = b``.

    ``op`` is anything supporting ``@`` or a plain callable.
    ``precond`` approximates the inverse and is applied on the right, so the
    Arnoldi residual is the unpreconditioned one. Convergence is declared
    only when the recomputed residual ``||b - op x||`` drops below
    ``tol_abs``. The solve stops unconverged after ``max_iter`` Krylov steps
    or after ``stall_cycles`` consecutive restarts that each reduce the true
    residual by less than the fraction ``stall_reduction``. A restart that
    would raise the true residual (possible only at the roundoff floor) is
    discarded and counts as a stalled cycle, so ``stats.history`` is
    nonincreasing.

    With ``extended=True`` (and a platform long double wider than float64)
    the iterate and the restart residuals are carried in long double while
    the Arnoldi process stays in double. This is iterative refinement with a
    GMRES inner solver; it matters for the ``1/eps``-scaled Nitsche systems,
    whose double-precision residual floor is around 1e-8.
    """
    t0 = time.perf_counter()
    n = len(b)
    A = _as_matvec(op)
    M = precond if precond is not None else (lambda r: r)
    wide = np.longdouble if extended and np.finfo(np.longdouble).eps < np.finfo(float).eps else np.float64
    b_wide = np.asarray(b, dtype=wide)
    x = np.zeros(n, dtype=wide) if x0 is None else np.array(x0, dtype=wide)

    def true_residual(x):
        return np.asarray(b_wide - A(x), dtype=float)

    r = true_residual(x)
    beta = np.linalg.norm(r)
    stats = SolveStats(iterations=0, residual=beta, converged=False, history=[beta])
    if beta < tol_abs:
        stats.converged = True
        stats.seconds = time.perf_counter() - t0
        return np.asarray(x, dtype=float), stats

    m = max(1, min(restart, n))
    stalled = 0
    while stats.iterations < max_iter:
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        for j in range(m):
            Z[j] = M(V[j])
            w = A(Z[j])
            # modified Gram-Schmidt with one reorthogonalisation pass
            for _ in range(2):
                for i in range(j + 1):
                    hij = V[i] @ w
                    H[i, j] += hij
                    w -= hij * V[i]
            h_next = np.linalg.norm(w)
            H[j + 1, j] = h_next
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], h_next)
            if denom == 0.0 or not np.isfinite(denom):
                break
            cs[j] = H[j, j] / denom
            sn[j] = h_next / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            stats.iterations += 1
            if abs(g[j + 1]) < tol_abs or stats.iterations >= max_iter or h_next == 0.0:
                break
            V[j + 1] = w / h_next
        if k == 0:
            stats.reason = "breakdown"
            break
        y = _back_substitute(H[:k, :k], g[:k])
        x_new = x + (y @ Z[:k]).astype(wide)
        r_new = true_residual(x_new)
        new_beta = np.linalg.norm(r_new)
        stats.restarts += 1
        if not np.isfinite(new_beta):
            stats.history.append(new_beta)
            beta = new_beta
            stats.reason = "non-finite residual"
            break
        if new_beta > beta:
            # roundoff floor: keep the better iterate, count a stalled cycle
            stats.history.append(beta)
            stalled += 1
            if stalled >= stall_cycles:
                stats.reason = "stagnation"
                break
            continue
        x, r = x_new, r_new
        stats.history.append(new_beta)
        if new_beta < tol_abs:
            beta = new_beta
            stats.converged = True
            break
        if (beta - new_beta) < stall_reduction * beta:
            stalled += 1
            if stalled >= stall_cycles:
                beta = new_beta
                stats.reason = "stagnation"
                break
        else:
            stalled = 0
        beta = new_beta
    if not stats.converged and not stats.reason:
        stats.reason = "max_iter"
    stats.residual = float(beta)
    stats.flags = list(getattr(precond, "flags", []))
    stats.seconds = time.perf_counter() - t0
    return np.asarray(x, dtype=float), stats


def _back_substitute(R: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        if R[i, i] == 0.0:
            y[i] = 0.0
            continue
        y[i] = (g[i] - R[i, i + 1 :] @ y[i + 1 :]) / R[i, i]
    return y
