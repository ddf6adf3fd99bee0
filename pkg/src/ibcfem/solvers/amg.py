"""Smoothed aggregation AMG used as a GMRES preconditioner.

Setup: symmetric strength graph ``|a_ij| >= theta sqrt(|a_ii a_jj|)``,
greedy three-pass aggregation, piecewise-constant tentative prolongator,
one damped-Jacobi smoothing step, Galerkin coarse operators ``P^T A P``.
The cycle is V(1,1) with symmetric Gauss-Seidel and an exact dense solve on
the coarsest level.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

THETA = 0.08
JACOBI_WEIGHT = 2.0 / 3.0
MAX_COARSE = 64
MAX_LEVELS = 30


def strength_graph(A: sp.csr_matrix, theta: float = THETA) -> sp.csr_matrix:
    """Boolean symmetric pattern of strong off-diagonal couplings."""
    C = A.tocoo()
    d = np.abs(A.diagonal())
    off = (C.row != C.col) & (C.data != 0)
    r, c, v = C.row[off], C.col[off], np.abs(C.data[off])
    strong = v >= theta * np.sqrt(d[r] * d[c])
    n = A.shape[0]
    S = sp.csr_matrix((np.ones(strong.sum()), (r[strong], c[strong])), shape=(n, n))
    S = ((S + S.T) > 0).astype(np.int8).tocsr()
    S.sort_indices()
    return S


def aggregate(S: sp.csr_matrix, decoupled: Optional[np.ndarray] = None) -> np.ndarray:
    """Greedy aggregation; returns the aggregate index of every node.

    Nodes with no couplings at all (``decoupled``) are collected in one shared
    aggregate so they cannot pile up as singletons on every level.
    """
    n = S.shape[0]
    indptr, indices = S.indptr, S.indices
    agg = np.full(n, -1, dtype=np.int64)
    if decoupled is None:
        decoupled = np.zeros(n, dtype=bool)
    count = 0

    # pass 1: seed aggregates from nodes whose whole neighbourhood is free
    for i in range(n):
        if agg[i] >= 0 or decoupled[i]:
            continue
        nbrs = indices[indptr[i] : indptr[i + 1]]
        if len(nbrs) and np.all(agg[nbrs] < 0):
            agg[i] = count
            agg[nbrs] = count
            count += 1

    # pass 2: attach leftovers to a neighbouring aggregate from pass 1
    first = agg.copy()
    for i in range(n):
        if agg[i] >= 0 or decoupled[i]:
            continue
        nbrs = indices[indptr[i] : indptr[i + 1]]
        owners = first[nbrs]
        owners = owners[owners >= 0]
        if len(owners):
            agg[i] = owners[0]

    # pass 3: whatever is left starts its own aggregate with free neighbours
    for i in range(n):
        if agg[i] >= 0 or decoupled[i]:
            continue
        nbrs = indices[indptr[i] : indptr[i + 1]]
        agg[i] = count
        free = nbrs[agg[nbrs] < 0]
        agg[free[~decoupled[free]]] = count
        count += 1

    if decoupled.any():
        agg[decoupled] = count
        count += 1
    return agg


def tentative_prolongator(agg: np.ndarray) -> sp.csr_matrix:
    """Column-normalised piecewise constants (the constant near-nullspace)."""
    n = len(agg)
    nc = int(agg.max()) + 1
    sizes = np.bincount(agg, minlength=nc)
    vals = 1.0 / np.sqrt(sizes[agg])
    return sp.csr_matrix((vals, (np.arange(n), agg)), shape=(n, nc))


def smooth_prolongator(A: sp.csr_matrix, T: sp.csr_matrix, omega: float = JACOBI_WEIGHT) -> sp.csr_matrix:
    d = A.diagonal()
    dinv = np.divide(1.0, d, out=np.zeros_like(d), where=d != 0)
    P = (T - omega * (sp.diags(dinv) @ (A @ T))).tocsr()
    P.eliminate_zeros()
    P.sort_indices()
    return P


@dataclass
class AmgLevel:
    A: sp.csr_matrix
    aggregates: Optional[np.ndarray] = None
    T: Optional[sp.csr_matrix] = None
    P: Optional[sp.csr_matrix] = None
    R: Optional[sp.csr_matrix] = None
    lower: Optional[sp.csr_matrix] = None
    upper: Optional[sp.csr_matrix] = None
    skip: Optional[np.ndarray] = None


def _gs_factors(A: sp.csr_matrix):
    d = A.diagonal()
    skip = d == 0
    lower = sp.tril(A, format="csr")
    upper = sp.triu(A, format="csr")
    if skip.any():
        # rows with a zero diagonal are left untouched by the smoother
        keep = sp.diags((~skip).astype(float))
        fix = sp.diags(skip.astype(float))
        lower = (keep @ lower + fix).tocsr()
        upper = (keep @ upper + fix).tocsr()
    lower.sort_indices()
    upper.sort_indices()
    return lower, upper, skip


@dataclass
class AmgHierarchy:
    levels: list[AmgLevel]
    coarse_solver: object = None
    theta: float = THETA
    info: dict = field(default_factory=dict)

    @property
    def sizes(self) -> list[int]:
        return [lvl.A.shape[0] for lvl in self.levels]

    @property
    def grid_complexity(self) -> float:
        s = self.sizes
        return sum(s) / s[0]

    @property
    def operator_complexity(self) -> float:
        nnz = [lvl.A.nnz for lvl in self.levels]
        return sum(nnz) / nnz[0]

    def smooth(self, level: int, x: np.ndarray, b: np.ndarray, forward_first: bool = True) -> np.ndarray:
        lvl = self.levels[level]
        order = (lvl.lower, lvl.upper) if forward_first else (lvl.upper, lvl.lower)
        for M in order:
            r = b - lvl.A @ x
            if lvl.skip is not None and lvl.skip.any():
                r[lvl.skip] = 0.0
            x = x + spla.spsolve_triangular(M, r, lower=M is lvl.lower)
        return x

    def vcycle(self, b: np.ndarray, level: int = 0) -> np.ndarray:
        """One V(1,1) cycle from a zero initial guess; a fixed linear map of ``b``."""
        if level == len(self.levels) - 1:
            return self.coarse_solver(b)
        lvl = self.levels[level]
        x = self.smooth(level, np.zeros_like(b), b, forward_first=True)
        rc = lvl.R @ (b - lvl.A @ x)
        x = x + lvl.P @ self.vcycle(rc, level + 1)
        return self.smooth(level, x, b, forward_first=False)

    __call__ = vcycle

    def solve(self, b: np.ndarray, x0=None, cycles: int = 1) -> np.ndarray:
        """Stationary iteration ``x <- x + vcycle(b - A x)``."""
        A = self.levels[0].A
        x = np.zeros_like(b) if x0 is None else x0.copy()
        for _ in range(cycles):
            x = x + self.vcycle(b - A @ x)
        return x


def _dense_solver(A: sp.csr_matrix):
    D = A.toarray()
    if not D.size:
        return lambda b: b.copy()
    if np.count_nonzero(D - np.diag(np.diag(D))) == 0 and np.all(np.diag(D) != 0):
        d = np.diag(D).copy()
        return lambda b: b / d
    lu, piv = sla.lu_factor(D)
    if np.min(np.abs(np.diag(lu))) <= 1e-14 * np.max(np.abs(np.diag(lu))):
        pinv = np.linalg.pinv(D)
        return lambda b: pinv @ b
    return lambda b: sla.lu_solve((lu, piv), b)


def amg_setup(
    A,
    theta: float = THETA,
    omega: float = JACOBI_WEIGHT,
    max_coarse: int = MAX_COARSE,
    max_levels: int = MAX_LEVELS,
) -> AmgHierarchy:
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"AMG needs a square matrix, got {A.shape}")
    A.sort_indices()
    levels: list[AmgLevel] = []
    while True:
        n = A.shape[0]
        offdiag = A - sp.diags(A.diagonal())
        offdiag.eliminate_zeros()
        if n <= max_coarse or offdiag.nnz == 0 or len(levels) + 1 >= max_levels:
            levels.append(AmgLevel(A=A))
            break
        S = strength_graph(A, theta)
        touched = np.diff(offdiag.indptr) + np.diff(offdiag.tocsc().indptr)
        agg = aggregate(S, decoupled=touched == 0)
        T = tentative_prolongator(agg)
        if T.shape[1] >= n:
            levels.append(AmgLevel(A=A))
            break
        P = smooth_prolongator(A, T, omega)
        R = P.T.tocsr()
        lower, upper, skip = _gs_factors(A)
        levels.append(AmgLevel(A=A, aggregates=agg, T=T, P=P, R=R, lower=lower, upper=upper, skip=skip))
        A = (R @ A @ P).tocsr()
        A.sort_indices()
    hier = AmgHierarchy(levels=levels, coarse_solver=_dense_solver(levels[-1].A), theta=theta)
    hier.info = {"sizes": hier.sizes, "grid_complexity": hier.grid_complexity}
    return hier


def amg_vcycle(hier: AmgHierarchy, r: np.ndarray) -> np.ndarray:
    return hier.vcycle(np.asarray(r, dtype=float))


class WoodburyPreconditioner:
    """Approximate ``(A + u v^T)^{-1}`` from a V-cycle for ``A``.

    Sherman-Morrison with ``A^{-1}`` replaced by one V-cycle:
    ``z = B r - B u (v . B r) / (1 + v . B u)``. If the denominator is below
    ``guard`` in magnitude the correction is dropped and ``flags`` records it.
    """

    def __init__(self, hier: AmgHierarchy, rank_one, guard: float = 1e-12):
        self.hier = hier
        self.flags: list[str] = []
        self.u, self.v = rank_one
        self.zu = hier.vcycle(self.u)
        self.denom = 1.0 + self.v @ self.zu
        self.active = abs(self.denom) >= guard and np.any(self.u)
        if not abs(self.denom) >= guard:
            self.flags.append("woodbury_guard")

    def __call__(self, r: np.ndarray) -> np.ndarray:
        z = self.hier.vcycle(r)
        if self.active:
            z = z - self.zu * ((self.v @ z) / self.denom)
        return z


def woodbury_preconditioner(hier: AmgHierarchy, rank_one, guard: float = 1e-12) -> WoodburyPreconditioner:
    return WoodburyPreconditioner(hier, rank_one, guard)
