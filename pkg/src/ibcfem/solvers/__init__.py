"""Linear solvers for the assembled systems."""
from __future__ import annotations

import time

import numpy as np

from .amg import AmgHierarchy, WoodburyPreconditioner, amg_setup, amg_vcycle, woodbury_preconditioner
from .direct import SingularSystemError, backward_error, direct_solve
from .gmres import SolveStats, gmres
from .operators import LinearOperator, read_matrix_market, spmv, write_matrix_market

SOLVERS = ("direct", "gmres-amg")

# accepted normwise backward error for a direct solve
DIRECT_TOLERANCE = 1e-10


def solve_system(
    system,
    solver: str = "direct",
    tol: float = 1e-7,
    restart: int = 30,
    max_iter: int = 1000,
    refine_steps: int = 3,
) -> tuple[np.ndarray, SolveStats]:
    """Solve an :class:`~ibcfem.assembly.AssembledSystem` and report how it went.

    ``direct``: sparse LU (see :func:`direct_solve`); ``converged`` means the
    normwise backward error is below ``DIRECT_TOLERANCE`` and ``residual``
    holds that backward error.

    ``gmres-amg``: GMRES preconditioned by one smoothed-aggregation V-cycle
    built on the sparse part, with the Sherman-Morrison correction when the
    system carries a rank-one term.
    """
    if solver == "direct":
        t0 = time.perf_counter()
        x = direct_solve(system, refine_steps=refine_steps)
        be = backward_error(system, x)
        stats = SolveStats(
            iterations=0,
            residual=be,
            converged=bool(be <= DIRECT_TOLERANCE),
            seconds=time.perf_counter() - t0,
            reason="" if be <= DIRECT_TOLERANCE else "backward error above tolerance",
        )
        return x, stats
    if solver == "gmres-amg":
        t0 = time.perf_counter()
        hier = amg_setup(system.matrix)
        if system.rank_one is not None:
            precond = woodbury_preconditioner(hier, system.rank_one)
        else:
            precond = hier
        x, stats = gmres(LinearOperator.from_system(system), system.rhs, precond, tol, restart, max_iter)
        stats.seconds = time.perf_counter() - t0
        return x, stats
    raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")


__all__ = [
    "AmgHierarchy",
    "DIRECT_TOLERANCE",
    "LinearOperator",
    "SOLVERS",
    "SingularSystemError",
    "SolveStats",
    "WoodburyPreconditioner",
    "amg_setup",
    "amg_vcycle",
    "backward_error",
    "direct_solve",
    "gmres",
    "read_matrix_market",
    "solve_system",
    "spmv",
    "woodbury_preconditioner",
    "write_matrix_market",
]
