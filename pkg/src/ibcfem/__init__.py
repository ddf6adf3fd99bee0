"""P1 finite elements for the Poisson equation with an integral electrode condition.

The electrode on ``x = 0`` satisfies ``phi = V - R int sigma dphi/dn ds``
(a voltage source behind a series resistor). Two discretizations are
available, a modified Nitsche method and a Lagrange multiplier method,
together with a direct solver and GMRES with an algebraic multigrid
preconditioner.
"""
from .analysis import ConvergenceReport, ConvergenceRow, check_spd, convergence_order
from .analysis import h1_seminorm_error, l2_error_domain, l2_error_gamma1
from .assembly import AssembledSystem, apply_dirichlet, reduced_operator
from .mesh import GAMMA1, GAMMA2, GAMMA3, Mesh, MeshError, build_unit_square_mesh
from .methods import (
    DEFAULT_EPSILON,
    build_lagrange_system,
    build_nitsche_bordered,
    build_nitsche_system,
    gamma1_trace_stats,
    reconstruct_current,
)
from .problems import ManufacturedProblem, ProblemError, ProblemSpec, builtin_problems
from .solvers import direct_solve, gmres, solve_system

__version__ = "0.1.0"
