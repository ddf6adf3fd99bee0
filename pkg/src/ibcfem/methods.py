"""Discrete systems for the electrode condition phi = V - R int sigma dphi/dn.

Two discretizations are provided:

* the modified Nitsche method, which replaces the condition by the Robin-type
  relation ``phi + eps dphi/dn = V - R I`` and eliminates ``I`` analytically.
  The result is the stiffness matrix plus a ``1/eps`` boundary mass and a
  rank-one nonlocal coupling (:func:`build_nitsche_system`), or the same
  problem with the coupling carried by an auxiliary scalar
  (:func:`build_nitsche_bordered`);
* the Lagrange multiplier method with a multiplier on the electrode and an
  auxiliary scalar for the current (:func:`build_lagrange_system`).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .assembly import (
    AssembledSystem,
    apply_dirichlet,
    assemble_gamma1_mass,
    assemble_gamma1_vector,
    assemble_load,
    assemble_normal_derivative_vector,
    assemble_stiffness,
    build_dofmap,
    evaluate,
    gamma1_integral,
)
from .mesh import Mesh
from .problems import ProblemError, ProblemSpec
from .quadrature import DEFAULT_RULES, QuadratureRules

DEFAULT_EPSILON = 1e-9


def _check_inputs(spec: ProblemSpec, mesh: Mesh, quad: QuadratureRules, eps=None):
    if eps is not None and not eps > 0:
        raise ProblemError(f"epsilon must be positive, got {eps!r}")
    idx = mesh.edge_indices("Gamma1")
    p = mesh.vertices[mesh.edge_vertices[idx]]
    t = quad.edge_points
    pts = (1 - t)[None, :, None] * p[:, None, 0] + t[None, :, None] * p[:, None, 1]
    s = evaluate(spec.sigma, pts[..., 0], pts[..., 1])
    if np.any(s <= 0):
        raise ProblemError("conductivity must be positive on the electrode")


def _nitsche_parts(
    spec: ProblemSpec, mesh: Mesh, eps: float, quad: QuadratureRules, literal: bool = False
):
    _check_inputs(spec, mesh, quad, eps)
    K = assemble_stiffness(mesh)
    M = assemble_gamma1_mass(mesh, None, quad)
    c = assemble_gamma1_vector(mesh, None, quad)
    s = assemble_gamma1_vector(mesh, spec.sigma, quad)
    S = gamma1_integral(mesh, spec.sigma, quad)
    kappa = spec.R / (spec.R * S + eps)
    if literal:
        # cancels catastrophically once eps approaches S * machine epsilon
        boundary_rhs = (spec.V - kappa * S * spec.V) / eps
    else:
        # (1/eps) * (V - kappa * S * V) simplifies to V / (R S + eps)
        boundary_rhs = spec.V / (spec.R * S + eps)
    rhs = assemble_load(mesh, spec.f, quad) + boundary_rhs * c
    A = (K + M / eps).tocsr()
    A.sort_indices()
    u = -(kappa / eps) * c
    info = {"eps": eps, "sigma_integral": S, "kappa": kappa, "literal": literal}
    return A, u, s, rhs, info


def build_nitsche_system(
    spec: ProblemSpec,
    mesh: Mesh,
    eps: float = DEFAULT_EPSILON,
    quad: QuadratureRules = DEFAULT_RULES,
    literal: bool = False,
) -> AssembledSystem:
    """Modified Nitsche system with the nonlocal term kept as a rank-one update.

    The operator is ``K + M/eps + u v^T`` with ``u = -R/(eps (R S + eps)) c``
    and ``v = s``, where ``c`` and ``s`` are the unweighted and sigma-weighted
    electrode vectors and ``S = int sigma ds``. All scalar factors sit in
    ``u`` so the bordered system can reuse the identical vector.
    ``literal`` selects the unsimplified right-hand side, as in
    :func:`build_nitsche_bordered`.
    """
    A, u, s, rhs, info = _nitsche_parts(spec, mesh, eps, quad, literal)
    system = AssembledSystem(
        matrix=A,
        rhs=rhs,
        dofmap=build_dofmap(mesh, spec.phi_d),
        rank_one=(u, s),
        layout="phi_only",
        info=info,
    )
    return apply_dirichlet(system)


def build_nitsche_bordered(
    spec: ProblemSpec,
    mesh: Mesh,
    eps: float = DEFAULT_EPSILON,
    quad: QuadratureRules = DEFAULT_RULES,
    literal: bool = False,
) -> AssembledSystem:
    """Nitsche system with the auxiliary scalar ``w = int sigma phi ds`` appended.

    The last row enforces ``int (w - |Gamma1| sigma phi) ds = 0``. By default
    it is stored divided by ``|Gamma1|`` as ``w - s . phi = 0``: a rounded
    ``|Gamma1|`` would otherwise perturb ``w`` by one ulp, which the ``1/eps``
    coupling amplifies to ~1e-7.

    ``literal=True`` keeps the undivided row and the unsimplified electrode
    right-hand side ``(V - kappa S V) / eps``. That is the floating-point
    behaviour behind the accuracy loss at very small ``eps``; use it with an
    unrefined direct solve to study that loss.
    """
    A, u, s, rhs, info = _nitsche_parts(spec, mesh, eps, quad, literal)
    if literal:
        length = gamma1_integral(mesh, None, quad)
        s, corner = length * s, length
    else:
        corner = 1.0
    nv = mesh.num_vertices
    col = sp.csr_matrix(u[:, None])
    row = sp.csr_matrix(-s[None, :])
    big = sp.bmat([[A, col], [row, sp.csr_matrix([[corner]])]], format="csr")
    big.eliminate_zeros()
    big.sort_indices()
    system = AssembledSystem(
        matrix=big,
        rhs=np.append(rhs, 0.0),
        dofmap=build_dofmap(mesh, spec.phi_d),
        layout="phi_lambda_w",
        n_phi=nv,
        n_lambda=0,
        n_w=1,
        info=info,
    )
    return apply_dirichlet(system)


def build_lagrange_system(
    spec: ProblemSpec, mesh: Mesh, quad: QuadratureRules = DEFAULT_RULES, verbatim: bool = False
) -> AssembledSystem:
    """Lagrange multiplier system with unknowns ``[phi, lambda, w]``.

    ``lambda`` is continuous P1 on the electrode vertices and ``w`` the
    auxiliary current. Row groups (by test function):

    * potential:  ``K phi + M^T lambda = load``
    * multiplier: ``M phi + R c w = V c``
    * scalar:     ``|Gamma1| w - |Gamma1| g^T phi = 0``

    where ``M`` is the electrode mass between multiplier and potential bases
    and ``g`` the sigma-weighted normal-derivative functional.

    ``verbatim=True`` adds the ``w``-stationarity term ``R c^T lambda`` to the
    scalar row, folding two conditions into one equation. The resulting
    discrete solution does not converge to the exact one, so it is kept only
    for comparison.
    """
    _check_inputs(spec, mesh, quad)
    nv = mesh.num_vertices
    gamma1 = mesh.tagged_vertices("Gamma1")
    nl = len(gamma1)
    K = assemble_stiffness(mesh)
    M = assemble_gamma1_mass(mesh, None, quad)[gamma1, :]  # (nl, nv)
    c = assemble_gamma1_vector(mesh, None, quad)[gamma1]
    g = assemble_normal_derivative_vector(mesh, spec.sigma, quad)
    length = gamma1_integral(mesh, None, quad)
    R = spec.R

    big = sp.bmat(
        [
            [K, M.T, None],
            [M, None, sp.csr_matrix(R * c[:, None])],
            [sp.csr_matrix(-length * g[None, :]), sp.csr_matrix(R * c[None, :]) if verbatim else None, sp.csr_matrix([[length]])],
        ],
        format="csr",
    )
    big.eliminate_zeros()
    big.sort_indices()
    rhs = np.concatenate([assemble_load(mesh, spec.f, quad), spec.V * c, [0.0]])
    system = AssembledSystem(
        matrix=big,
        rhs=rhs,
        dofmap=build_dofmap(mesh, spec.phi_d),
        layout="phi_lambda_w",
        n_phi=nv,
        n_lambda=nl,
        n_w=1,
        info={"gamma1_vertices": gamma1, "verbatim": verbatim},
    )
    return apply_dirichlet(system)


def reconstruct_current(
    phi: np.ndarray, spec: ProblemSpec, mesh: Mesh, eps: float = DEFAULT_EPSILON, quad: QuadratureRules = DEFAULT_RULES
) -> float:
    """Electrode current ``(int sigma (V - phi) ds) / (R S + eps)``."""
    s = assemble_gamma1_vector(mesh, spec.sigma, quad)
    S = gamma1_integral(mesh, spec.sigma, quad)
    return float((spec.V * S - s @ phi[: mesh.num_vertices]) / (spec.R * S + eps))


def gamma1_trace_stats(phi: np.ndarray, mesh: Mesh, quad: QuadratureRules = DEFAULT_RULES) -> dict:
    nodes = mesh.tagged_vertices("Gamma1")
    trace = phi[nodes]
    c = assemble_gamma1_vector(mesh, None, quad)
    mean = float(c @ phi[: mesh.num_vertices] / gamma1_integral(mesh, None, quad))
    return {"mean": mean, "min": float(trace.min()), "max": float(trace.max())}
