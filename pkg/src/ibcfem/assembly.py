"""P1 finite element assembly on :class:`~ibcfem.mesh.Mesh`.

Sparse matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted,
duplicate-free column indices). Scalar fields are callables ``f(x, y)``
accepting numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .mesh import GAMMA1, GAMMA3, Mesh, MeshError
from .quadrature import DEFAULT_RULES, QuadratureRules

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]


class DegenerateElementError(ValueError):
    pass


def evaluate(f: ScalarField, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.broadcast_to(np.asarray(f(x, y), dtype=float), np.broadcast(x, y).shape)


def csr(rows, cols, vals, shape) -> sp.csr_matrix:
    A = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def p1_gradients(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric gradients and signed areas for triangles.

    ``coords`` has shape (..., 3, 2). Returns gradients of shape (..., 3, 2)
    and signed areas of shape (...).
    """
    p0, p1, p2 = coords[..., 0, :], coords[..., 1, :], coords[..., 2, :]
    d1 = p1 - p0
    d2 = p2 - p0
    det = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    if np.any(det == 0.0):
        raise DegenerateElementError("zero-area triangle")
    # rotate opposite edges by +90 degrees and divide by 2*area
    e0 = p2 - p1
    e1 = p0 - p2
    e2 = p1 - p0
    edges = np.stack([e0, e1, e2], axis=-2)
    grads = np.stack([-edges[..., 1], edges[..., 0]], axis=-1) / det[..., None, None]
    return grads, 0.5 * det


def element_stiffness(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    grads, area = p1_gradients(coords)
    return abs(area) * grads @ grads.T


def _mesh_gradients(mesh: Mesh):
    cache = mesh._cache
    if "grads" not in cache:
        cache["grads"] = p1_gradients(mesh.vertices[mesh.triangles])
    return cache["grads"]


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    grads, area = _mesh_gradients(mesh)
    Ke = np.abs(area)[:, None, None] * np.einsum("kid,kjd->kij", grads, grads)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    nv = mesh.num_vertices
    return csr(rows, cols, Ke.ravel(), (nv, nv))


def _triangle_points(mesh: Mesh, quad: QuadratureRules):
    coords = mesh.vertices[mesh.triangles]  # (M, 3, 2)
    pts = np.einsum("qi,kid->kqd", quad.tri_bary, coords)
    _, area = _mesh_gradients(mesh)
    w = 2.0 * np.abs(area)[:, None] * quad.tri_weights[None, :]
    return pts, w


def assemble_load(mesh: Mesh, f: ScalarField, quad: QuadratureRules = DEFAULT_RULES) -> np.ndarray:
    pts, w = _triangle_points(mesh, quad)
    fq = evaluate(f, pts[..., 0], pts[..., 1]) * w  # (M, Q)
    contrib = fq @ quad.tri_bary  # (M, 3)
    return np.bincount(mesh.triangles.ravel(), contrib.ravel(), minlength=mesh.num_vertices)


def _edge_points(mesh: Mesh, tag: str, quad: QuadratureRules):
    idx = mesh.edge_indices(tag)
    ev = mesh.edge_vertices[idx]
    p = mesh.vertices[ev]  # (E, 2, 2)
    t = quad.edge_points
    shape = np.column_stack([1.0 - t, t])  # (Q, 2)
    pts = np.einsum("qa,ead->eqd", shape, p)
    w = mesh.edge_lengths[idx][:, None] * quad.edge_weights[None, :]
    return idx, ev, shape, pts, w


def assemble_gamma1_mass(
    mesh: Mesh, weight: Optional[ScalarField] = None, quad: QuadratureRules = DEFAULT_RULES
) -> sp.csr_matrix:
    """Boundary mass matrix ``M_ij = int_{Gamma1} w phi_i phi_j ds`` (w = 1 if None)."""
    _, ev, shape, pts, w = _edge_points(mesh, GAMMA1, quad)
    if weight is not None:
        w = w * evaluate(weight, pts[..., 0], pts[..., 1])
    Me = np.einsum("eq,qa,qb->eab", w, shape, shape)
    rows = np.repeat(ev, 2, axis=1).ravel()
    cols = np.tile(ev, (1, 2)).ravel()
    nv = mesh.num_vertices
    return csr(rows, cols, Me.ravel(), (nv, nv))


def assemble_gamma1_vector(
    mesh: Mesh, weight: Optional[ScalarField] = None, quad: QuadratureRules = DEFAULT_RULES
) -> np.ndarray:
    """Coefficient vector of ``v -> int_{Gamma1} w v ds``."""
    _, ev, shape, pts, w = _edge_points(mesh, GAMMA1, quad)
    if weight is not None:
        w = w * evaluate(weight, pts[..., 0], pts[..., 1])
    contrib = w @ shape
    return np.bincount(ev.ravel(), contrib.ravel(), minlength=mesh.num_vertices)


def gamma1_integral(mesh: Mesh, weight: Optional[ScalarField] = None, quad: QuadratureRules = DEFAULT_RULES) -> float:
    """``int_{Gamma1} w ds`` with the edge rule."""
    _, _, _, pts, w = _edge_points(mesh, GAMMA1, quad)
    if weight is not None:
        w = w * evaluate(weight, pts[..., 0], pts[..., 1])
    return float(w.sum())


def assemble_normal_derivative_vector(
    mesh: Mesh, sigma: Optional[ScalarField] = None, quad: QuadratureRules = DEFAULT_RULES
) -> np.ndarray:
    """Vector ``g`` with ``g @ phi = int_{Gamma1} sigma dphi_h/dn ds``.

    The normal derivative on each edge is the constant gradient of its owner
    triangle, so ``g`` touches all three vertices of every owner.
    """
    idx, _, _, pts, w = _edge_points(mesh, GAMMA1, quad)
    owner = mesh.edge_owner[idx]
    if np.any(owner < 0) or np.any(owner >= mesh.num_triangles):
        raise MeshError("Gamma1 edge without a valid owner triangle")
    if sigma is not None:
        w = w * evaluate(sigma, pts[..., 0], pts[..., 1])
    grads, _ = _mesh_gradients(mesh)
    dn = np.einsum("eid,ed->ei", grads[owner], mesh.edge_normals[idx])  # (E, 3)
    contrib = w.sum(axis=1)[:, None] * dn
    return np.bincount(mesh.triangles[owner].ravel(), contrib.ravel(), minlength=mesh.num_vertices)


@dataclass
class DofMap:
    """Dirichlet bookkeeping for the potential unknowns.

    ``dirichlet`` is a boolean mask over vertices and ``values`` holds the
    prescribed potential there (zero elsewhere).
    """

    dirichlet: np.ndarray
    values: np.ndarray
    gamma1: np.ndarray

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet)

    @property
    def constrained(self) -> np.ndarray:
        return np.flatnonzero(self.dirichlet)


def build_dofmap(mesh: Mesh, phi_d: ScalarField) -> DofMap:
    nodes = mesh.tagged_vertices(GAMMA3)
    mask = np.zeros(mesh.num_vertices, dtype=bool)
    mask[nodes] = True
    values = np.zeros(mesh.num_vertices)
    xy = mesh.vertices[nodes]
    values[nodes] = evaluate(phi_d, xy[:, 0], xy[:, 1])
    return DofMap(dirichlet=mask, values=values, gamma1=mesh.tagged_vertices(GAMMA1))


@dataclass
class AssembledSystem:
    """Discrete system ``(matrix + u v^T) x = rhs``.

    ``layout`` is ``"phi_only"`` (unknowns are vertex potentials) or
    ``"phi_lambda_w"`` (potentials, then ``n_lambda`` multiplier values on
    Gamma1 vertices, then ``n_w`` auxiliary scalars). Dirichlet constraints
    apply to the first ``n_phi`` unknowns only.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    rank_one: Optional[tuple[np.ndarray, np.ndarray]] = None
    layout: str = "phi_only"
    n_phi: int = 0
    n_lambda: int = 0
    n_w: int = 0
    constrained: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.n_phi:
            self.n_phi = self.matrix.shape[0] - self.n_lambda - self.n_w
        if self.matrix.shape[0] != len(self.rhs):
            raise ValueError("operator and right-hand side sizes differ")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.matrix @ x
        if self.rank_one is not None:
            u, v = self.rank_one
            y = y + u * (v @ x)
        return y

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.rhs - self.matvec(x)

    def phi(self, x: np.ndarray) -> np.ndarray:
        return x[: self.n_phi]


def apply_dirichlet(system: AssembledSystem, dofmap: Optional[DofMap] = None) -> AssembledSystem:
    """Symmetric elimination of the potential Dirichlet values.

    Constrained columns move to the right-hand side, constrained rows and
    columns become identity rows with the prescribed value, and the rank-one
    vectors are zeroed on constrained entries.
    """
    dofmap = dofmap or system.dofmap
    N = system.size
    idx = dofmap.constrained
    g = np.zeros(N)
    g[idx] = dofmap.values[idx]

    A = system.matrix
    rhs = system.rhs - A @ g
    rank_one = None
    if system.rank_one is not None:
        u, v = (np.array(a, dtype=float) for a in system.rank_one)
        rhs = rhs - u * (v @ g)
        u[idx] = 0.0
        v[idx] = 0.0
        rank_one = (u, v)

    keep = np.ones(N)
    keep[idx] = 0.0
    D = sp.diags(keep)
    A = (D @ A @ D).tocsr()
    A = A + sp.csr_matrix((np.ones(len(idx)), (idx, idx)), shape=(N, N))
    A.eliminate_zeros()
    A.sort_indices()
    rhs[idx] = g[idx]
    return replace(system, matrix=A.tocsr(), rhs=rhs, rank_one=rank_one, dofmap=dofmap, constrained=True)


def reduced_operator(system: AssembledSystem) -> sp.csr_matrix:
    """Operator restricted to the free unknowns, rank-one term made explicit.

    The rank-one factors are usually supported on a handful of electrode
    vertices, so the explicit outer product stays sparse.
    """
    free = np.ones(system.size, dtype=bool)
    free[: system.n_phi] = ~system.dofmap.dirichlet
    idx = np.flatnonzero(free)
    A = system.matrix[idx][:, idx].tocsr()
    if system.rank_one is not None:
        u, v = (a[idx] for a in system.rank_one)
        iu, iv = np.flatnonzero(u), np.flatnonzero(v)
        rows, cols = np.meshgrid(iu, iv, indexing="ij")
        A = A + csr(rows.ravel(), cols.ravel(), np.outer(u[iu], v[iv]).ravel(), A.shape)
    A = A.tocsr()
    A.sort_indices()
    return A
