"""Error norms, convergence orders and matrix property checks."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from .assembly import ScalarField, _edge_points, _mesh_gradients, _triangle_points, evaluate
from .mesh import GAMMA1, Mesh
from .problems import GradientField
from .quadrature import DEFAULT_RULES, QuadratureRules


def _p1_at_quadrature(phi: np.ndarray, mesh: Mesh, quad: QuadratureRules) -> np.ndarray:
    return phi[mesh.triangles] @ quad.tri_bary.T  # (M, Q)


def l2_error_domain(phi, exact: ScalarField, mesh: Mesh, quad: QuadratureRules = DEFAULT_RULES) -> float:
    phi = np.asarray(phi, dtype=float)[: mesh.num_vertices]
    pts, w = _triangle_points(mesh, quad)
    diff = evaluate(exact, pts[..., 0], pts[..., 1]) - _p1_at_quadrature(phi, mesh, quad)
    return math.sqrt(float(np.sum(w * diff**2)))


def h1_seminorm_error(phi, exact_grad: GradientField, mesh: Mesh, quad: QuadratureRules = DEFAULT_RULES) -> float:
    phi = np.asarray(phi, dtype=float)[: mesh.num_vertices]
    pts, w = _triangle_points(mesh, quad)
    grads, _ = _mesh_gradients(mesh)
    gh = np.einsum("ki,kid->kd", phi[mesh.triangles], grads)  # constant per triangle
    gx, gy = exact_grad(pts[..., 0], pts[..., 1])
    gx = np.broadcast_to(gx, pts.shape[:2])
    gy = np.broadcast_to(gy, pts.shape[:2])
    err = (gx - gh[:, None, 0]) ** 2 + (gy - gh[:, None, 1]) ** 2
    return math.sqrt(float(np.sum(w * err)))


def l2_error_gamma1(phi, exact: ScalarField, mesh: Mesh, quad: QuadratureRules = DEFAULT_RULES) -> float:
    phi = np.asarray(phi, dtype=float)[: mesh.num_vertices]
    _, ev, shape, pts, w = _edge_points(mesh, GAMMA1, quad)
    ph = phi[ev] @ shape.T  # (E, Q)
    diff = evaluate(exact, pts[..., 0], pts[..., 1]) - ph
    return math.sqrt(float(np.sum(w * diff**2)))


def convergence_order(errors: Sequence[float], ratio: float = 2.0) -> list[float]:
    """Observed orders ``log(e_{k-1} / e_k) / log(ratio)`` between consecutive entries."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two errors")
    if any(not e > 0 for e in errors):
        raise ValueError("errors must be positive")
    return [math.log(a / b) / math.log(ratio) for a, b in zip(errors[:-1], errors[1:])]


@dataclass
class SpdReport:
    symmetric: bool
    positive: bool
    min_rayleigh: float
    asymmetry: float


def check_spd(A, trials: int = 100, seed: int = 0, refinements: int = 50, sym_tol: float = 1e-9) -> SpdReport:
    """Numerical symmetry and positive-definiteness check.

    Symmetry is ``max|a_ij - a_ji| / max|a_ij| <= sym_tol``. Positivity takes
    the smallest Rayleigh quotient over ``trials`` random unit vectors and
    then pushes the best one toward the bottom of the spectrum with
    ``refinements`` inverse-iteration steps.
    """
    A = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    amax = float(abs(A).max()) if A.nnz else 0.0
    asym = float(abs(A - A.T).max()) / amax if amax > 0 else 0.0
    symmetric = asym <= sym_tol

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, trials))
    X /= np.linalg.norm(X, axis=0)
    q = np.einsum("ij,ij->j", X, A @ X)
    rq_min = float(q.min())
    x = X[:, int(np.argmin(q))]

    if refinements and n > 1:
        Asym = ((A + A.T) * 0.5).tocsc()
        try:
            solve = sp.linalg.factorized(Asym)
        except RuntimeError:
            solve = None
        if solve is not None:
            for _ in range(refinements):
                y = solve(x)
                nrm = np.linalg.norm(y)
                if not np.isfinite(nrm) or nrm == 0:
                    break
                x = y / nrm
                rq_min = min(rq_min, float(x @ (A @ x)))
    return SpdReport(symmetric=symmetric, positive=rq_min > 0, min_rayleigh=rq_min, asymmetry=asym)


@dataclass
class ConvergenceRow:
    h: float
    n: int
    l2: float
    h1: float
    l2_gamma1: float
    iterations: Optional[int] = None
    residual: Optional[float] = None
    converged: bool = True
    seconds: float = 0.0
    current: Optional[float] = None


@dataclass
class ConvergenceReport:
    problem: str
    method: str
    eps: Optional[float]
    solver: str
    rows: list[ConvergenceRow] = field(default_factory=list)

    def orders(self, key: str) -> list[Optional[float]]:
        """Observed orders against the previous row; ``None`` where undefined.

        The refinement factor is taken from the mesh sizes, so it is 2 for
        the usual halving sequence.
        """
        out: list[Optional[float]] = [None]
        for prev, cur in zip(self.rows[:-1], self.rows[1:]):
            a, b = getattr(prev, key), getattr(cur, key)
            ok = prev.converged and cur.converged and a > 0 and b > 0 and cur.h < prev.h
            out.append(math.log(a / b) / math.log(prev.h / cur.h) if ok else None)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["orders"] = {k: self.orders(k) for k in ("l2", "h1", "l2_gamma1")}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "n", "l2", "l2_order", "h1", "h1_order", "l2_gamma1", "l2_gamma1_order",
                    "iterations", "residual", "converged"])
        o = {k: self.orders(k) for k in ("l2", "h1", "l2_gamma1")}
        for i, r in enumerate(self.rows):
            w.writerow([
                f"{r.h:.6g}", r.n, f"{r.l2:.6e}", _fmt_order(o["l2"][i]), f"{r.h1:.6e}",
                _fmt_order(o["h1"][i]), f"{r.l2_gamma1:.6e}", _fmt_order(o["l2_gamma1"][i]),
                "" if r.iterations is None else r.iterations,
                "" if r.residual is None else f"{r.residual:.3e}",
                r.converged,
            ])
        return buf.getvalue()

    def to_markdown(self) -> str:
        o = {k: self.orders(k) for k in ("l2", "h1", "l2_gamma1")}
        lines = [
            "| Mesh size | L2(Omega) | order | H1_0(Omega) | order | L2(Gamma1) | order |",
            "|---|---|---|---|---|---|---|",
        ]
        for i, r in enumerate(self.rows):
            if not r.converged:
                lines.append(f"| {r.h:g} | Not Converge | n/a | Not Converge | n/a | Not Converge | n/a |")
                continue
            lines.append(
                f"| {r.h:g} | {r.l2:.2e} | {_fmt_order(o['l2'][i])} | {r.h1:.2e} | "
                f"{_fmt_order(o['h1'][i])} | {r.l2_gamma1:.2e} | {_fmt_order(o['l2_gamma1'][i])} |"
            )
        return "\n".join(lines) + "\n"


def _fmt_order(v: Optional[float]) -> str:
    return "n/a" if v is None else f"{v:.2f}"


@dataclass
class EpsilonRow:
    eps: float
    l2: float
    h1: float
    l2_gamma1: float
    converged: bool = True
    residual: Optional[float] = None


@dataclass
class EpsilonSweepReport:
    """Errors on one mesh for a list of penalty parameters."""

    problem: str
    method: str
    h: float
    solver: str
    arithmetic: str
    rows: list[EpsilonRow] = field(default_factory=list)

    def by_eps(self) -> dict[float, EpsilonRow]:
        return {r.eps: r for r in self.rows}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "l2", "h1", "l2_gamma1", "converged"])
        for r in self.rows:
            w.writerow([f"{r.eps:.1e}", f"{r.l2:.6e}", f"{r.h1:.6e}", f"{r.l2_gamma1:.6e}", r.converged])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = ["| eps | L2(Omega) | H1_0(Omega) | L2(Gamma1) |", "|---|---|---|---|"]
        for r in self.rows:
            if r.converged:
                lines.append(f"| {r.eps:.0e} | {r.l2:.2e} | {r.h1:.2e} | {r.l2_gamma1:.2e} |")
            else:
                lines.append(f"| {r.eps:.0e} | Not Converge | Not Converge | Not Converge |")
        return "\n".join(lines) + "\n"


@dataclass
class StudyRow:
    method: str
    h: float
    n: int
    iterations: int
    converged: bool
    residual: float
    reason: str = ""
    flags: list[str] = field(default_factory=list)


@dataclass
class SolverStudyReport:
    """GMRES iteration counts per method and mesh."""

    problem: str
    solver: str
    tol: float
    rows: list[StudyRow] = field(default_factory=list)

    def iterations(self, method: str) -> list[Optional[int]]:
        return [r.iterations if r.converged else None for r in self.rows if r.method == method]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "h", "n", "iterations", "converged", "residual", "reason"])
        for r in self.rows:
            w.writerow([r.method, f"{r.h:.6g}", r.n, r.iterations, r.converged, f"{r.residual:.3e}", r.reason])
        return buf.getvalue()

    def to_markdown(self) -> str:
        methods = list(dict.fromkeys(r.method for r in self.rows))
        hs = sorted({r.h for r in self.rows}, reverse=True)
        cell = {(r.method, r.h): (str(r.iterations) if r.converged else "Not Converge") for r in self.rows}
        lines = ["| Mesh size | " + " | ".join(methods) + " |", "|---" * (len(methods) + 1) + "|"]
        for h in hs:
            lines.append(f"| {h:g} | " + " | ".join(cell.get((m, h), "") for m in methods) + " |")
        return "\n".join(lines) + "\n"
