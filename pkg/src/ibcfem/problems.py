"""Problem data for the Poisson equation with a series-resistor electrode.

    -lap(phi) = f            in (0, L)^2
    phi = V - R * I          on x = 0, with I = int sigma dphi/dn ds
    dphi/dy = 0              on y = 0 and y = L
    phi = phi_D              on x = L
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .assembly import ScalarField, evaluate

GradientField = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    f: ScalarField
    sigma: ScalarField
    V: float
    R: float
    phi_d: ScalarField
    L: float = 1.0
    exact: Optional[ScalarField] = None
    exact_grad: Optional[GradientField] = None
    name: str = "custom"

    def __post_init__(self):
        if self.R < 0:
            raise ProblemError(f"series resistance must be nonnegative, got {self.R}")
        if not self.L > 0:
            raise ProblemError(f"domain size must be positive, got {self.L}")

    def scaled(self, alpha: float) -> "ProblemSpec":
        """Same problem with f, V and phi_D multiplied by ``alpha``."""
        f, pd = self.f, self.phi_d
        return ProblemSpec(
            f=lambda x, y: alpha * evaluate(f, x, y),
            sigma=self.sigma,
            V=alpha * self.V,
            R=self.R,
            phi_d=lambda x, y: alpha * evaluate(pd, x, y),
            L=self.L,
            name=f"{self.name}*{alpha:g}",
        )


@dataclass(frozen=True)
class ManufacturedProblem:
    spec: ProblemSpec
    laplacian: Optional[ScalarField] = None

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def exact(self) -> ScalarField:
        return self.spec.exact

    @property
    def exact_grad(self) -> GradientField:
        return self.spec.exact_grad

    def exact_current(self) -> float:
        """``int_{x=0} sigma dphi_e/dn ds`` by adaptive quadrature (n = -x)."""
        s = self.spec

        def integrand(y):
            gx, _ = s.exact_grad(np.float64(0.0), np.float64(y))
            return float(evaluate(s.sigma, 0.0, y)) * -float(gx)

        val, _ = integrate.quad(integrand, 0.0, s.L, epsabs=1e-13, epsrel=1e-12)
        return val

    def check_consistency(self, samples: int = 1000, tol: float = 1e-10, seed: int = 0) -> None:
        """Raise :class:`ProblemError` if the manufactured data do not fit together."""
        s = self.spec
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, s.L, samples)
        y = rng.uniform(0, s.L, samples)
        scale = max(1.0, float(np.max(np.abs(evaluate(s.f, x, y)))))
        if self.laplacian is not None:
            res = -evaluate(self.laplacian, x, y) - evaluate(s.f, x, y)
            if np.max(np.abs(res)) > tol * scale:
                raise ProblemError(f"{self.name}: -lap(phi_e) != f")
        yy = np.linspace(0, s.L, 101)
        L = np.full_like(yy, s.L)
        zero = np.zeros_like(yy)
        if np.max(np.abs(evaluate(s.exact, L, yy) - evaluate(s.phi_d, L, yy))) > tol:
            raise ProblemError(f"{self.name}: phi_e != phi_D on x = L")
        for edge in (zero, L):
            _, gy = s.exact_grad(np.linspace(0, s.L, 101), edge)
            if np.max(np.abs(gy)) > tol:
                raise ProblemError(f"{self.name}: dphi_e/dy != 0 on y = 0 or y = L")
        trace = evaluate(s.exact, zero, yy)
        target = s.V - s.R * self.exact_current()
        if np.max(np.abs(trace - target)) > tol:
            raise ProblemError(f"{self.name}: electrode condition violated")


def _test1() -> ManufacturedProblem:
    spec = ProblemSpec(
        f=lambda x, y: -4.0 * x * y + 2.0 * x,
        sigma=lambda x, y: np.ones_like(y),
        V=1.0,
        R=1.0,
        phi_d=lambda x, y: 2.0 / 3.0 * y**3 - y**2 + 5.0 / 6.0,
        L=1.0,
        exact=lambda x, y: 2.0 / 3.0 * x * y**3 - x * y**2 + 5.0 / 6.0,
        exact_grad=lambda x, y: (2.0 / 3.0 * y**3 - y**2, 2.0 * x * y**2 - 2.0 * x * y),
        name="test1",
    )
    return ManufacturedProblem(spec, laplacian=lambda x, y: 4.0 * x * y - 2.0 * x)


def _test2() -> ManufacturedProblem:
    pi = np.pi
    spec = ProblemSpec(
        f=lambda x, y: (1.0 + pi**2) * np.sin(x) * np.cos(pi * y),
        sigma=lambda x, y: y + 1.0,
        V=1.0 + 2.0 / pi**2,
        R=1.0,
        phi_d=lambda x, y: 1.0 + np.sin(1.0) * np.cos(pi * y),
        L=1.0,
        exact=lambda x, y: np.sin(x) * np.cos(pi * y) + 1.0,
        exact_grad=lambda x, y: (np.cos(x) * np.cos(pi * y), -pi * np.sin(x) * np.sin(pi * y)),
        name="test2",
    )
    return ManufacturedProblem(spec, laplacian=lambda x, y: -(1.0 + pi**2) * np.sin(x) * np.cos(pi * y))


def builtin_problems(check: bool = True) -> dict[str, ManufacturedProblem]:
    problems = {"test1": _test1(), "test2": _test2()}
    if check:
        for p in problems.values():
            p.check_consistency()
    return problems
