"""Batch experiment runner.

Verbs: ``convergence``, ``epsilon-sweep``, ``solver-study`` and ``solve``.
Settings come from an optional INI file (section ``[experiment]``) and are
overridden by command-line flags. Tables go to stdout as markdown; with
``--out DIR`` the CSV, markdown and JSON versions are written there too.

Exit status: 0 when every requested solve met its contract, 1 when some did
not (non-convergence in ``solver-study`` is data, not failure), 2 for bad
configuration or input.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analysis import (
    ConvergenceReport,
    ConvergenceRow,
    EpsilonRow,
    EpsilonSweepReport,
    SolverStudyReport,
    StudyRow,
    h1_seminorm_error,
    l2_error_domain,
    l2_error_gamma1,
)
from .expressions import ExpressionError, parse_expression
from .mesh import build_unit_square_mesh
from .methods import (
    DEFAULT_EPSILON,
    build_lagrange_system,
    build_nitsche_bordered,
    build_nitsche_system,
    gamma1_trace_stats,
    reconstruct_current,
)
from .problems import ProblemError, ProblemSpec, builtin_problems
from .solvers import SOLVERS, SingularSystemError, SolveStats, solve_system

log = logging.getLogger("ibcfem")

EXPERIMENTS = ("convergence", "epsilon-sweep", "solver-study", "single-solve")
METHODS = ("nitsche", "nitsche-bordered", "lagrange")
PROBLEMS = ("test1", "test2", "custom")
ARITHMETIC = ("stable", "literal")
DEFAULT_MESHES = (10, 20, 40, 80)
SWEEP_EPSILONS = tuple(10.0**-k for k in range(2, 15))
THREADS_ENV = "IBC_FEM_THREADS"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Everything needed to rerun one experiment.

    ``None`` fields take per-experiment defaults in :meth:`resolved`.
    ``custom`` holds expression strings (keys ``f``, ``sigma``, ``phi_d``,
    optional ``exact``) and the numbers ``V`` and ``R`` for
    ``problem="custom"``. ``arithmetic="literal"`` builds the Nitsche systems
    with the unsimplified electrode terms and solves without refinement,
    which reproduces the round-off loss at very small ``eps``.
    """

    experiment: str = "convergence"
    problem: Optional[str] = None
    method: Optional[str] = None
    meshes: Optional[tuple[int, ...]] = None
    epsilon: Optional[tuple[float, ...]] = None
    solver: Optional[str] = None
    tol: float = 1e-7
    restart: int = 30
    max_iter: int = 1000
    arithmetic: Optional[str] = None
    out: Optional[str] = None
    seed: int = 0
    custom: dict = field(default_factory=dict)

    def resolved(self) -> "ExperimentConfig":
        exp = self.experiment
        if exp == "solve":
            exp = "single-solve"
        if exp not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {exp!r}")
        sweep = exp == "epsilon-sweep"
        study = exp == "solver-study"
        meshes = (80,) if exp in ("epsilon-sweep", "single-solve") else DEFAULT_MESHES
        epsilon = SWEEP_EPSILONS if sweep else (DEFAULT_EPSILON,)
        cfg = replace(
            self,
            experiment=exp,
            problem=self.problem or ("test2" if sweep else "test1"),
            method=self.method or ("nitsche-bordered" if sweep else "nitsche,lagrange" if study else "nitsche"),
            meshes=tuple(self.meshes) if self.meshes is not None else meshes,
            epsilon=tuple(self.epsilon) if self.epsilon is not None else epsilon,
            solver=self.solver or ("gmres-amg" if study else "direct"),
            arithmetic=self.arithmetic or ("literal" if sweep else "stable"),
            custom=dict(self.custom),
        )
        cfg.validate()
        return cfg

    @property
    def methods(self) -> list[str]:
        return [m.strip() for m in (self.method or "").split(",") if m.strip()]

    def validate(self) -> None:
        if not self.meshes:
            raise ConfigError("meshes must be a nonempty list")
        if any(int(n) < 1 for n in self.meshes):
            raise ConfigError("every mesh needs at least one cell per side")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        methods = self.methods
        if not methods or any(m not in METHODS for m in methods):
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if len(methods) > 1 and self.experiment != "solver-study":
            raise ConfigError("several methods are only allowed for solver-study")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if self.experiment == "solver-study" and self.solver != "gmres-amg":
            raise ConfigError("solver-study measures GMRES iterations; use --solver gmres-amg")
        if self.experiment == "epsilon-sweep" and any(m == "lagrange" for m in methods):
            raise ConfigError("epsilon-sweep needs a Nitsche method")
        if self.experiment == "epsilon-sweep" and len(self.meshes) != 1:
            raise ConfigError("epsilon-sweep runs on a single mesh")
        if self.experiment == "single-solve" and len(self.meshes) != 1:
            raise ConfigError("solve runs on a single mesh")
        if any(m.startswith("nitsche") for m in methods):
            if not self.epsilon or any(not (e > 0 and np.isfinite(e)) for e in self.epsilon):
                raise ConfigError("epsilon must be positive for the Nitsche methods")
        if self.experiment != "epsilon-sweep" and len(self.epsilon) != 1:
            raise ConfigError("a list of epsilon values is only allowed for epsilon-sweep")
        if self.arithmetic not in ARITHMETIC:
            raise ConfigError(f"unknown arithmetic {self.arithmetic!r}; expected one of {ARITHMETIC}")
        if not self.tol > 0 or self.restart < 1 or self.max_iter < 1:
            raise ConfigError("tol, restart and max-iter must be positive")
        if self.problem == "custom":
            build_problem(self)


# ----------------------------------------------------------------------------
# problems


def _finite_difference_gradient(u, step: float = 1e-6):
    def grad(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = (u(x + step, y) - u(x - step, y)) / (2 * step)
        gy = (u(x, y + step) - u(x, y - step)) / (2 * step)
        return gx, gy

    return grad


def build_problem(cfg: ExperimentConfig) -> ProblemSpec:
    if cfg.problem != "custom":
        return builtin_problems()[cfg.problem].spec
    c = cfg.custom
    missing = [k for k in ("f", "sigma", "phi_d", "V", "R") if k not in c]
    if missing:
        raise ConfigError(f"custom problem is missing {', '.join(missing)}")
    try:
        exact = parse_expression(c["exact"]) if c.get("exact") else None
        spec = ProblemSpec(
            f=parse_expression(c["f"]),
            sigma=parse_expression(c["sigma"]),
            V=float(c["V"]),
            R=float(c["R"]),
            phi_d=parse_expression(c["phi_d"]),
            exact=exact,
            exact_grad=_finite_difference_gradient(exact) if exact else None,
            name="custom",
        )
    except (ExpressionError, ProblemError, ValueError) as exc:
        raise ConfigError(f"custom problem: {exc}") from None
    return spec


def _need_exact(spec: ProblemSpec) -> None:
    if spec.exact is None or spec.exact_grad is None:
        raise ConfigError("error tables need an exact solution (custom key 'exact')")


def build_system(method: str, spec: ProblemSpec, mesh, eps: float, arithmetic: str = "stable"):
    literal = arithmetic == "literal"
    if method == "nitsche":
        return build_nitsche_system(spec, mesh, eps, literal=literal)
    if method == "nitsche-bordered":
        return build_nitsche_bordered(spec, mesh, eps, literal=literal)
    if method == "lagrange":
        return build_lagrange_system(spec, mesh)
    raise ConfigError(f"unknown method {method!r}")


def _solve(cfg: ExperimentConfig, system) -> tuple[Optional[np.ndarray], SolveStats]:
    refine = 0 if cfg.arithmetic == "literal" else 3
    try:
        return solve_system(system, cfg.solver, cfg.tol, cfg.restart, cfg.max_iter, refine_steps=refine)
    except SingularSystemError as exc:
        log.warning("%s", exc)
        return None, SolveStats(iterations=0, residual=float("inf"), converged=False, reason=str(exc))


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _map(fn, items):
    """Ordered map, threaded when ``IBC_FEM_THREADS`` allows it."""
    items = list(items)
    workers = min(_workers(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ----------------------------------------------------------------------------
# experiments


def _error_row(cfg, spec, method, n, eps) -> ConvergenceRow:
    mesh = build_unit_square_mesh(n, L=spec.L)
    system = build_system(method, spec, mesh, eps, cfg.arithmetic)
    x, stats = _solve(cfg, system)
    nan = float("nan")
    if x is None or not stats.converged:
        return ConvergenceRow(h=mesh.h, n=n, l2=nan, h1=nan, l2_gamma1=nan, iterations=stats.iterations,
                              residual=stats.residual, converged=False, seconds=stats.seconds)
    return ConvergenceRow(
        h=mesh.h,
        n=n,
        l2=l2_error_domain(x, spec.exact, mesh),
        h1=h1_seminorm_error(x, spec.exact_grad, mesh),
        l2_gamma1=l2_error_gamma1(x, spec.exact, mesh),
        iterations=stats.iterations if cfg.solver != "direct" else None,
        residual=stats.residual,
        converged=True,
        seconds=stats.seconds,
        current=reconstruct_current(x, spec, mesh, eps) if method.startswith("nitsche") else float(x[-1]),
    )


def run_convergence(cfg: ExperimentConfig) -> ConvergenceReport:
    cfg = cfg.resolved()
    spec = build_problem(cfg)
    _need_exact(spec)
    method, eps = cfg.methods[0], cfg.epsilon[0]
    rows = _map(lambda n: _error_row(cfg, spec, method, n, eps), cfg.meshes)
    rows.sort(key=lambda r: -r.h)
    return ConvergenceReport(
        problem=cfg.problem,
        method=method,
        eps=eps if method.startswith("nitsche") else None,
        solver=cfg.solver,
        rows=rows,
    )


def run_epsilon_sweep(cfg: ExperimentConfig) -> EpsilonSweepReport:
    cfg = cfg.resolved()
    spec = build_problem(cfg)
    _need_exact(spec)
    method, n = cfg.methods[0], cfg.meshes[0]

    def one(eps):
        r = _error_row(cfg, spec, method, n, eps)
        return EpsilonRow(eps=eps, l2=r.l2, h1=r.h1, l2_gamma1=r.l2_gamma1, converged=r.converged, residual=r.residual)

    rows = _map(one, cfg.epsilon)
    rows.sort(key=lambda r: -r.eps)
    return EpsilonSweepReport(
        problem=cfg.problem,
        method=method,
        h=build_unit_square_mesh(n, L=spec.L).h,
        solver=cfg.solver,
        arithmetic=cfg.arithmetic,
        rows=rows,
    )


def run_solver_study(cfg: ExperimentConfig) -> SolverStudyReport:
    cfg = cfg.resolved()
    spec = build_problem(cfg)
    eps = cfg.epsilon[0]
    jobs = [(m, n) for m in cfg.methods for n in cfg.meshes]

    def one(job):
        method, n = job
        mesh = build_unit_square_mesh(n, L=spec.L)
        _, stats = _solve(cfg, build_system(method, spec, mesh, eps, cfg.arithmetic))
        return StudyRow(method=method, h=mesh.h, n=n, iterations=stats.iterations, converged=stats.converged,
                        residual=float(stats.residual), reason=stats.reason, flags=list(stats.flags))

    rows = _map(one, jobs)
    rows.sort(key=lambda r: (cfg.methods.index(r.method), -r.h))
    return SolverStudyReport(problem=cfg.problem, solver=cfg.solver, tol=cfg.tol, rows=rows)


@dataclass
class SolveResult:
    vertices: np.ndarray
    phi: np.ndarray
    current: float
    trace: dict
    stats: SolveStats
    method: str

    def solution_text(self) -> str:
        lines = [f"{x:.17g} {y:.17g} {p:.17g}" for (x, y), p in zip(self.vertices, self.phi)]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "method": self.method,
            "current": self.current,
            "gamma1_trace": self.trace,
            "converged": self.stats.converged,
            "residual": self.stats.residual,
            "iterations": self.stats.iterations,
        }


def run_single_solve(cfg: ExperimentConfig) -> SolveResult:
    cfg = cfg.resolved()
    spec = build_problem(cfg)
    method, eps = cfg.methods[0], cfg.epsilon[0]
    mesh = build_unit_square_mesh(cfg.meshes[0], L=spec.L)
    system = build_system(method, spec, mesh, eps, cfg.arithmetic)
    x, stats = _solve(cfg, system)
    if x is None:
        x = np.full(system.size, np.nan)
    phi = x[: mesh.num_vertices]
    if method.startswith("nitsche"):
        current = reconstruct_current(x, spec, mesh, eps)
    else:
        current = float(x[-1])
    return SolveResult(mesh.vertices, phi, current, gamma1_trace_stats(x, mesh), stats, method)


# ----------------------------------------------------------------------------
# command line


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


_CUSTOM_KEYS = ("f", "sigma", "phi_d", "exact", "V", "R")


def load_config(path) -> dict:
    """Read ``[experiment]`` (settings) and ``[problem]`` (custom data) from an INI file."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    out: dict = {}
    if parser.has_section("experiment"):
        sec = parser["experiment"]
        for key, value in sec.items():
            key = key.replace("-", "_")
            if key == "meshes":
                out[key] = _ints(value)
            elif key == "epsilon":
                out[key] = _floats(value)
            elif key in ("tol",):
                out[key] = float(value)
            elif key in ("restart", "max_iter", "seed"):
                out[key] = int(value)
            elif key in ("experiment", "problem", "method", "solver", "arithmetic", "out"):
                out[key] = value.strip()
            else:
                raise ConfigError(f"unknown setting {key!r} in [experiment]")
    if parser.has_section("problem"):
        custom = {}
        for key, value in parser["problem"].items():
            if key not in _CUSTOM_KEYS:
                raise ConfigError(f"unknown key {key!r} in [problem]; expected {_CUSTOM_KEYS}")
            custom[key] = value.strip()
        out["custom"] = custom
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ibcfem", description=__doc__.split("\n")[0])
    p.add_argument("verb", choices=("convergence", "epsilon-sweep", "solver-study", "solve"))
    p.add_argument("--config", help="INI file with [experiment] and optional [problem] sections")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--method", help="nitsche, nitsche-bordered or lagrange (comma list for solver-study)")
    p.add_argument("--meshes", help="cells per side, e.g. 10,20,40,80")
    p.add_argument("--epsilon", help="penalty parameter(s), e.g. 1e-9 or 1e-2,1e-3")
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--tol", type=float, help="GMRES absolute tolerance on the true residual")
    p.add_argument("--restart", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--arithmetic", choices=ARITHMETIC)
    p.add_argument("--out", help="directory for CSV/markdown/JSON output")
    p.add_argument("--seed", type=int)
    for key in ("f", "sigma", "phi_d", "exact"):
        p.add_argument(f"--{key.replace('_', '-')}", dest=f"custom_{key}", help=f"custom problem: {key} expression")
    p.add_argument("--V", dest="custom_V", help="custom problem: source voltage")
    p.add_argument("--R", dest="custom_R", help="custom problem: series resistance")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config(args.config) if args.config else {}
    values["experiment"] = args.verb
    for key in ("problem", "method", "solver", "tol", "restart", "max_iter", "arithmetic", "out", "seed"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    if args.meshes is not None:
        values["meshes"] = _ints(args.meshes)
    if args.epsilon is not None:
        values["epsilon"] = _floats(args.epsilon)
    custom = dict(values.get("custom", {}))
    for key in _CUSTOM_KEYS:
        v = getattr(args, f"custom_{key}")
        if v is not None:
            custom[key] = v
    values["custom"] = custom
    if custom and "problem" not in values:
        values["problem"] = "custom"
    return ExperimentConfig(**values)


def _write(out: Optional[str], stem: str, files: dict[str, str]) -> None:
    if not out:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for ext, text in files.items():
        (d / f"{stem}.{ext}").write_text(text, encoding="utf-8", newline="\n")


def run(cfg: ExperimentConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    cfg = cfg.resolved()
    if cfg.experiment == "convergence":
        rep = run_convergence(cfg)
        stem = f"convergence_{cfg.problem}_{rep.method}_{cfg.solver}"
        _write(cfg.out, stem, {"csv": rep.to_csv(), "md": rep.to_markdown(), "json": rep.to_json()})
        stdout.write(rep.to_markdown())
        return 0 if all(r.converged for r in rep.rows) else 1
    if cfg.experiment == "epsilon-sweep":
        rep = run_epsilon_sweep(cfg)
        stem = f"epsilon_sweep_{cfg.problem}_{rep.method}_n{cfg.meshes[0]}"
        _write(cfg.out, stem, {"csv": rep.to_csv(), "md": rep.to_markdown(), "json": rep.to_json()})
        stdout.write(rep.to_markdown())
        return 0 if all(r.converged for r in rep.rows) else 1
    if cfg.experiment == "solver-study":
        rep = run_solver_study(cfg)
        stem = f"solver_study_{cfg.problem}"
        _write(cfg.out, stem, {"csv": rep.to_csv(), "md": rep.to_markdown(), "json": rep.to_json()})
        stdout.write(rep.to_markdown())
        return 0
    res = run_single_solve(cfg)
    summary = res.summary()
    summary["config"] = {k: v for k, v in asdict(cfg).items() if k != "custom"}
    summary["config"]["custom"] = dict(cfg.custom)
    stem = f"solve_{cfg.problem}_{res.method}_n{cfg.meshes[0]}"
    _write(cfg.out, stem, {"txt": res.solution_text(), "json": json.dumps(summary, indent=2, sort_keys=True)})
    t = res.trace
    stdout.write(
        f"current {res.current:.12e}\n"
        f"gamma1 trace mean {t['mean']:.12e} min {t['min']:.12e} max {t['max']:.12e}\n"
        f"converged {res.stats.converged} residual {res.stats.residual:.3e}\n"
    )
    return 0 if res.stats.converged else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(config_from_args(args))
    except (ConfigError, ProblemError, ExpressionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
