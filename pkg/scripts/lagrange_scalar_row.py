"""Lagrange method with and without the R c^T lambda entry in the scalar row.

The default system closes the electrode equation with |Gamma1| (w - g.phi) = 0.
Adding R c^T lambda to that row, as a literal reading of the weak form
suggests, gives a system whose error stops decreasing under refinement.
This script prints both convergence tables side by side.
"""
import argparse

from ibcfem.analysis import ConvergenceReport, ConvergenceRow, h1_seminorm_error, l2_error_domain, l2_error_gamma1
from ibcfem.mesh import build_unit_square_mesh
from ibcfem.methods import build_lagrange_system
from ibcfem.problems import builtin_problems
from ibcfem.solvers import direct_solve


def table(problem, verbatim, meshes):
    spec = builtin_problems()[problem].spec
    rows = []
    for n in meshes:
        mesh = build_unit_square_mesh(n)
        x = direct_solve(build_lagrange_system(spec, mesh, verbatim=verbatim))
        rows.append(ConvergenceRow(
            h=mesh.h, n=n, l2=l2_error_domain(x, spec.exact, mesh), h1=h1_seminorm_error(x, spec.exact_grad, mesh),
            l2_gamma1=l2_error_gamma1(x, spec.exact, mesh), current=float(x[-1]),
        ))
    return ConvergenceReport(problem=problem, method="lagrange", eps=None, solver="direct", rows=rows)


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--meshes", default="10,20,40,80")
    args = p.parse_args()
    meshes = tuple(int(n) for n in args.meshes.split(","))
    for problem in ("test1", "test2"):
        for verbatim in (False, True):
            label = "with R c^T lambda" if verbatim else "default scalar row"
            print(f"## {problem}, {label}\n\n{table(problem, verbatim, meshes).to_markdown()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
