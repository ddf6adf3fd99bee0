"""Error tables for both test problems and both methods (direct solver).

Writes one CSV/markdown/JSON triple per (problem, method) under --out and
prints the markdown tables.
"""
import argparse
import io

from ibcfem.cli import ExperimentConfig, run

CASES = [
    ("test1", "lagrange"),
    ("test1", "nitsche"),
    ("test2", "lagrange"),
    ("test2", "nitsche"),
]


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--out", default="results/convergence")
    p.add_argument("--meshes", default="10,20,40,80")
    args = p.parse_args()
    meshes = tuple(int(n) for n in args.meshes.split(","))
    status = 0
    for problem, method in CASES:
        buf = io.StringIO()
        status |= run(ExperimentConfig(problem=problem, method=method, meshes=meshes, out=args.out), stdout=buf)
        print(f"## {problem}, {method}\n\n{buf.getvalue()}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
