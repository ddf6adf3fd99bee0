"""GMRES + AMG iteration counts for both methods on both test problems."""
import argparse
import io

from ibcfem.cli import ExperimentConfig, run


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="results/solver_study")
    p.add_argument("--meshes", default="10,20,40,80")
    args = p.parse_args()
    meshes = tuple(int(n) for n in args.meshes.split(","))
    for problem in ("test1", "test2"):
        buf = io.StringIO()
        run(ExperimentConfig(experiment="solver-study", problem=problem, meshes=meshes, out=args.out), stdout=buf)
        print(f"## {problem}\n\n{buf.getvalue()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
