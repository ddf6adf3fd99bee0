"""Penalty-parameter sweep on Test 2 at h = 0.0125.

The reference run uses the literal bordered system without iterative
refinement, which reproduces the round-off loss below eps = 1e-11. The
same sweep with the stable right-hand side and extended-precision
refinement is written next to it for comparison.
"""
import argparse
import io

from ibcfem.cli import ExperimentConfig, run

VARIANTS = [
    ("nitsche-bordered", "literal"),
    ("nitsche-bordered", "stable"),
    ("nitsche", "literal"),
    ("nitsche", "stable"),
]


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--out", default="results/epsilon_sweep")
    p.add_argument("--n", type=int, default=80)
    args = p.parse_args()
    for method, arithmetic in VARIANTS:
        out = f"{args.out}/{method}_{arithmetic}"
        buf = io.StringIO()
        cfg = ExperimentConfig(experiment="epsilon-sweep", method=method, arithmetic=arithmetic,
                               meshes=(args.n,), out=out)
        run(cfg, stdout=buf)
        print(f"## {method}, {arithmetic} arithmetic\n\n{buf.getvalue()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
