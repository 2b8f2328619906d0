"""Command-line driver for refinement studies.

Exit codes: 0 on success, 2 when an element fails coercivity verification,
3 for configuration or mesh-file errors.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    MESH_FAMILIES,
    ConfigError,
    RunConfig,
    format_table,
    run_convergence,
)
from .mesh import MeshError
from .problems import PROBLEM_NAMES
from .projectors import ElementVerificationError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfvem",
        description="Polygonal-mesh diffusion solver with a residual error "
                    "estimator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a refinement study")
    run.add_argument("--problem", required=True, choices=PROBLEM_NAMES)
    run.add_argument("--mesh", default="distorted",
                     help=f"mesh family ({', '.join(MESH_FAMILIES)}) or a "
                          "mesh file path")
    run.add_argument("--k", type=int, default=1, choices=(1, 2, 3),
                     help="polynomial degree")
    run.add_argument("--levels", type=int, default=3,
                     help="number of uniform refinement levels")
    run.add_argument("--n0", type=int, default=8,
                     help="cells per side of the coarsest mesh")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--delta", type=float, default=0.2,
                     help="distortion fraction of the distorted family")
    run.add_argument("--alpha", type=float, default=0.3,
                     help="concavity of the star-concave family")
    run.add_argument("--csv", required=True, help="output CSV path")
    run.add_argument("--svg", default=None, help="optional SVG plot path")
    run.add_argument("--grade-corner", action="store_true",
                     help="grade quadrature toward a singular corner")
    run.add_argument("--solver", default="direct", choices=("direct", "cg"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 3
    config = RunConfig(
        problem=args.problem,
        mesh_family=args.mesh,
        degree=args.k,
        levels=args.levels,
        n0=args.n0,
        seed=args.seed,
        distortion=args.delta,
        concavity=args.alpha,
        csv_path=args.csv,
        svg_path=args.svg,
        grade_corner=args.grade_corner,
        solver=args.solver,
    )
    try:
        rows, summary = run_convergence(config)
    except ElementVerificationError as exc:
        print(f"element verification failed:\n{exc}", file=sys.stderr)
        return 2
    except (ConfigError, MeshError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(format_table(rows))
    if summary["average_rate"] is not None:
        print(f"average rate: {summary['average_rate']:.3f}  "
              f"(estimator {summary['average_estimator_rate']:.3f})")
    band = summary["effectivity_band"]
    if band:
        print(f"effectivity band over last levels: [{band[0]:.3f}, "
              f"{band[1]:.3f}]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
