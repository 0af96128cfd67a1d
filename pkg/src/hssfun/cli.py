"""Command-line experiment driver."""

import argparse
import sys

import numpy as np

from .bench import ExperimentSpec, run_experiment
from .errors import HssFunError


def build_parser():
    p = argparse.ArgumentParser(
        prog="hssfun",
        description="Matrix functions of symmetric HSS matrices via telescopic "
                    "decompositions and rational Krylov subspaces.")
    p.add_argument("function", choices=["invert", "expm", "invsqrt", "sign", "custom"])
    p.add_argument("--matrix", required=True,
                   help="laplacian | glfrac | tridiag | gmrf_like | csv:PATH")
    p.add_argument("--n", type=int, default=0, help="matrix size (generators)")
    p.add_argument("--alpha", type=float, default=1.5,
                   help="fractional order for glfrac")
    p.add_argument("--spectrum", default=None,
                   help="file with one eigenvalue per line for tridiag")
    p.add_argument("--poles", default="auto",
                   help="'auto', an integer count, or json:PATH")
    p.add_argument("--eps", type=float, default=1e-8, help="target accuracy")
    p.add_argument("--threshold", type=int, default=256, help="leaf size bound")
    p.add_argument("--compress-tol", type=float, default=1e-12,
                   help="HSS compression tolerance")
    p.add_argument("--check-dense", action="store_true",
                   help="compare against the dense result (n <= 8192)")
    p.add_argument("--to-hss", action="store_true",
                   help="standardize and convert the result back to HSS form")
    p.add_argument("--out", default=None, help="csv:PATH or json:PATH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gap", type=float, default=None,
                   help="inner spectral radius for sign experiments")
    p.add_argument("--fname", default=None,
                   help="scalar function for 'custom' (sqrt, log1p_over_x, pow_gamma)")
    p.add_argument("--gamma", type=float, default=None, help="exponent for pow_gamma")
    p.add_argument("--max-poles", type=int, default=60,
                   help="cap on automatically selected pole counts")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spectrum = None
        if args.spectrum:
            spectrum = np.loadtxt(args.spectrum).ravel()
        poles = args.poles
        if isinstance(poles, str) and poles not in ("auto",) and not poles.startswith("json:"):
            poles = int(poles)
        spec = ExperimentSpec(
            function=args.function, matrix=args.matrix, n=args.n,
            alpha=args.alpha, spectrum=spectrum, poles=poles, eps=args.eps,
            threshold=args.threshold, compress_tol=args.compress_tol,
            check_dense=args.check_dense, to_hss=args.to_hss, seed=args.seed,
            gap=args.gap, fname=args.fname, gamma=args.gamma,
            max_poles=args.max_poles)
        report = run_experiment(spec)
    except (HssFunError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.out:
        if args.out.startswith("csv:"):
            with open(args.out[4:], "w", encoding="utf-8") as fh:
                fh.write(report.to_csv())
        elif args.out.startswith("json:"):
            with open(args.out[5:], "w", encoding="utf-8") as fh:
                fh.write(report.to_json())
        else:
            print(f"error: --out must start with csv: or json:", file=sys.stderr)
            return 1
    else:
        print(report.to_json())

    return 2 if report.record.get("flagged") else 0


if __name__ == "__main__":
    sys.exit(main())
