"""Gram-matrix concentration and estimation error along a constant d/n ray.

    python3 scripts/concentration.py --reps 200
"""

import argparse

from leanreg.diagnostics import concentration_sweep
from leanreg.rng import RngStream


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=88)
    args = ap.parse_args()
    grid = [(1000, 10), (4000, 40), (16000, 160)]
    print(f"{'n':>7}{'d':>5}{'D_Sigma':>10}{'/rate':>8}{'|b-beta|':>10}{'/rate':>8}{'lam_min':>9}")
    for r in concentration_sweep(grid, "WellSpecified", args.reps, RngStream(args.seed)):
        print(f"{r.n:>7}{r.d:>5}{r.median_d_sigma:>10.4f}{r.d_sigma_rate_ratio:>8.3f}"
              f"{r.median_beta_err:>10.4f}{r.beta_err_rate_ratio:>8.3f}{r.median_lambda_min:>9.4f}")


if __name__ == "__main__":
    main()
