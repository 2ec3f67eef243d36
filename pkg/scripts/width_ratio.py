"""HulC-to-Wald mean width ratio as the dimension grows at fixed n.

Each HulC batch holds about n/6 rows, so its OLS variance carries the
finite-sample factor n_b/(n_b - d - 1); the ratio therefore drifts upward
with d even though both intervals keep nominal coverage.

    python3 scripts/width_ratio.py --n 1000 --d 5 25 50 100 --reps 400
"""

import argparse

import numpy as np

from leanreg.dgp import DgpSpec
from leanreg.harness import run_cell


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--d", type=int, nargs="+", default=[5, 25, 50, 100])
    ap.add_argument("--reps", type=int, default=400)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    print(f"{'d':>5}{'cov_wald':>10}{'cov_hulc':>10}{'ratio':>8}{'exact-var factor':>18}")
    for d in args.d:
        cell = run_cell(DgpSpec("WellSpecified", args.n, d), ["wald", "hulc"], 0.05, args.reps, master_seed=args.seed)
        w = {m: np.mean(np.subtract(md.upper, md.lower)) for m, md in cell.draws.items()}
        cov = {m: np.mean(md.covered) for m, md in cell.draws.items()}
        nb = args.n / 6
        factor = np.sqrt((nb / (nb - d - 1)) / (args.n / (args.n - d - 1)))
        print(f"{d:>5}{cov['wald']:>10.3f}{cov['hulc']:>10.3f}{w['hulc'] / w['wald']:>8.3f}{factor:>18.3f}")


if __name__ == "__main__":
    main()
