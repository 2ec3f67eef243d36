"""Run a coverage experiment from a JSON config and print a compact table.

    python3 scripts/run_coverage.py configs/well_specified.json [--threads 4]
"""

import argparse
import csv
import logging
from pathlib import Path

from leanreg.harness import load_experiment_config, run_simulation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--threads", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg = load_experiment_config(args.config)
    threads = None if args.threads is None else (args.threads if args.threads == "auto" else int(args.threads))
    out = run_simulation(cfg, threads=threads)
    with open(Path(out) / "coverage.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'dgp':<18}{'n':>6}{'d':>5}{'rho':>5} {'theta':<16}{'method':<7}{'cover':>7}{'width':>10}")
    for r in rows:
        print(f"{r['dgp']:<18}{r['n']:>6}{r['d']:>5}{float(r['rho']):>5.2f} {r['theta']:<16}{r['method']:<7}"
              f"{float(r['coverage']):>7.3f}{float(r['mean_width']):>10.4f}")


if __name__ == "__main__":
    main()
