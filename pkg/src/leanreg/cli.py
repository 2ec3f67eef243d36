"""``leanreg`` command line: simulate, fit, diagnose.

Exit codes: 0 success, 2 config or data error, 3 singular design.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from leanreg.core import ols_fit
from leanreg.debias import moment_bias
from leanreg.errors import ConfigError, DataError, LeanRegError, SingularGram, ZeroContrast
from leanreg.harness import (
    METHODS,
    TSTAT_BATCHES,
    load_json,
    load_experiment_config,
    parse_data_csv,
    parse_diagnose_config,
    run_diagnose,
    run_simulation,
)
from leanreg.inference import (
    BootstrapSpec,
    hulc_ci,
    pairs_bootstrap_ci,
    tstat_ci,
    wald_ci,
    wild_bootstrap_ci,
)
from leanreg.rng import RngStream
from leanreg.variance import sandwich

EXIT_USAGE = 2
EXIT_SINGULAR = 3

FIT_HEADER = "method,alpha,n,d,estimate,estimate_bc,sigma_hat,lower,upper"


def parse_contrast(spec: str, d: int) -> np.ndarray:
    kind, _, arg = spec.partition(":")
    if kind == "coord":
        try:
            k = int(arg)
        except ValueError:
            raise DataError(f"--contrast: bad coordinate {arg!r}") from None
        if not 1 <= k <= d:
            raise DataError(f"--contrast: coordinate {k} outside 1..{d}")
        c = np.zeros(d)
        c[k - 1] = 1.0
        return c
    if kind == "file":
        try:
            text = open(arg, encoding="utf-8").read()
        except OSError as exc:
            raise DataError(f"--contrast: cannot read {arg}: {exc}") from None
        try:
            c = np.array([float(t) for t in text.replace(",", " ").split()])
        except ValueError:
            raise DataError(f"--contrast: {arg} holds a non-numeric entry") from None
        if c.size != d:
            raise DataError(f"--contrast: {arg} has {c.size} entries, expected d={d}")
        return c
    raise DataError(f"--contrast must be 'coord:k' or 'file:<path>', got {spec!r}")


def _fit(args) -> int:
    sample = parse_data_csv(args.data)
    c = parse_contrast(args.contrast, sample.d)
    if not np.any(c):
        raise ZeroContrast("contrast vector is zero")
    rng = RngStream(args.seed)
    fit = ols_fit(sample)
    db = moment_bias(sample, fit)
    sig = sandwich(sample, fit, c).sigma_hat
    boot = BootstrapSpec(args.n_boot)
    if args.method == "wald":
        ci = wald_ci(sample, c, args.alpha, fit=fit)
    elif args.method == "hulc":
        ci = hulc_ci(sample, c, args.alpha, rng)
    elif args.method == "tstat":
        ci = tstat_ci(sample, c, args.alpha, args.batches, rng)
    elif args.method == "wild":
        ci = wild_bootstrap_ci(sample, c, args.alpha, boot, rng)
    else:
        ci = pairs_bootstrap_ci(sample, c, args.alpha, boot, rng)
    if args.header:
        print(FIT_HEADER)
    vals = [float(c @ fit.beta_hat), float(c @ db.beta_bc), sig, ci.lower, ci.upper]
    print(",".join([args.method, repr(args.alpha), str(sample.n), str(sample.d)] + [repr(float(v)) for v in vals]))
    return 0


def _simulate(args) -> int:
    cfg = load_experiment_config(args.config)
    out = run_simulation(cfg, threads=args.threads, record_runtime=args.record_runtime)
    logging.getLogger(__name__).info("wrote %s", out)
    return 0


def _diagnose(args) -> int:
    cfg = parse_diagnose_config(load_json(args.config))
    run_diagnose(cfg, threads=args.threads)
    return 0


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leanreg", description="Inference for OLS contrasts without a linear model.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte Carlo coverage experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--threads", default=None, help="integer or 'auto'; overrides the config")
    s.add_argument("--record-runtime", action="store_true",
                   help="fill mean_runtime_ms in coverage.csv (breaks byte reproducibility)")
    s.set_defaults(func=_simulate)

    f = sub.add_parser("fit", help="fit a CSV data set and print one result row")
    f.add_argument("--data", required=True)
    f.add_argument("--contrast", default="coord:1", help="coord:k or file:<path>")
    f.add_argument("--method", choices=METHODS, default="wald")
    f.add_argument("--alpha", type=_probability, default=0.05)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--n-boot", type=int, default=1000)
    f.add_argument("--batches", type=int, default=TSTAT_BATCHES, help="batch count for tstat")
    f.add_argument("--header", action="store_true", help="print a header line first")
    f.set_defaults(func=_fit)

    d = sub.add_parser("diagnose", help="concentration and bias-scaling diagnostics")
    d.add_argument("--config", required=True)
    d.add_argument("--threads", default=None)
    d.set_defaults(func=_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) not in (None, "auto"):
        try:
            args.threads = int(args.threads)
        except ValueError:
            print(f"error: --threads must be an integer or 'auto', got {args.threads!r}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except SingularGram as exc:
        print(f"error: SingularGram: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LeanRegError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
