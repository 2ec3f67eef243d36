"""Assumption-lean inference for linear contrasts of least-squares fits."""

from leanreg.core import FitResult, GramFactor, Sample, gram, loo_fits, ols_fit
from leanreg.debias import DebiasMethod, DebiasResult, jackknife_debias, moment_bias, no_debias, true_bias_oracle
from leanreg.dgp import DgpKind, DgpSpec, GroundTruth, Theta, generate, ground_truth, population_kappa_mc
from leanreg.diagnostics import (
    bias_scaling_probe,
    concentration_snapshot,
    concentration_sweep,
    operator_norm_dev,
)
from leanreg.errors import *  # noqa: F401,F403
from leanreg.harness import ExperimentConfig, parse_data_csv, run_simulation
from leanreg.inference import (
    BootstrapSpec,
    ConfidenceInterval,
    Method,
    WeightLaw,
    hulc_ci,
    pairs_bootstrap_ci,
    tstat_ci,
    wald_ci,
    wild_bootstrap_ci,
)
from leanreg.rng import RngStream
from leanreg.variance import ContrastVariance, ResidualSource, sandwich

__version__ = "0.1.0"
