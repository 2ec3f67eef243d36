"""Bias estimates for the least squares estimator under misspecification.

When ``d`` grows faster than ``sqrt(n)`` the OLS estimator carries a bias of
order ``d / n`` that comes from the diagonal of the second-order expansion of
``sigma_hat^{-1}``::

    B = -(1/n^2) sum_i  Sigma^{-1} X_i (Y_i - X_i' beta) ||X_i||^2_{Sigma^{-1}}

``moment_bias`` is its plug-in version (sample Gram, OLS residuals).
``jackknife_debias`` is the classical delete-one comparator.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from leanreg.core import FitResult, Sample, loo_fits
from leanreg.errors import UnknownPopulation


class DebiasMethod(str, Enum):
    MOMENT = "MomentBias"
    JACKKNIFE = "Jackknife"
    NONE = "None"


@dataclass(frozen=True, eq=False)
class DebiasResult:
    bias_hat: NDArray[np.float64]
    beta_bc: NDArray[np.float64]
    method: DebiasMethod


def no_debias(fit: FitResult) -> DebiasResult:
    return DebiasResult(np.zeros_like(fit.beta_hat), fit.beta_hat.copy(), DebiasMethod.NONE)


def moment_bias_vector(x: NDArray, residuals: NDArray, leverage: NDArray, gram) -> NDArray:
    """``-(1/n^2) sigma_hat^{-1} X' (residuals * leverage)``; shared by the bootstrap."""
    n = x.shape[0]
    return -gram.solve(x.T @ (residuals * leverage)) / (n * n)


def moment_bias(sample: Sample, fit: FitResult) -> DebiasResult:
    """Method-of-moments bias estimate and the corrected coefficients."""
    b = moment_bias_vector(sample.x, fit.residuals, fit.leverage_norms, fit.gram)
    return DebiasResult(b, fit.beta_hat - b, DebiasMethod.MOMENT)


def jackknife_debias(sample: Sample, fit: FitResult) -> DebiasResult:
    """Delete-one jackknife: ``beta_jk = n beta - ((n-1)/n) sum_i beta_(-i)``."""
    n = sample.n
    loo = loo_fits(sample, fit)
    beta_jk = n * fit.beta_hat - (n - 1) / n * loo.sum(axis=0)
    return DebiasResult(fit.beta_hat - beta_jk, beta_jk, DebiasMethod.JACKKNIFE)


def true_bias_oracle(dgp, sample: Sample, beta_star: ArrayLike | None = None) -> NDArray[np.float64]:
    """Population bias term ``B`` evaluated on a realized sample.

    ``dgp`` must expose ``population_sigma()`` and, unless ``beta_star`` is
    given, ``ground_truth()``. Intended for tests and diagnostics only.
    """
    sigma_fn = getattr(dgp, "population_sigma", None)
    if sigma_fn is None:
        raise UnknownPopulation(f"{type(dgp).__name__} does not expose a population covariance")
    if beta_star is None:
        gt_fn = getattr(dgp, "ground_truth", None)
        if gt_fn is None:
            raise UnknownPopulation(f"{type(dgp).__name__} does not expose a projection parameter")
        beta_star = gt_fn().beta_star
    beta_star = np.asarray(beta_star, dtype=np.float64)
    sigma = np.asarray(sigma_fn(), dtype=np.float64)
    x, y, n = sample.x, sample.y, sample.n
    resid = y - x @ beta_star
    if np.array_equal(sigma, np.eye(sample.d)):
        sx = x.T
    else:
        sx = np.linalg.solve(sigma, x.T)
    lev = np.einsum("ij,ji->i", x, sx)
    return -(sx @ (resid * lev)) / (n * n)
