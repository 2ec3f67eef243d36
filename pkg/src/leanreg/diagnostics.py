"""Empirical checks on the quantities that drive the theory.

* ``D_Sigma = || Sigma^{-1/2} S Sigma^{-1/2} - I ||_op`` (Gram concentration),
* ``|| beta_hat - beta ||_Sigma``,
* ``max_i | X_i'(beta_hat - beta) |``,
* the Monte Carlo bias of ``sqrt(n) c'beta_hat`` with and without correction.

Sweeps summarize with medians; means are kept alongside for monotonicity checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import eigh_tridiagonal

from leanreg.core import Sample, ols_fit
from leanreg.debias import moment_bias, true_bias_oracle
from leanreg.dgp import DgpKind, DgpSpec, Theta, generate
from leanreg.errors import NotSymmetric
from leanreg.inference import wald_ci
from leanreg.parallel import ordered_map
from leanreg.rng import RngStream

LANCZOS_MIN_DIM = 512
SYM_RTOL = 1e-10


@dataclass(frozen=True)
class ConcentrationSnapshot:
    d_sigma: float
    lambda_min: float
    beta_err_sigma: float
    max_fitted_dev: float
    n: int
    d: int


def _check_symmetric(a: NDArray, name: str) -> None:
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if float(np.max(np.abs(a - a.T))) > SYM_RTOL * max(scale, 1.0):
        raise NotSymmetric(f"{name} is not symmetric")


def inverse_sqrt(sigma: ArrayLike) -> NDArray[np.float64]:
    """``Sigma^{-1/2}`` of a symmetric positive definite matrix via its eigendecomposition."""
    sigma = np.asarray(sigma, dtype=np.float64)
    _check_symmetric(sigma, "Sigma")
    w, u = np.linalg.eigh(sigma)
    if np.min(w) <= 0.0:
        raise ValueError("Sigma must be positive definite")
    return (u / np.sqrt(w)) @ u.T


def lanczos_extremes(
    a: NDArray, n_iter: int | None = None, tol: float = 1e-10, seed: int = 0
) -> tuple[float, float]:
    """Smallest and largest eigenvalues of a symmetric matrix by Lanczos.

    Full reorthogonalization. Runs at least ``n_iter`` steps (default
    ``2 ceil(sqrt(d)) + 20``) and continues until both extreme Ritz residuals
    fall below ``tol * max|theta|``, or the Krylov space is exhausted.
    """
    d = a.shape[0]
    k_min = min(d, n_iter if n_iter is not None else 2 * math.ceil(math.sqrt(d)) + 20)
    q = np.random.default_rng(seed).standard_normal(d)
    basis = np.empty((d, d))
    basis[:, 0] = q / np.linalg.norm(q)
    alphas, betas = [], []
    lo = hi = 0.0
    for j in range(d):
        w = a @ basis[:, j]
        alphas.append(float(basis[:, j] @ w))
        for _ in range(2):
            w -= basis[:, : j + 1] @ (basis[:, : j + 1].T @ w)
        beta = float(np.linalg.norm(w))
        if j + 1 >= k_min or beta == 0.0 or j + 1 == d:
            if j == 0:
                theta, s = np.array(alphas), np.ones((1, 1))
            else:
                theta, s = eigh_tridiagonal(np.array(alphas), np.array(betas))
            lo, hi = float(theta[0]), float(theta[-1])
            scale = max(abs(lo), abs(hi), 1e-300)
            resid = beta * np.abs(s[-1, [0, -1]])
            if beta <= tol * scale or np.all(resid <= tol * scale):
                break
        if j + 1 == d:
            break
        betas.append(beta)
        basis[:, j + 1] = w / beta
    return lo, hi


def operator_norm_dev(sigma_hat: ArrayLike, sigma_pop_sqrt_inv: ArrayLike | None = None) -> tuple[float, float]:
    """``(D_Sigma, lambda_min)`` for ``M = S sigma_hat S`` with ``S = Sigma^{-1/2}``.

    ``S = None`` means ``Sigma = I``. Dense symmetric eigensolver up to
    ``d = 512``, Lanczos above.
    """
    s_hat = np.asarray(sigma_hat, dtype=np.float64)
    _check_symmetric(s_hat, "sigma_hat")
    if sigma_pop_sqrt_inv is None:
        m = s_hat
    else:
        s = np.asarray(sigma_pop_sqrt_inv, dtype=np.float64)
        _check_symmetric(s, "Sigma^{-1/2}")
        m = s @ s_hat @ s
        m = 0.5 * (m + m.T)
    if m.shape[0] > LANCZOS_MIN_DIM:
        lo, hi = lanczos_extremes(m)
    else:
        ev = np.linalg.eigvalsh(m)
        lo, hi = float(ev[0]), float(ev[-1])
    return max(abs(hi - 1.0), abs(lo - 1.0)), lo


def concentration_snapshot(
    sample: Sample, beta_star: ArrayLike, sigma_pop: ArrayLike | None = None, fit=None
) -> ConcentrationSnapshot:
    fit = ols_fit(sample) if fit is None else fit
    beta_star = np.asarray(beta_star, dtype=np.float64)
    s = None if sigma_pop is None else inverse_sqrt(sigma_pop)
    d_sigma, lam = operator_norm_dev(fit.gram.sigma_hat, s)
    delta = fit.beta_hat - beta_star
    if sigma_pop is None:
        err = float(np.sqrt(delta @ delta))
    else:
        err = float(np.sqrt(delta @ np.asarray(sigma_pop) @ delta))
    return ConcentrationSnapshot(
        d_sigma=d_sigma,
        lambda_min=lam,
        beta_err_sigma=err,
        max_fitted_dev=float(np.max(np.abs(sample.x @ delta))),
        n=sample.n,
        d=sample.d,
    )


@dataclass(frozen=True)
class ConcentrationSummary:
    n: int
    d: int
    reps: int
    median_d_sigma: float
    median_lambda_min: float
    median_beta_err: float
    median_max_fitted_dev: float
    mean_d_sigma: float
    se_d_sigma: float
    d_sigma_rate_ratio: float
    beta_err_rate_ratio: float


def _as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(0 if rng is None else int(rng))


def concentration_sweep(
    grid,
    dgp_kind: DgpKind | str = DgpKind.WELL_SPECIFIED,
    reps: int = 200,
    rng=None,
    *,
    rho: float = 0.0,
    theta: Theta | str = Theta.FIRST_COORDINATE,
    threads: int | str = 1,
) -> list[ConcentrationSummary]:
    """Median concentration quantities for each ``(n, d)`` in ``grid``.

    Replication ``r`` of cell ``(n, d)`` draws from ``rng.child("concentration", n, d, r)``.
    """
    stream = _as_stream(rng)
    out = []
    for n, d in grid:
        if n <= d:
            raise ValueError(f"grid cell (n={n}, d={d}) needs n > d")
        spec = DgpSpec(dgp_kind, n, d, rho, theta)
        beta = spec.ground_truth().beta_star

        def one(r, spec=spec, beta=beta, n=n, d=d):
            sample = generate(spec, stream.child("concentration", n, d, r))
            return concentration_snapshot(sample, beta)

        snaps = ordered_map(one, range(reps), threads)
        ds = np.array([s.d_sigma for s in snaps])
        be = np.array([s.beta_err_sigma for s in snaps])
        rate = math.sqrt(d / n)
        out.append(ConcentrationSummary(
            n=n,
            d=d,
            reps=reps,
            median_d_sigma=float(np.median(ds)),
            median_lambda_min=float(np.median([s.lambda_min for s in snaps])),
            median_beta_err=float(np.median(be)),
            median_max_fitted_dev=float(np.median([s.max_fitted_dev for s in snaps])),
            mean_d_sigma=float(np.mean(ds)),
            se_d_sigma=float(np.std(ds, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            d_sigma_rate_ratio=float(np.median(ds)) / rate,
            beta_err_rate_ratio=float(np.median(be)) / rate,
        ))
    return out


@dataclass(frozen=True)
class BiasScalingRow:
    n: int
    d: int
    reps: int
    raw_mean: float
    raw_se: float
    bc_mean: float
    bc_se: float
    true_bias_mean: float
    true_bias_se: float
    bias_gap_mean: float
    bias_gap_se: float
    wald_raw_coverage: float
    wald_bc_coverage: float


def _mean_se(v: NDArray) -> tuple[float, float]:
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.mean(v)), se


def bias_scaling_probe(
    n: int,
    d_list,
    reps: int,
    rng=None,
    *,
    rho: float = 0.0,
    theta: Theta | str = Theta.FIRST_COORDINATE,
    kind: DgpKind | str = DgpKind.MISSPECIFIED_CUBIC,
    alpha: float = 0.05,
    threads: int | str = 1,
) -> list[BiasScalingRow]:
    """Monte Carlo bias of ``sqrt(n) c'(beta_hat - beta)`` before and after correction.

    ``c`` is the canonical contrast of the design. Each row also carries the
    mean of ``sqrt(n) c'B`` (population bias term), of ``sqrt(n) c'(B_hat - B)``,
    and the coverage of Wald intervals centred at the raw and corrected
    estimates.
    """
    stream = _as_stream(rng)
    rows = []
    for d in d_list:
        spec = DgpSpec(kind, n, d, rho, theta)
        gt = spec.ground_truth()
        c = spec.contrast()
        rn = math.sqrt(n)

        def one(r, spec=spec, gt=gt, c=c, d=d):
            sample = generate(spec, stream.child("bias", n, d, r))
            fit = ols_fit(sample)
            db = moment_bias(sample, fit)
            b_true = true_bias_oracle(spec, sample, gt.beta_star)
            raw_ci = wald_ci(sample, c, alpha, debias=False, fit=fit)
            bc_ci = wald_ci(sample, c, alpha, fit=fit)
            return (
                rn * float(c @ (fit.beta_hat - gt.beta_star)),
                rn * float(c @ (db.beta_bc - gt.beta_star)),
                rn * float(c @ b_true),
                rn * float(c @ (db.bias_hat - b_true)),
                raw_ci.contains(gt.target),
                bc_ci.contains(gt.target),
            )

        res = np.array(ordered_map(one, range(reps), threads), dtype=np.float64)
        raw = _mean_se(res[:, 0])
        bc = _mean_se(res[:, 1])
        tb = _mean_se(res[:, 2])
        gap = _mean_se(res[:, 3])
        rows.append(BiasScalingRow(
            n, d, reps, *raw, *bc, *tb, *gap,
            float(res[:, 4].mean()), float(res[:, 5].mean()),
        ))
    return rows
