"""Gram matrix, least squares fit and leave-one-out identities.

Everything is solved through the Cholesky factor of the scaled Gram matrix
``sigma_hat = X'X / n`` rather than a QR factorization of ``X``. The factor is
needed anyway for the leverage norms ``X_i' sigma_hat^{-1} X_i`` used by the
bias estimator and the sandwich variance, so one factorization serves the
whole pipeline. The price is conditioning: the normal equations square the
condition number of ``X``, so designs with ``cond(X) > 1e6`` lose about half
the available digits. The singularity threshold ``PIVOT_TOL`` is relative to
the largest diagonal entry of ``sigma_hat``.

No intercept is added; prepend a column of ones if one is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular

from leanreg.errors import DegenerateLeaveOneOut, InvalidSample, SingularGram

PIVOT_TOL = 1e-12
LOO_TOL = 1e-10
TRACE_RTOL = 1e-6


def _frozen(a: NDArray) -> NDArray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Sample:
    """An ``n x d`` design matrix with its response vector.

    Arrays are copied and marked read-only on construction.
    """

    x: NDArray[np.float64]
    y: NDArray[np.float64]

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise InvalidSample(f"x must be 2-dimensional, got shape {x.shape}")
        if y.ndim != 1:
            raise InvalidSample(f"y must be 1-dimensional, got shape {y.shape}")
        n, d = x.shape
        if n < 1 or d < 1:
            raise InvalidSample(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        if y.shape[0] != n:
            raise InvalidSample(f"x has {n} rows but y has length {y.shape[0]}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidSample("sample contains NaN or Inf")
        if n < d:
            raise SingularGram(
                f"Gram matrix is rank deficient: n={n} observations < d={d} columns"
            )
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def take(self, rows: ArrayLike) -> Sample:
        rows = np.asarray(rows, dtype=np.intp)
        return Sample(self.x[rows], self.y[rows])


@dataclass(frozen=True, eq=False)
class GramFactor:
    sigma_hat: NDArray[np.float64]
    chol: NDArray[np.float64]
    min_pivot: float

    def solve(self, b: ArrayLike) -> NDArray[np.float64]:
        """Return ``sigma_hat^{-1} b`` for a vector or a ``d x k`` matrix."""
        z = solve_triangular(self.chol, b, lower=True, check_finite=False)
        return solve_triangular(self.chol, z, lower=True, trans="T", check_finite=False)

    def whiten(self, b: ArrayLike) -> NDArray[np.float64]:
        """Return ``L^{-1} b`` where ``L L' = sigma_hat``."""
        return solve_triangular(self.chol, b, lower=True, check_finite=False)


@dataclass(frozen=True, eq=False)
class FitResult:
    beta_hat: NDArray[np.float64]
    residuals: NDArray[np.float64]
    gram: GramFactor
    leverage_norms: NDArray[np.float64]


def gram(sample: Sample) -> GramFactor:
    """Scaled Gram matrix ``X'X / n`` and its lower Cholesky factor.

    Raises
    ------
    SingularGram
        If any pivot ``L_kk^2`` falls below ``PIVOT_TOL * max(diag(sigma_hat))``.
    """
    x = sample.x
    s = (x.T @ x) / sample.n
    s = 0.5 * (s + s.T)
    scale = float(np.max(np.diag(s)))
    if not scale > 0.0:
        raise SingularGram("Gram matrix has an all-zero diagonal")
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise SingularGram(f"Gram matrix is not positive definite ({exc})") from None
    pivots = np.diag(chol) ** 2
    min_pivot = float(np.min(pivots))
    if not min_pivot > PIVOT_TOL * scale:
        raise SingularGram(
            f"Gram matrix is numerically singular: min pivot {min_pivot:.3e} "
            f"<= {PIVOT_TOL:g} * {scale:.3e}"
        )
    return GramFactor(_frozen(s), _frozen(chol), min_pivot)


def ols_fit(sample: Sample, factor: GramFactor | None = None) -> FitResult:
    """Least squares fit by two triangular solves against the Gram factor."""
    g = gram(sample) if factor is None else factor
    x, y, n, d = sample.x, sample.y, sample.n, sample.d
    beta = g.solve(x.T @ y / n)
    resid = y - x @ beta
    whitened = g.whiten(x.T)
    lev = np.einsum("ij,ij->j", whitened, whitened)
    total = float(np.sum(lev))
    if abs(total - n * d) > TRACE_RTOL * n * d:
        raise SingularGram(
            f"leverage trace {total:.6g} deviates from n*d = {n * d}; "
            "Gram matrix too ill-conditioned"
        )
    return FitResult(_frozen(beta), _frozen(resid), g, _frozen(lev))


def loo_fits(sample: Sample, fit: FitResult) -> NDArray[np.float64]:
    """All delete-one least squares fits, as an ``n x d`` array.

    Row ``i`` is the fit with observation ``i`` removed, obtained from the
    full-sample factor by the Sherman-Morrison identity::

        beta_(-i) = beta - (X'X)^{-1} X_i e_i / (1 - h_i),   h_i = X_i'(X'X)^{-1} X_i
    """
    n = sample.n
    h = fit.leverage_norms / n
    denom = 1.0 - h
    bad = np.flatnonzero(denom <= LOO_TOL)
    if bad.size:
        i = int(bad[0])
        raise DegenerateLeaveOneOut(i, float(denom[i]))
    # columns of (X'X)^{-1} X'
    infl = fit.gram.solve(sample.x.T) / n
    return fit.beta_hat[None, :] - (infl * (fit.residuals / denom)[None, :]).T
