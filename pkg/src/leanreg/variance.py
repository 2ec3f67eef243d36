"""Sandwich variance of a linear contrast, plus quantile helpers."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from leanreg.core import FitResult, Sample
from leanreg.debias import moment_bias
from leanreg.errors import ZeroContrast
from leanreg.quantiles import normal_quantile, student_t_quantile

__all__ = [
    "ContrastVariance",
    "ResidualSource",
    "sandwich",
    "normal_quantile",
    "student_t_quantile",
    "t_upper",
]


class ResidualSource(str, Enum):
    OLS = "OlsResiduals"
    BC = "BcResiduals"


@dataclass(frozen=True, eq=False)
class ContrastVariance:
    sigma2_hat: float
    contrast: NDArray[np.float64]
    meat: NDArray[np.float64] | None = None

    @property
    def sigma_hat(self) -> float:
        return float(np.sqrt(self.sigma2_hat))


def as_contrast(c: ArrayLike, d: int) -> NDArray[np.float64]:
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if c.shape[0] != d:
        raise ValueError(f"contrast has length {c.shape[0]}, expected {d}")
    if not np.any(c != 0.0):
        raise ZeroContrast("contrast vector must be nonzero")
    return c


def sandwich(
    sample: Sample,
    fit: FitResult,
    c: ArrayLike,
    residual_source: ResidualSource | str = ResidualSource.OLS,
    *,
    keep_meat: bool = False,
    dof_correction: bool = False,
) -> ContrastVariance:
    """Plug-in sandwich variance ``c' S^{-1} V S^{-1} c`` of ``sqrt(n) c' beta_hat``.

    Evaluated as ``(1/n) sum_i (w'X_i)^2 r_i^2`` with ``w = S^{-1} c``, which
    is ``O(nd)`` once the Gram factor exists. ``V`` itself is only formed when
    ``keep_meat`` is set. ``dof_correction`` rescales by ``n / (n - d)``.
    """
    c = as_contrast(c, sample.d)
    source = ResidualSource(residual_source)
    if source is ResidualSource.OLS:
        r = fit.residuals
    else:
        r = sample.y - sample.x @ moment_bias(sample, fit).beta_bc
    n, d = sample.n, sample.d
    w = fit.gram.solve(c)
    s = (sample.x @ w) * r
    sigma2 = float(s @ s) / n
    meat = None
    if keep_meat:
        xr = sample.x * r[:, None]
        meat = (xr.T @ xr) / n
    if dof_correction:
        if n <= d:
            raise ValueError("degrees-of-freedom correction needs n > d")
        sigma2 *= n / (n - d)
        if meat is not None:
            meat *= n / (n - d)
    return ContrastVariance(sigma2, c, meat)


def t_upper(q: float, df: int) -> float:
    """Upper ``q``-th quantile of Student's t, i.e. ``F^{-1}(1 - q)``."""
    return student_t_quantile(1.0 - q, df)
