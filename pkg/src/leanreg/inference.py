"""Confidence intervals for a linear contrast ``c' beta``.

Five constructions share the bias-corrected estimator ``beta_bc = beta - B_hat``:

* ``wald_ci`` -- normal interval with the sandwich standard error.
* ``hulc_ci`` -- convex hull of estimates on a random number of disjoint batches.
* ``tstat_ci`` -- t interval from a fixed number of batch estimates.
* ``wild_bootstrap_ci`` -- multiplier bootstrap on the residuals, X held fixed.
* ``pairs_bootstrap_ci`` -- rows resampled with replacement, full refit per draw.

Both bootstraps use the basic (pivot) interval
``[c'beta_bc - q*_{1-a/2}, c'beta_bc - q*_{a/2}]`` with
``T*_b = c'beta*_bc,b - c'beta_hat``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from leanreg.core import FitResult, Sample, gram, ols_fit
from leanreg.debias import moment_bias
from leanreg.errors import (
    BatchTooSmall,
    BootstrapDegenerate,
    BootstrapDegenerateWarning,
    DomainError,
    EmptyInput,
    SingularGram,
)
from leanreg.rng import RngStream, as_generator
from leanreg.variance import as_contrast, normal_quantile, sandwich, student_t_quantile

SQRT5 = math.sqrt(5.0)
MAMMEN_LOW = -(SQRT5 - 1.0) / 2.0
MAMMEN_HIGH = (SQRT5 + 1.0) / 2.0
MAMMEN_P_LOW = (SQRT5 + 1.0) / (2.0 * SQRT5)

PAIRS_MAX_RETRIES = 10
PAIRS_MAX_SKIP_FRACTION = 0.10
DEGENERATE_RTOL = 1e-12


class Method(str, Enum):
    WALD = "Wald"
    HULC = "HulC"
    TSTAT = "TStat"
    WILD = "WildBootstrap"
    PAIRS = "PairsBootstrap"


class WeightLaw(str, Enum):
    MAMMEN = "MammenTwoPoint"
    NORMAL = "StandardNormal"


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    method: Method
    point: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"lower {self.lower!r} exceeds upper {self.upper!r}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class BootstrapSpec:
    n_boot: int = 1000
    weight_law: WeightLaw = WeightLaw.MAMMEN
    debias_in_boot: bool = True
    center_boot_at_bc: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weight_law", WeightLaw(self.weight_law))
        if self.n_boot < 1:
            raise ValueError(f"n_boot must be positive, got {self.n_boot}")
        if self.n_boot < 100:
            warnings.warn(
                f"n_boot = {self.n_boot} < 100 gives unreliable interval endpoints",
                stacklevel=3,
            )


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha


def mammen_moments() -> tuple[float, float, float]:
    """Closed-form first three moments of the Mammen two-point law."""
    p_hi = 1.0 - MAMMEN_P_LOW
    return tuple(
        MAMMEN_P_LOW * MAMMEN_LOW**k + p_hi * MAMMEN_HIGH**k for k in (1, 2, 3)
    )


def draw_weights(law: WeightLaw | str, size, rng) -> NDArray[np.float64]:
    gen = as_generator(rng)
    if WeightLaw(law) is WeightLaw.NORMAL:
        return gen.standard_normal(size)
    u = gen.random(size)
    return np.where(u < MAMMEN_P_LOW, MAMMEN_LOW, MAMMEN_HIGH)


def empirical_quantile(values: ArrayLike, p: float) -> float:
    """``inf{t : F(t) >= p}`` for the empirical CDF, i.e. the ``ceil(pB)``-th order statistic."""
    v = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if v.size == 0:
        raise EmptyInput("empirical_quantile needs at least one value")
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0, 1], got {p!r}")
    k = math.ceil(p * v.size)
    # p * B lands a hair above an integer for p like 0.07, B = 100
    if k > 1 and (k - 1) / v.size >= p:
        k -= 1
    return float(v[min(max(k, 1), v.size) - 1])


def hulc_batch_count(alpha: float) -> tuple[int, float]:
    """Return ``(B, tau)`` with ``B = ceil(log2(2/alpha))`` and ``tau = 2^{B-1} alpha - 1``."""
    alpha = _check_alpha(alpha)
    b = math.ceil(math.log2(2.0 / alpha))
    # guard against log2 landing a rounding error above an integer
    if 2.0 ** (b - 1) >= 2.0 / alpha:
        b -= 1
    return b, 2.0 ** (b - 1) * alpha - 1.0


def split_batches(n: int, n_batches: int, rng=None) -> list[NDArray[np.intp]]:
    """Random permutation cut into contiguous, near-equal blocks.

    The first ``n mod B`` blocks get one extra row. Without ``rng`` the rows
    are taken in their original order.
    """
    if n_batches < 1:
        raise ValueError("need at least one batch")
    perm = np.arange(n) if rng is None else as_generator(rng).permutation(n)
    size, extra = divmod(n, n_batches)
    out, start = [], 0
    for b in range(n_batches):
        stop = start + size + (1 if b < extra else 0)
        out.append(perm[start:stop])
        start = stop
    return out


def batch_estimates(
    sample: Sample, c: NDArray, batches: list[NDArray], debias: bool = True
) -> NDArray[np.float64]:
    d = sample.d
    for rows in batches:
        if rows.size <= d:
            raise BatchTooSmall(len(batches), sample.n, d)
    est = np.empty(len(batches))
    for b, rows in enumerate(batches):
        sub = sample.take(rows)
        fit = ols_fit(sub)
        beta = moment_bias(sub, fit).beta_bc if debias else fit.beta_hat
        est[b] = c @ beta
    return est


def _point(sample: Sample, c: NDArray, fit: FitResult | None, debias: bool) -> tuple[FitResult, float, float]:
    fit = ols_fit(sample) if fit is None else fit
    raw = float(c @ fit.beta_hat)
    bc = float(c @ moment_bias(sample, fit).beta_bc) if debias else raw
    return fit, raw, bc


def wald_ci(
    sample: Sample,
    c: ArrayLike,
    alpha: float = 0.05,
    rng=None,
    *,
    debias: bool = True,
    fit: FitResult | None = None,
) -> ConfidenceInterval:
    """``c'beta_bc -/+ z_{1-alpha/2} sigma_hat_c / sqrt(n)``; ``rng`` is unused.

    ``debias=False`` centres at the raw OLS contrast instead.
    """
    alpha = _check_alpha(alpha)
    c = as_contrast(c, sample.d)
    fit, _, point = _point(sample, c, fit, debias)
    se = sandwich(sample, fit, c).sigma_hat / math.sqrt(sample.n)
    half = normal_quantile(1.0 - alpha / 2.0) * se
    return ConfidenceInterval(point - half, point + half, 1.0 - alpha, Method.WALD, point)


def hulc_ci(
    sample: Sample,
    c: ArrayLike,
    alpha: float = 0.05,
    rng=None,
    *,
    debias: bool = True,
) -> ConfidenceInterval:
    """HulC interval: ``[min_b c'beta_bc^(b), max_b c'beta_bc^(b)]``.

    The batch count is ``B - 1`` with probability ``tau`` and ``B`` otherwise.
    The uniform draw comes first from ``rng``, then the row permutation.
    """
    c = as_contrast(c, sample.d)
    b, tau = hulc_batch_count(alpha)
    gen = as_generator(rng)
    u = gen.random()
    b_star = b - 1 if u <= tau else b
    if sample.n // b_star <= sample.d:
        raise BatchTooSmall(b_star, sample.n, sample.d)
    est = batch_estimates(sample, c, split_batches(sample.n, b_star, gen), debias)
    return hulc_from_estimates(est, alpha)


def hulc_from_estimates(est: ArrayLike, alpha: float) -> ConfidenceInterval:
    """Convex hull of batch estimates; the reported point is their median."""
    est = np.asarray(est, dtype=np.float64)
    if est.size == 0:
        raise EmptyInput("no batch estimates")
    lo, hi = float(est.min()), float(est.max())
    return ConfidenceInterval(lo, hi, 1.0 - alpha, Method.HULC, float(np.median(est)))


def tstat_ci(
    sample: Sample,
    c: ArrayLike,
    alpha: float = 0.05,
    n_batches: int = 6,
    rng=None,
    *,
    debias: bool = True,
) -> ConfidenceInterval:
    """t interval ``m -/+ t_{1-alpha/2, B-1} s / sqrt(B)`` from ``B`` batch estimates."""
    alpha = _check_alpha(alpha)
    c = as_contrast(c, sample.d)
    if n_batches < 2:
        raise ValueError("t-statistic inference needs at least two batches")
    if sample.n // n_batches <= sample.d:
        raise BatchTooSmall(n_batches, sample.n, sample.d)
    gen = None if rng is None else as_generator(rng)
    est = batch_estimates(sample, c, split_batches(sample.n, n_batches, gen), debias)
    return tstat_from_estimates(est, alpha)


def tstat_from_estimates(est: ArrayLike, alpha: float) -> ConfidenceInterval:
    est = np.asarray(est, dtype=np.float64)
    b = est.size
    m = float(est.mean())
    s = float(est.std(ddof=1))
    half = student_t_quantile(1.0 - alpha / 2.0, b - 1) * s / math.sqrt(b)
    return ConfidenceInterval(m - half, m + half, 1.0 - alpha, Method.TSTAT, m)


def _pivot_ci(point: float, tstar: NDArray, alpha: float, method: Method) -> ConfidenceInterval:
    # identical up to round-off relative to the point estimate
    if np.ptp(tstar) <= DEGENERATE_RTOL * max(1.0, abs(point)):
        warnings.warn(
            f"{method.value}: all {tstar.size} bootstrap statistics are identical",
            BootstrapDegenerateWarning,
            stacklevel=3,
        )
    q_hi = empirical_quantile(tstar, 1.0 - alpha / 2.0)
    q_lo = empirical_quantile(tstar, alpha / 2.0)
    return ConfidenceInterval(point - q_hi, point - q_lo, 1.0 - alpha, method, point)


def wild_bootstrap_stats(
    sample: Sample,
    c: NDArray,
    spec: BootstrapSpec,
    rng,
    fit: FitResult | None = None,
    chunk_elems: int = 4_000_000,
) -> tuple[NDArray[np.float64], float, float]:
    """Bootstrap statistics ``T*_b`` plus ``(c'beta_hat, c'beta_bc)``.

    With X fixed, both ``c'(beta* - beta_hat)`` and ``c'B_hat*`` are linear in
    the perturbed residuals ``e * xi``, so each draw costs ``O(n)``:
    ``c'B*`` uses ``r* = (I - H)(e * xi)`` and the full-sample leverages.
    """
    x, n = sample.x, sample.n
    fit, raw, bc = _point(sample, c, fit, spec.debias_in_boot)
    e = fit.residuals
    u = x @ fit.gram.solve(c)
    coef = u / n
    if spec.debias_in_boot:
        a = u * fit.leverage_norms
        a_perp = a - x @ fit.gram.solve(x.T @ a) / n
        coef = coef + a_perp / (n * n)
    v = coef * e
    shift = (bc - raw) if spec.center_boot_at_bc and spec.debias_in_boot else 0.0
    gen = as_generator(rng)
    tstar = np.empty(spec.n_boot)
    step = max(1, chunk_elems // n)
    for start in range(0, spec.n_boot, step):
        stop = min(start + step, spec.n_boot)
        xi = draw_weights(spec.weight_law, (stop - start, n), gen)
        tstar[start:stop] = xi @ v
    # T*_b = c'beta*_bc - c'beta_hat, or minus c'beta_bc when centred at bc
    return tstar - shift, raw, bc


def wild_bootstrap_ci(
    sample: Sample,
    c: ArrayLike,
    alpha: float = 0.05,
    spec: BootstrapSpec | None = None,
    rng=None,
) -> ConfidenceInterval:
    alpha = _check_alpha(alpha)
    c = as_contrast(c, sample.d)
    spec = BootstrapSpec() if spec is None else spec
    tstar, raw, bc = wild_bootstrap_stats(sample, c, spec, rng)
    return _pivot_ci(bc, tstar, alpha, Method.WILD)


def pairs_replicate(sample: Sample, c: NDArray, rows: ArrayLike, debias: bool = True) -> float:
    """``c'beta*_bc`` refitted on the resampled ``rows``."""
    sub = sample.take(rows)
    fit = ols_fit(sub, gram(sub))
    beta = moment_bias(sub, fit).beta_bc if debias else fit.beta_hat
    return float(c @ beta)


def pairs_bootstrap_ci(
    sample: Sample,
    c: ArrayLike,
    alpha: float = 0.05,
    spec: BootstrapSpec | None = None,
    rng=None,
) -> ConfidenceInterval:
    """Resampling (pairs) bootstrap with a full refit per draw.

    A draw whose Gram matrix is singular is redrawn up to ten times and then
    skipped. More than 10% skipped draws raises ``BootstrapDegenerate``.
    With an ``RngStream`` draw ``b`` uses child stream ``b``.
    """
    alpha = _check_alpha(alpha)
    c = as_contrast(c, sample.d)
    spec = BootstrapSpec() if spec is None else spec
    n = sample.n
    _, raw, bc = _point(sample, c, None, spec.debias_in_boot)
    center = bc if spec.center_boot_at_bc and spec.debias_in_boot else raw
    shared = None if isinstance(rng, RngStream) else as_generator(rng)
    values, skipped = [], 0
    for b in range(spec.n_boot):
        gen = shared if shared is not None else rng.child(b).generator()
        for _ in range(PAIRS_MAX_RETRIES + 1):
            try:
                values.append(pairs_replicate(sample, c, gen.integers(0, n, n), spec.debias_in_boot))
                break
            except SingularGram:
                continue
        else:
            skipped += 1
    if skipped > PAIRS_MAX_SKIP_FRACTION * spec.n_boot or not values:
        raise BootstrapDegenerate(
            f"{skipped} of {spec.n_boot} pairs-bootstrap draws had a singular Gram matrix"
        )
    tstar = np.asarray(values) - center
    return _pivot_ci(bc, tstar, alpha, Method.PAIRS)
