"""Synthetic designs with a known projection parameter.

``WellSpecified``
    ``X ~ N(0, I_d)``, ``Y = 2 X(1) + eps``; ``beta = 2 e_1``.
``MisspecifiedCubic``
    ``X = Z * W`` entrywise with ``Z ~ N(0, I_d)`` and ``W`` compound
    symmetric with correlation ``rho``; ``Y = (X'theta)^3 + eps``. The entries
    of ``X`` are uncorrelated with unit variance (dependent unless
    ``rho = 0``), and ``beta = 3(1 + 2 rho^2)|theta|^2 theta + 6(1 - rho^2) theta^3``.

``W`` is drawn from the one-factor form ``sqrt(rho) g 1 + sqrt(1 - rho) h``,
which has covariance ``(1 - rho) I + rho 11'`` at ``O(d)`` cost per row.
Both designs have ``Sigma = E[XX'] = I_d``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from leanreg.core import Sample
from leanreg.errors import UnknownPopulation
from leanreg.rng import RngStream, as_generator


class DgpKind(str, Enum):
    WELL_SPECIFIED = "WellSpecified"
    MISSPECIFIED_CUBIC = "MisspecifiedCubic"


class Theta(str, Enum):
    FIRST_COORDINATE = "FirstCoordinate"
    UNIFORM_UNIT = "UniformUnit"


@dataclass(frozen=True)
class GroundTruth:
    beta_star: NDArray[np.float64]
    target: float
    sigma_pop: str = "identity"


@dataclass(frozen=True)
class DgpSpec:
    kind: DgpKind
    n: int
    d: int
    rho: float = 0.0
    theta: Theta = Theta.FIRST_COORDINATE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", DgpKind(self.kind))
        object.__setattr__(self, "theta", Theta(self.theta))
        object.__setattr__(self, "rho", float(self.rho))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "d", int(self.d))
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho!r}")

    def theta_vector(self) -> NDArray[np.float64]:
        if self.theta is Theta.FIRST_COORDINATE:
            t = np.zeros(self.d)
            t[0] = 1.0
            return t
        return np.full(self.d, 1.0 / math.sqrt(self.d))

    def contrast(self) -> NDArray[np.float64]:
        """Canonical contrast: ``e_1`` when well specified, ``theta`` otherwise."""
        if self.kind is DgpKind.WELL_SPECIFIED:
            c = np.zeros(self.d)
            c[0] = 1.0
            return c
        return self.theta_vector()

    def population_sigma(self) -> NDArray[np.float64]:
        return np.eye(self.d)

    def ground_truth(self) -> GroundTruth:
        return ground_truth(self)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        out["theta"] = self.theta.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> DgpSpec:
        return cls(**{k: data[k] for k in ("kind", "n", "d", "rho", "theta", "seed") if k in data})


def ground_truth(spec: DgpSpec) -> GroundTruth:
    c = spec.contrast()
    if spec.kind is DgpKind.WELL_SPECIFIED:
        beta = np.zeros(spec.d)
        beta[0] = 2.0
    else:
        th = spec.theta_vector()
        r2 = spec.rho * spec.rho
        beta = 3.0 * (1.0 + 2.0 * r2) * float(th @ th) * th + 6.0 * (1.0 - r2) * th**3
    return GroundTruth(beta, float(c @ beta))


def _draw(spec: DgpSpec, m: int, gen: np.random.Generator) -> tuple[NDArray, NDArray]:
    d = spec.d
    if spec.kind is DgpKind.WELL_SPECIFIED:
        x = gen.standard_normal((m, d))
        eps = gen.standard_normal(m)
        return x, 2.0 * x[:, 0] + eps
    z = gen.standard_normal((m, d))
    g = gen.standard_normal(m)
    h = gen.standard_normal((m, d))
    eps = gen.standard_normal(m)
    w = math.sqrt(1.0 - spec.rho) * h
    if spec.rho > 0.0:
        w += math.sqrt(spec.rho) * g[:, None]
    x = z * w
    return x, (x @ spec.theta_vector()) ** 3 + eps


def generate(spec: DgpSpec, rng=None) -> Sample:
    """Draw one sample of size ``spec.n``; ``rng`` defaults to ``RngStream(spec.seed)``."""
    gen = as_generator(RngStream(spec.seed) if rng is None else rng)
    x, y = _draw(spec, spec.n, gen)
    return Sample(x, y)


def population_kappa_mc(
    spec: DgpSpec,
    c: ArrayLike,
    n_mc: int,
    rng=None,
    chunk: int = 100_000,
) -> tuple[float, float]:
    """Monte Carlo estimate of the Edgeworth coefficient ``kappa_c``.

    ``kappa_c = n^{-5/2} C(n, 2) E[(c'psi_1)(c'psi_2)(c'phi_12)] / sigma_c^3``
    with ``psi(x, y) = (1 + 1/n) x (y - x'beta)`` and
    ``phi(x, y, x', y') = (1 - 1/n)(I - xx') x'(y' - x''beta)`` for
    ``Sigma = I``; ``n`` is ``spec.n``. ``sigma_c^2 = Var(c'X(Y - X'beta))`` is
    estimated from the same draws. Returns ``(estimate, standard_error)``;
    the error treats ``sigma_c`` as known.

    The sign is the raw value of the defining expectation; the caller decides
    whether the adjusted law uses ``Phi + kappa Phi'''`` or ``Phi - kappa Phi'''``.
    """
    if not hasattr(spec, "population_sigma") or not hasattr(spec, "ground_truth"):
        raise UnknownPopulation("population_kappa_mc needs a DgpSpec exposing Sigma and beta")
    sigma = np.asarray(spec.population_sigma())
    if not np.array_equal(sigma, np.eye(spec.d)):
        raise UnknownPopulation("population_kappa_mc supports Sigma = I only")
    c = np.asarray(c, dtype=np.float64)
    beta = spec.ground_truth().beta_star
    gen = as_generator(RngStream(spec.seed, 0x6B61707061) if rng is None else rng)
    n = float(spec.n)
    sums = {"p": [], "p2": [], "a": [], "a2": []}
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        x1, y1 = _draw(spec, m, gen)
        x2, y2 = _draw(spec, m, gen)
        r1 = y1 - x1 @ beta
        r2 = y2 - x2 @ beta
        cx1, cx2 = x1 @ c, x2 @ c
        a1, a2 = cx1 * r1, cx2 * r2
        cphi = (1.0 - 1.0 / n) * r2 * (cx2 - cx1 * np.einsum("ij,ij->i", x1, x2))
        prod = (1.0 + 1.0 / n) ** 2 * a1 * a2 * cphi
        sums["p"].append(math.fsum(prod))
        sums["p2"].append(math.fsum(prod * prod))
        sums["a"].append(math.fsum(a1) + math.fsum(a2))
        sums["a2"].append(math.fsum(a1 * a1) + math.fsum(a2 * a2))
        done += m
    mean_p = math.fsum(sums["p"]) / n_mc
    var_p = max(math.fsum(sums["p2"]) / n_mc - mean_p * mean_p, 0.0) * n_mc / max(n_mc - 1, 1)
    m_a = 2 * n_mc
    mean_a = math.fsum(sums["a"]) / m_a
    sigma2 = (math.fsum(sums["a2"]) / m_a - mean_a * mean_a) * m_a / (m_a - 1)
    scale = n ** -2.5 * (n * (n - 1.0) / 2.0) / sigma2 ** 1.5
    return scale * mean_p, scale * math.sqrt(var_p / n_mc)
