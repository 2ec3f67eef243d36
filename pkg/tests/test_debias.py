import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_refit, random_sample
from leanreg.core import Sample, ols_fit
from leanreg.debias import (
    DebiasMethod,
    jackknife_debias,
    moment_bias,
    no_debias,
    true_bias_oracle,
)
from leanreg.dgp import DgpKind, DgpSpec, generate
from leanreg.errors import UnknownPopulation
from leanreg.rng import RngStream


def naive_bias(x, y):
    """Direct double loop with an explicit inverse, no factor reuse."""
    n, d = x.shape
    s = np.zeros((d, d))
    for i in range(n):
        s += np.outer(x[i], x[i]) / n
    s_inv = np.linalg.inv(s)
    beta = s_inv @ (x.T @ y / n)
    b = np.zeros(d)
    for i in range(n):
        r = y[i] - x[i] @ beta
        lev = x[i] @ s_inv @ x[i]
        b -= s_inv @ x[i] * r * lev
    return b / n**2


def test_two_point_example():
    s = Sample([[1.0], [2.0]], [1.0, 0.0])
    res = moment_bias(s, ols_fit(s))
    assert res.bias_hat[0] == pytest.approx(0.096)
    assert res.beta_bc[0] == pytest.approx(0.104)
    assert res.method is DebiasMethod.MOMENT


def test_perfect_fit_zero_bias(rng):
    x = rng.standard_normal((25, 3))
    s = Sample(x, x @ np.array([1.0, 2.0, 3.0]))
    fit = ols_fit(s)
    assert np.max(np.abs(moment_bias(s, fit).bias_hat)) < 1e-14
    jk = jackknife_debias(s, fit)
    np.testing.assert_allclose(jk.beta_bc, fit.beta_hat, rtol=1e-9)
    assert np.max(np.abs(jk.bias_hat)) < 1e-9


def test_beta_bc_exact_difference(rng):
    s = random_sample(rng, 50, 4)
    fit = ols_fit(s)
    res = moment_bias(s, fit)
    np.testing.assert_array_equal(res.beta_bc, fit.beta_hat - res.bias_hat)


def test_no_debias():
    s = Sample([[1.0], [2.0]], [1.0, 0.0])
    res = no_debias(ols_fit(s))
    assert res.method is DebiasMethod.NONE
    assert np.all(res.bias_hat == 0)


def test_jackknife_of_mean_is_mean():
    s = Sample(np.ones((3, 1)), [0.0, 3.0, 3.0])
    jk = jackknife_debias(s, ols_fit(s))
    assert jk.beta_bc[0] == pytest.approx(2.0)


def test_jackknife_against_refits(rng):
    s = random_sample(rng, 30, 4)
    fit = ols_fit(s)
    loo = np.array([brute_refit(np.delete(s.x, i, 0), np.delete(s.y, i)) for i in range(s.n)])
    ref = s.n * fit.beta_hat - (s.n - 1) / s.n * loo.sum(axis=0)
    np.testing.assert_allclose(jackknife_debias(s, fit).beta_bc, ref, rtol=1e-8)


def test_true_bias_scalar():
    class Pop:
        def population_sigma(self):
            return np.eye(1)

    # one observation, X = 2, residual at beta equal to 3
    s = Sample([[2.0]], [3.0])
    b = true_bias_oracle(Pop(), s, beta_star=[0.0])
    assert b[0] == pytest.approx(-24.0)


def test_true_bias_zero_residual():
    spec = DgpSpec(DgpKind.WELL_SPECIFIED, 10, 2)
    x = np.random.default_rng(0).standard_normal((10, 2))
    s = Sample(x, x @ spec.ground_truth().beta_star)
    assert np.all(true_bias_oracle(spec, s) == 0)


def test_true_bias_general_sigma():
    class Pop:
        def population_sigma(self):
            return np.array([[2.0, 0.5], [0.5, 1.0]])

    gen = np.random.default_rng(3)
    x, y = gen.standard_normal((6, 2)), gen.standard_normal(6)
    beta = np.array([0.3, -0.1])
    sig_inv = np.linalg.inv(Pop().population_sigma())
    ref = np.zeros(2)
    for i in range(6):
        ref -= sig_inv @ x[i] * (y[i] - x[i] @ beta) * (x[i] @ sig_inv @ x[i])
    np.testing.assert_allclose(true_bias_oracle(Pop(), Sample(x, y), beta), ref / 36, rtol=1e-12)


def test_true_bias_unknown_population():
    s = Sample([[1.0]], [1.0])
    with pytest.raises(UnknownPopulation):
        true_bias_oracle(object(), s, [0.0])

    class NoBeta:
        def population_sigma(self):
            return np.eye(1)

    with pytest.raises(UnknownPopulation):
        true_bias_oracle(NoBeta(), s)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 90), st.integers(0, 2**32 - 1))
def test_fast_path_matches_double_loop(d, extra, seed):
    gen = np.random.default_rng(seed)
    s = random_sample(gen, d + 2 + extra, d)
    fast = moment_bias(s, ols_fit(s)).bias_hat
    ref = naive_bias(s.x, s.y)
    assert np.linalg.norm(fast - ref) <= 1e-10 * np.linalg.norm(ref)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 40), st.integers(0, 2**32 - 1),
       st.floats(-50, 50).filter(lambda a: abs(a) > 1e-2))
def test_bias_equivariance(d, extra, seed, a):
    gen = np.random.default_rng(seed)
    s = random_sample(gen, d + 5 + extra, d)
    mat = gen.standard_normal((d, d)) + 3 * np.eye(d)
    b0 = moment_bias(s, ols_fit(s)).bias_hat
    s1 = Sample(s.x @ mat, s.y)
    b1 = moment_bias(s1, ols_fit(s1)).bias_hat
    np.testing.assert_allclose(b1, np.linalg.solve(mat, b0), rtol=1e-8, atol=1e-10 * np.linalg.norm(b0))
    s2 = Sample(s.x, a * s.y)
    b2 = moment_bias(s2, ols_fit(s2)).bias_hat
    np.testing.assert_allclose(b2, a * b0, rtol=1e-10, atol=1e-12 * abs(a) * np.linalg.norm(b0))


@pytest.mark.slow
def test_true_bias_mean_zero_when_well_specified():
    spec = DgpSpec(DgpKind.WELL_SPECIFIED, 2000, 200)
    root = RngStream(77)
    vals = np.array([
        math.sqrt(spec.n) * true_bias_oracle(spec, generate(spec, root.child(r)))[0]
        for r in range(500)
    ])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean()) <= 3 * se


@pytest.mark.slow
def test_plugin_tracks_population_bias_independent_design():
    spec = DgpSpec(DgpKind.MISSPECIFIED_CUBIC, 2000, 300)
    root = RngStream(91)
    gaps = []
    for r in range(500):
        s = generate(spec, root.child(r))
        fit = ols_fit(s)
        gaps.append(math.sqrt(spec.n) * (moment_bias(s, fit).bias_hat[0] - true_bias_oracle(spec, s)[0]))
    gaps = np.array(gaps)
    se = gaps.std(ddof=1) / math.sqrt(gaps.size)
    assert abs(gaps.mean()) <= 3 * se
