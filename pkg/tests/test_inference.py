import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_sample
from leanreg.core import Sample, ols_fit
from leanreg.debias import moment_bias
from leanreg.dgp import DgpKind, DgpSpec, generate
from leanreg.errors import (
    BatchTooSmall,
    BootstrapDegenerate,
    BootstrapDegenerateWarning,
    DomainError,
    EmptyInput,
)
from leanreg.inference import (
    MAMMEN_HIGH,
    MAMMEN_LOW,
    MAMMEN_P_LOW,
    BootstrapSpec,
    Method,
    WeightLaw,
    batch_estimates,
    draw_weights,
    empirical_quantile,
    hulc_batch_count,
    hulc_ci,
    hulc_from_estimates,
    mammen_moments,
    pairs_bootstrap_ci,
    pairs_replicate,
    split_batches,
    tstat_ci,
    tstat_from_estimates,
    wald_ci,
    wild_bootstrap_ci,
    wild_bootstrap_stats,
)
from leanreg.rng import RngStream
from leanreg.variance import sandwich


def perfect_sample(n=40, d=3, seed=0):
    x = np.random.default_rng(seed).standard_normal((n, d))
    return Sample(x, x @ np.arange(1.0, d + 1))


# ------------------------------------------------------------------ Wald


def test_wald_reference_half_width():
    # one-dimensional sample with c'beta_bc = 1 and sigma_hat = 1 at n = 4
    s = Sample(np.ones((4, 1)), [0.0, 2.0, 0.0, 2.0])
    ci = wald_ci(s, [1.0], 0.05)
    assert ci.point == pytest.approx(1.0)
    assert ci.lower == pytest.approx(0.020018, abs=1e-6)
    assert ci.upper == pytest.approx(1.979982, abs=1e-6)
    assert ci.method is Method.WALD
    assert ci.level == pytest.approx(0.95)


def test_wald_alpha_032(rng):
    s = random_sample(rng, 80, 3)
    ci = wald_ci(s, [0, 1, 0], 0.32)
    sig = sandwich(s, ols_fit(s), [0, 1, 0]).sigma_hat
    assert ci.width / 2 == pytest.approx(0.9944579 * sig / math.sqrt(80), rel=1e-6)


def test_wald_symmetric_about_bc(rng):
    s = random_sample(rng, 60, 4)
    c = np.array([1.0, 2.0, 0.0, -1.0])
    ci = wald_ci(s, c)
    assert ci.point == pytest.approx(float(c @ moment_bias(s, ols_fit(s)).beta_bc), abs=1e-12)
    assert (ci.upper - ci.point) - (ci.point - ci.lower) == pytest.approx(0.0, abs=1e-12)


def test_wald_perfect_fit():
    s = perfect_sample()
    ci = wald_ci(s, [1.0, 0.0, 0.0])
    assert ci.width == pytest.approx(0.0, abs=1e-12)
    assert ci.point == pytest.approx(1.0)


def test_alpha_domain(rng):
    s = random_sample(rng, 30, 2)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(DomainError):
            wald_ci(s, [1, 0], bad)


# ------------------------------------------------------------------ HulC


def test_hulc_batch_count():
    assert hulc_batch_count(0.05) == (6, pytest.approx(0.6))
    b, tau = hulc_batch_count(0.1)
    assert b == 5 and tau == pytest.approx(0.6)
    b, tau = hulc_batch_count(0.125)
    assert b == 4 and tau == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 0.99))
def test_hulc_tau_range(alpha):
    b, tau = hulc_batch_count(alpha)
    assert 0.0 <= tau < 1.0 + 1e-12
    assert 2.0 ** (b - 1) < 2 / alpha <= 2.0**b * (1 + 1e-12)


def test_split_batches_sizes():
    parts = split_batches(23, 5, np.random.default_rng(0))
    assert [p.size for p in parts] == [5, 5, 5, 4, 4]
    assert sorted(np.concatenate(parts).tolist()) == list(range(23))
    ordered = split_batches(6, 3)
    assert [p.tolist() for p in ordered] == [[0, 1], [2, 3], [4, 5]]


def test_hulc_is_hull_of_batch_estimates(rng):
    s = random_sample(rng, 300, 4)
    c = np.array([1.0, 0, 0, 0])
    stream = RngStream(5)
    ci = hulc_ci(s, c, 0.05, stream)
    gen = stream.generator()
    b, tau = hulc_batch_count(0.05)
    b_star = b - 1 if gen.random() <= tau else b
    est = batch_estimates(s, c, split_batches(s.n, b_star, gen))
    assert (ci.lower, ci.upper) == (est.min(), est.max())
    assert ci.point == np.median(est)


def test_hulc_degenerate_zero_width():
    s = perfect_sample(60, 2)
    ci = hulc_ci(s, [0.0, 1.0], 0.05, RngStream(1))
    assert ci.width == pytest.approx(0.0, abs=1e-12)
    assert ci.point == pytest.approx(2.0)


def test_hulc_batch_too_small(rng):
    s = random_sample(rng, 30, 6)
    with pytest.raises(BatchTooSmall) as info:
        hulc_ci(s, np.eye(6)[0], 0.05, RngStream(0))
    assert info.value.n_batches in (5, 6)


def test_hulc_finite_sample_validity():
    # symmetric batch estimates about 0: miscoverage is exactly alpha in expectation
    alpha, trials = 0.05, 100_000
    gen = np.random.default_rng(2024)
    b, tau = hulc_batch_count(alpha)
    miss = 0
    for _ in range(trials):
        b_star = b - 1 if gen.random() <= tau else b
        ci = hulc_from_estimates(gen.standard_t(3, b_star), alpha)
        miss += not ci.contains(0.0)
    rate = miss / trials
    assert rate <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / trials)


def test_hulc_empty():
    with pytest.raises(EmptyInput):
        hulc_from_estimates([], 0.05)


# ------------------------------------------------------------------ t-stat


def test_tstat_constant_batches():
    ci = tstat_from_estimates([1.0] * 5, 0.05)
    assert ci.width == 0.0 and ci.point == 1.0


def test_tstat_two_batches():
    ci = tstat_from_estimates([0.0, 2.0], 0.05)
    assert ci.lower == pytest.approx(-11.7062, abs=1e-4)
    assert ci.upper == pytest.approx(13.7062, abs=1e-4)


def test_tstat_six_batches_uses_t5(rng):
    s = random_sample(rng, 240, 3)
    c = np.array([1.0, 0, 0])
    gen = RngStream(3)
    ci = tstat_ci(s, c, 0.05, 6, gen)
    est = batch_estimates(s, c, split_batches(s.n, 6, gen.generator()))
    half = 2.570582 * est.std(ddof=1) / math.sqrt(6)
    assert ci.width / 2 == pytest.approx(half, rel=1e-6)


def test_tstat_batch_too_small(rng):
    s = random_sample(rng, 30, 5)
    with pytest.raises(BatchTooSmall):
        tstat_ci(s, np.eye(5)[0], 0.05, 6)


# ------------------------------------------------------------------ weights and quantiles


def test_mammen_closed_form():
    m1, m2, m3 = mammen_moments()
    assert abs(m1) <= 1e-12
    assert abs(m2 - 1) <= 1e-12
    assert abs(m3 - 1) <= 1e-12
    assert MAMMEN_LOW == pytest.approx(-0.6180340, abs=1e-7)
    assert MAMMEN_HIGH == pytest.approx(1.6180340, abs=1e-7)
    assert MAMMEN_P_LOW == pytest.approx(0.7236068, abs=1e-7)
    assert 1 - MAMMEN_P_LOW == pytest.approx(0.2763932, abs=1e-7)


def test_weight_draws_support():
    xi = draw_weights(WeightLaw.MAMMEN, 1000, RngStream(1))
    assert set(np.unique(xi)) == {MAMMEN_LOW, MAMMEN_HIGH}
    z = draw_weights("StandardNormal", (3, 4), RngStream(1))
    assert z.shape == (3, 4)


def test_empirical_quantile_examples():
    assert empirical_quantile([4, 2, 3, 1], 0.5) == 2
    assert empirical_quantile([4, 2, 3, 1], 1.0) == 4
    assert empirical_quantile([7], 0.01) == 7
    assert empirical_quantile(np.arange(100), 0.07) == 6
    with pytest.raises(EmptyInput):
        empirical_quantile([], 0.5)
    with pytest.raises(DomainError):
        empirical_quantile([1.0], 0.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=60), st.floats(1e-6, 1.0))
def test_empirical_quantile_is_inf_of_cdf(vals, p):
    v = np.asarray(vals, dtype=float)
    q = empirical_quantile(v, p)
    assert np.mean(v <= q) >= p - 1e-12
    below = v[v < q]
    if below.size:
        assert np.mean(v <= below.max()) < p


# ------------------------------------------------------------------ wild bootstrap


def slow_wild(sample, c, spec, rng):
    """Per-draw reference: build Y*, refit, recompute B_hat* with full-sample leverages."""
    fit = ols_fit(sample)
    gen = RngStream(rng).generator() if isinstance(rng, int) else rng.generator()
    xi = draw_weights(spec.weight_law, (spec.n_boot, sample.n), gen)
    out = []
    for b in range(spec.n_boot):
        y_star = sample.x @ fit.beta_hat + fit.residuals * xi[b]
        beta = fit.gram.solve(sample.x.T @ y_star / sample.n)
        r = y_star - sample.x @ beta
        if spec.debias_in_boot:
            bias = -fit.gram.solve(sample.x.T @ (r * fit.leverage_norms)) / sample.n**2
            beta = beta - bias
        out.append(float(c @ beta) - float(c @ fit.beta_hat))
    return np.array(out)


@pytest.mark.parametrize("law", list(WeightLaw))
@pytest.mark.parametrize("debias", [True, False])
def test_wild_fast_path_matches_refit(rng, law, debias):
    s = random_sample(rng, 70, 5)
    c = rng.standard_normal(5)
    spec = BootstrapSpec(200, law, debias_in_boot=debias)
    fast, raw, _ = wild_bootstrap_stats(s, c, spec, RngStream(9))
    ref = slow_wild(s, c, spec, RngStream(9))
    np.testing.assert_allclose(fast, ref, rtol=1e-9, atol=1e-12 * np.abs(ref).max())


def test_wild_perfect_fit_point():
    s = perfect_sample()
    with pytest.warns(BootstrapDegenerateWarning):
        ci = wild_bootstrap_ci(s, [1.0, 0, 0], 0.05, BootstrapSpec(200), RngStream(0))
    assert ci.width == pytest.approx(0.0, abs=1e-12)
    assert ci.point == pytest.approx(1.0)


def test_wild_pivot_construction(rng):
    s = random_sample(rng, 90, 3)
    c = np.array([0.0, 1.0, 0.0])
    spec = BootstrapSpec(300)
    tstar, raw, bc = wild_bootstrap_stats(s, c, spec, RngStream(4))
    ci = wild_bootstrap_ci(s, c, 0.1, spec, RngStream(4))
    assert ci.point == bc
    assert ci.lower == bc - empirical_quantile(tstar, 0.95)
    assert ci.upper == bc - empirical_quantile(tstar, 0.05)


def test_center_at_bc_shifts_stats(rng):
    s = random_sample(rng, 90, 3)
    c = np.array([1.0, 1.0, 0.0])
    t0, raw, bc = wild_bootstrap_stats(s, c, BootstrapSpec(200), RngStream(2))
    t1, _, _ = wild_bootstrap_stats(s, c, BootstrapSpec(200, center_boot_at_bc=True), RngStream(2))
    np.testing.assert_allclose(t0 - t1, bc - raw, rtol=1e-12)


def test_small_n_boot_warns():
    with pytest.warns(UserWarning, match="n_boot"):
        BootstrapSpec(50)


# ------------------------------------------------------------------ pairs bootstrap


def test_pairs_identity_resample(rng):
    s = random_sample(rng, 50, 3)
    c = np.array([1.0, 0, 0])
    fit = ols_fit(s)
    t = pairs_replicate(s, c, np.arange(s.n)) - c @ fit.beta_hat
    assert t == pytest.approx(-(c @ moment_bias(s, fit).bias_hat), rel=1e-12)


def test_pairs_perfect_fit():
    s = perfect_sample(50, 2)
    with pytest.warns(BootstrapDegenerateWarning):
        ci = pairs_bootstrap_ci(s, [1.0, 0.0], 0.05, BootstrapSpec(100), RngStream(0))
    assert ci.width == pytest.approx(0.0, abs=1e-10)


def test_pairs_degenerate_design():
    # n = d: a resample is nonsingular only when it is a permutation
    s = Sample(np.eye(5), np.arange(5.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(BootstrapDegenerate):
            pairs_bootstrap_ci(s, np.eye(5)[0], 0.05, BootstrapSpec(100), RngStream(0))


def test_pairs_stream_per_draw(rng):
    s = random_sample(rng, 60, 2)
    a = pairs_bootstrap_ci(s, [1.0, 0], 0.1, BootstrapSpec(150), RngStream(8))
    b = pairs_bootstrap_ci(s, [1.0, 0], 0.1, BootstrapSpec(150), RngStream(8))
    assert a == b


# ------------------------------------------------------------------ shared properties


def all_cis(sample, c, seed):
    spec = BootstrapSpec(150)
    return [
        wald_ci(sample, c, 0.1),
        hulc_ci(sample, c, 0.1, RngStream(seed)),
        tstat_ci(sample, c, 0.1, 6, RngStream(seed)),
        wild_bootstrap_ci(sample, c, 0.1, spec, RngStream(seed)),
        pairs_bootstrap_ci(sample, c, 0.1, spec, RngStream(seed)),
    ]


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_translation_equivariance(d, seed):
    gen = np.random.default_rng(seed)
    s = random_sample(gen, 12 * d + 60, d)
    c = gen.standard_normal(d)
    delta = gen.standard_normal(d) * 3
    shifted = Sample(s.x, s.y + s.x @ delta)
    for a, b in zip(all_cis(s, c, seed), all_cis(shifted, c, seed)):
        scale = 1 + abs(a.point) + abs(c @ delta)
        assert b.lower - a.lower == pytest.approx(c @ delta, abs=1e-8 * scale)
        assert b.upper - a.upper == pytest.approx(c @ delta, abs=1e-8 * scale)
        assert b.lower <= b.upper


def test_deterministic_given_seed(rng):
    s = random_sample(rng, 150, 3)
    c = np.array([1.0, -1.0, 0.5])
    assert all_cis(s, c, 42) == all_cis(s, c, 42)


@pytest.mark.slow
def test_pairs_coverage_parity_with_wild():
    spec = DgpSpec(DgpKind.WELL_SPECIFIED, 1000, 100)
    c, target = spec.contrast(), spec.ground_truth().target
    boot = BootstrapSpec(200)
    root = RngStream(31)
    wild = pairs = 0
    reps = 500
    for r in range(reps):
        s = generate(spec, root.child(r))
        wild += wild_bootstrap_ci(s, c, 0.05, boot, root.child(r, "wild")).contains(target)
        pairs += pairs_bootstrap_ci(s, c, 0.05, boot, root.child(r, "pairs")).contains(target)
    assert abs(wild - pairs) / reps <= 0.03
