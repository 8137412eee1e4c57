from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from viseq import DEFAULT_GAME as G
from viseq.errors import EmptyInput, KOutOfRange, RankDeficient, Separation
from viseq.stats import (BootstrapConfig, binom_cdf, binom_pmf, bootstrap_proportion,
                         ground_truth_prob, logistic_fit, ols_fit)


def exact_pmf(k, n, p):
    p = Fraction(p)
    return comb(n, k) * p ** k * (1 - p) ** (n - k)


def test_pmf_closed_form():
    assert binom_pmf(0, 30, 0.5) == pytest.approx(2.0 ** -30, rel=1e-14)


def test_cdf_total_mass():
    assert binom_cdf(30, 30, 0.37) == 1.0


def test_cdf_direct_summation():
    direct = float(sum(exact_pmf(k, 30, 0.2) for k in range(7)))
    assert abs(binom_cdf(6, 30, 0.2) - direct) <= 1e-14


def test_k_out_of_range():
    with pytest.raises(KOutOfRange):
        binom_pmf(31, 30, 0.5)
    with pytest.raises(KOutOfRange):
        binom_cdf(-1, 30, 0.5)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 60), p=st.floats(0.0, 1.0), data=st.data())
def test_cdf_against_rationals(n, p, data):
    k = data.draw(st.integers(0, n))
    exact = float(sum(exact_pmf(j, n, p) for j in range(k + 1)))
    assert abs(binom_cdf(k, n, p) - exact) <= 1e-14


@given(n=st.integers(1, 60), p=st.floats(0.0, 1.0), data=st.data())
def test_cdf_monotone(n, p, data):
    k = data.draw(st.integers(0, n - 1))
    assert binom_cdf(k, n, p) <= binom_cdf(k + 1, n, p) + 1e-15


def test_ground_truth_examples():
    direct = float(sum(exact_pmf(k, 30, 0.1) for k in range(7)))
    assert ground_truth_prob(G, "A", 0.1, 30) == pytest.approx(direct, abs=1e-12)
    assert ground_truth_prob(G, "B", 1.0, 30) == 1.0
    assert ground_truth_prob(G, "A", 1.0, 30) == 0.0
    assert ground_truth_prob(G, "B", 0.5, 30) == pytest.approx(1 - binom_cdf(6, 30, 0.5), abs=1e-15)


def test_ground_truth_ties_count_half():
    # n = 9 puts 2/9 on the support: k = 2 is a tie
    tie = float(exact_pmf(2, 9, 0.3))
    a = ground_truth_prob(G, "A", 0.3, 9)
    b = ground_truth_prob(G, "B", 0.3, 9)
    assert a == pytest.approx(float(sum(exact_pmf(k, 9, 0.3) for k in range(2))) + tie / 2,
                              abs=1e-12)
    assert a + b == pytest.approx(1.0, abs=1e-12)


def test_bootstrap_degenerate():
    assert bootstrap_proportion([1] * 40) == (1.0, (1.0, 1.0))
    assert bootstrap_proportion([0] * 40) == (0.0, (0.0, 0.0))
    with pytest.raises(EmptyInput):
        bootstrap_proportion([])


def test_bootstrap_reproducible():
    x = np.random.default_rng(0).random(200) < 0.4
    assert bootstrap_proportion(x, BootstrapConfig(seed=5)) == \
        bootstrap_proportion(x, BootstrapConfig(seed=5))


def test_ols_exact_line():
    x = np.linspace(0, 1, 20)
    fit = ols_fit(np.column_stack([np.ones_like(x), x]), 2 + 3 * x, ["a", "b"])
    assert abs(fit["a"] - 2) <= 1e-10 and abs(fit["b"] - 3) <= 1e-10


def test_ols_rank_deficient():
    x = np.linspace(0, 1, 20)
    with pytest.raises(RankDeficient):
        ols_fit(np.column_stack([np.ones_like(x), x, x]), x)


def test_ols_recovers_noisy_line():
    rng = np.random.default_rng(1)
    x = rng.random(10_000)
    y = 0.58 - 0.79 * x + rng.normal(0, 0.01, x.size)
    fit = ols_fit(np.column_stack([np.ones_like(x), x]), y, ["a", "b"])
    assert abs(fit["a"] - 0.58) <= 0.01 and abs(fit["b"] + 0.79) <= 0.01


def test_ols_matches_lstsq_and_classical_se():
    rng = np.random.default_rng(2)
    X = np.column_stack([np.ones(50), rng.normal(size=(50, 2))])
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=50)
    fit = ols_fit(X, y)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    se = np.sqrt(resid @ resid / 47 * np.diag(np.linalg.inv(X.T @ X)))
    assert np.allclose(fit.coef_vector(), beta, atol=1e-12)
    assert np.allclose([fit.standard_errors[k] for k in fit.names], se, atol=1e-12)


def test_logistic_separation():
    X = np.column_stack([np.ones(20), np.linspace(-1, 1, 20)])
    y = (X[:, 1] > 0).astype(float)
    with pytest.raises(Separation):
        logistic_fit(X, y)


def test_logistic_matches_direct_likelihood_maximum():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(500), rng.normal(size=(500, 2))])
    y = (rng.random(500) < 1 / (1 + np.exp(-(X @ [0.3, 1.0, -0.5])))).astype(float)

    def nll(b):
        eta = X @ b
        return np.sum(np.logaddexp(0, eta) - y * eta)
    direct = minimize(nll, np.zeros(3), method="BFGS", options={"gtol": 1e-10}).x
    fit = logistic_fit(X, y)
    assert np.allclose(fit.coef_vector(), direct, atol=1e-5)
    assert fit.converged and fit.extra["score_norm"] <= 1e-8


def test_logistic_null_model():
    rng = np.random.default_rng(4)
    X = np.column_stack([np.ones(100_000), rng.normal(size=(100_000, 3))])
    y = (rng.random(100_000) < 0.5).astype(float)
    fit = logistic_fit(X, y)
    assert np.all(np.abs(fit.coef_vector()[1:]) <= 0.03)


@given(p=st.floats(0.0, 1.0), choice=st.sampled_from(["A", "B"]))
def test_ground_truth_in_unit_interval(p, choice):
    assert 0.0 <= ground_truth_prob(G, choice, p) <= 1.0


@given(st.lists(st.booleans(), min_size=1, max_size=60), st.integers(0, 100))
def test_bootstrap_interval_ordered(xs, seed):
    est, (lo, hi) = bootstrap_proportion(xs, BootstrapConfig(replications=200, seed=seed))
    assert 0.0 <= lo <= hi <= 1.0
    assert est == pytest.approx(sum(xs) / len(xs))
