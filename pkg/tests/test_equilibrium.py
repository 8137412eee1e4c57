import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viseq import DEFAULT_GAME as G
from viseq.behavior import (Access, BestResponder, EmpiricalLogistic, LogitResponder,
                            MonteCarloConfig, PopulationMixture, RandomChooser, VisType)
from viseq.equilibrium import (EquilibriumResult, ResponseMap, bisection, damped_iteration,
                               equilibrium_report, fit_fixed_point_from_regression, grid_scan,
                               robbins_monro)
from viseq.errors import DegenerateSlope, MaxIterExceeded, OutsideUnitInterval
from viseq.signals import SchemeKind, SignalScheme

EXACT = SignalScheme(SchemeKind.EXACT)


def flip(p):
    return 1.0 - p


def empirical_map(vis=VisType.BAR):
    return ResponseMap(PopulationMixture.of(EmpiricalLogistic()), G, EXACT, Access.PUBLIC, vis)


def test_grid_simple_maps():
    r = grid_scan(flip, 1e-3)
    assert r.p_star == 0.5 and r.residual == 0.0
    assert grid_scan(lambda p: 0.5, 1e-3).p_star == 0.5


def test_grid_reports_brackets():
    # a step map has no exact fixed point; the crossing is bracketed at the jump
    r = grid_scan(lambda p: 0.9 if p < 0.3 else 0.1, 1e-2)
    assert r.brackets
    lo, hi = r.brackets[0]
    assert lo < 0.3 <= hi


def test_bisection():
    r = bisection(flip, tol=1e-9)
    assert abs(r.p_star - 0.5) <= 1e-9
    pop = PopulationMixture.of(LogitResponder(0.0))
    assert bisection(ResponseMap(pop, G, EXACT)).p_star == 0.5


def test_bisection_high_rationality_near_nash():
    S = ResponseMap(PopulationMixture.of(LogitResponder(10.0)), G,
                    SignalScheme(SchemeKind.EXACT, round_counts=False))
    oracle = grid_scan(S, 1e-5).p_star
    p = bisection(S, tol=1e-9).p_star
    assert abs(p - oracle) <= 1e-5 and abs(p - 2 / 9) <= 0.005


def test_damped():
    assert damped_iteration(lambda p: 0.5, damping=1.0, p0=0.9).iterations == 1
    with pytest.raises(MaxIterExceeded) as info:
        damped_iteration(flip, damping=1.0, p0=0.2, max_iter=500)
    assert info.value.result is not None
    assert damped_iteration(flip, damping=0.5, p0=0.2).p_star == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("vis", list(VisType))
def test_methods_agree_on_empirical_map(vis):
    S = empirical_map(vis)
    b = bisection(S, tol=1e-6)
    assert abs(grid_scan(S, 1e-4).p_star - b.p_star) <= 1e-3
    assert abs(damped_iteration(S, 0.5).p_star - b.p_star) <= 1e-3


def test_robbins_monro_noiseless():
    r = robbins_monro(flip, iterations=10_000, seed=0)
    assert abs(r.p_star - 0.5) <= 1e-3


def test_robbins_monro_bernoulli_noise():
    r = robbins_monro(lambda p, rng: float(rng.random() < 0.3), iterations=100_000, seed=1)
    assert abs(r.p_star - 0.3) <= 0.01


def test_robbins_monro_logit_binomial_display():
    pop = PopulationMixture.of(LogitResponder(0.1))
    noisy = ResponseMap(pop, G, SignalScheme(SchemeKind.BINOMIAL))
    oracle = bisection(ResponseMap(pop, G, EXACT), tol=1e-9).p_star
    assert abs(robbins_monro(noisy, iterations=100_000, seed=2).p_star - oracle) <= 0.01


def test_robbins_monro_reproducible():
    S = ResponseMap(PopulationMixture.of(EmpiricalLogistic()), G, SignalScheme(SchemeKind.BINOMIAL))
    a = robbins_monro(S, iterations=5000, seed=3)
    b = robbins_monro(S, iterations=5000, seed=3)
    assert a.p_star == b.p_star and a.ci == b.ci


def test_monte_carlo_map_is_seeded_by_point():
    S = ResponseMap(PopulationMixture.of(LogitResponder(0.5)), G, SignalScheme(SchemeKind.FRAMES),
                    mc=MonteCarloConfig(200, 7))
    grid = np.linspace(0, 1, 11)
    assert np.array_equal(S(grid), np.array([S(p) for p in grid]))


def test_fixed_point_from_regression():
    assert fit_fixed_point_from_regression(0.2, 0.4) == pytest.approx(1 / 3)
    assert fit_fixed_point_from_regression(0.0, 0.5) == 0.0
    with pytest.raises(DegenerateSlope):
        fit_fixed_point_from_regression(0.3, 1.0)
    with pytest.raises(OutsideUnitInterval):
        fit_fixed_point_from_regression(-0.1, 0.5)


@pytest.mark.parametrize("p, gain", [(2 / 9, 0.0), (4 / 9, 40 / 9), (0.34, 36.796 - 300 / 9)])
def test_report_gain(p, gain):
    rep = equilibrium_report(G, EquilibriumResult(p, 0.0, "given", 0))
    assert rep["welfare_gain_over_nash"] == pytest.approx(gain, abs=1e-9)


def test_report_welfare_at_034():
    assert equilibrium_report(G, 0.34)["welfare"] == pytest.approx(36.796, abs=1e-9)


def test_random_population_is_one_half():
    S = ResponseMap(PopulationMixture.of(RandomChooser()), G, EXACT)
    assert bisection(S).p_star == 0.5


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.0, 0.9), b=st.floats(-3.0, 0.0))
def test_solvers_find_linear_fixed_point(a, b):
    # S(p) = clip(a + b p) maps into [0, 1] and crosses the diagonal once
    def S(p):
        return float(np.clip(a + b * p, 0.0, 1.0))
    exact = a / (1 - b)
    assert abs(bisection(S, tol=1e-10).p_star - exact) <= 1e-8
    assert abs(grid_scan(S, 1e-3).p_star - exact) <= 1e-3 * (1 - b)


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.0, 5.0))
def test_fixed_point_property(lam):
    S = ResponseMap(PopulationMixture.of(LogitResponder(lam)), G,
                    SignalScheme(SchemeKind.EXACT, round_counts=False))
    r = bisection(S, tol=1e-10)
    assert abs(S(r.p_star) - r.p_star) <= 1e-8
