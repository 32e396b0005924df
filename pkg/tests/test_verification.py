import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize_scalar

from kyle_disclosure import MarketParams, ModelDomainError, SimConfig, solve_closed_form
from kyle_disclosure.verification import (
    DeviationKind,
    check_competition_inequalities,
    check_informed_indifference,
    check_limits,
    check_maker_deviation,
    informed_round_payoff,
    maker_payoff_curvature,
    maker_round_payoff,
)


def test_zero_shift_is_exactly_flat(base):
    params, eq = base
    reports = check_informed_indifference(params, eq, [0.0])
    assert all(r.delta == 0.0 for r in reports)


def test_round_two_indifference(base):
    params, eq = base
    reports = check_informed_indifference(params, eq, [-2, -0.5, 0.5, 2], rounds=[2])
    assert len(reports) == 4
    assert all(abs(r.delta) < 1e-10 and r.ok() for r in reports)
    assert all(r.kind is DeviationKind.INFORMED_INDIFFERENCE and r.std_err == 0 for r in reports)


@pytest.mark.parametrize("params", [MarketParams(4, 3), MarketParams(25, 6, 2.0, 0.5), MarketParams(200, 40)])
def test_indifference_every_interior_round(params):
    eq = solve_closed_form(params)
    # +-5 standard deviations of the round's equilibrium order
    size = 5 * eq.beta * np.sqrt(eq.sigma_path[:-1]) * params.dt
    for n in range(1, params.n_rounds):
        shifts = np.linspace(-size[n - 1], size[n - 1], 11)
        reports = check_informed_indifference(params, eq, shifts, rounds=[n], gaps=(-2.0, 0.3, 1.5))
        assert max(abs(r.delta) for r in reports) < 1e-10


def test_terminal_round_is_strict_best_response(base):
    params, eq = base
    reports = check_informed_indifference(params, eq, [-1.0, -0.1, 0.1, 1.0], rounds=[params.n_rounds])
    assert all(r.delta < 0 for r in reports)
    # quadratic loss -shift^2 / (M gamma)
    assert_allclose(reports[0].delta, -1 / (params.n_makers * eq.gamma), rtol=1e-12)


def test_indifference_breaks_off_equilibrium(base):
    params, eq = base
    (report,) = check_informed_indifference(params, eq, [0.5], rounds=[2], gamma=1.05 * eq.gamma)
    assert abs(report.delta) > 1e-3
    assert not report.ok()


def test_round_payoff_oracle(base):
    # direct evaluation: current profit averaged over noise plus continuation
    params, eq = base
    M, g, psi = params.n_makers, eq.gamma, eq.psi
    gap, x = 0.7, 0.3
    expected = (gap - x / (M * g)) * x + M * g / 4 * (gap - psi * x) ** 2
    assert_allclose(informed_round_payoff(params, eq, 2, gap, x), expected, rtol=1e-15)


def test_indifference_monte_carlo(base):
    params, eq = base
    reports = check_informed_indifference(params, eq, [-0.5, 0.5], SimConfig(n_paths=50_000, seed=3), rounds=[2])
    for r in reports:
        assert r.std_err > 0
        assert abs(r.delta) <= 3 * r.std_err + 1e-12


def test_maker_no_deviation(base):
    params, eq = base
    r = check_maker_deviation(params, eq, 1.0)
    assert r.delta == 0.0 and r.kind is DeviationKind.MAKER_SLOPE


@pytest.mark.parametrize("scale", [0.5, 0.8, 1.2, 1.5, 3.0])
def test_maker_deviation_unprofitable(base, scale):
    params, eq = base
    r = check_maker_deviation(params, eq, scale)
    assert r.delta < 0 and r.ok()


def test_maker_deviation_single_peaked():
    params = MarketParams(4, 3)
    eq = solve_closed_form(params)
    scales = [0.1, 0.5, 0.8, 0.95, 1.0, 1.05, 1.5, 3.0, 10.0]
    deltas = [check_maker_deviation(params, eq, s).delta for s in scales]
    peak = scales.index(1.0)
    assert all(a < b for a, b in zip(deltas[:peak], deltas[1 : peak + 1]))
    assert all(a > b for a, b in zip(deltas[peak:], deltas[peak + 1 :]))


@pytest.mark.parametrize("m", [3, 5, 17, 200])
def test_maker_payoff_vertex_at_equal_share(m):
    params = MarketParams(6, m, 1.3, 0.7)
    eq = solve_closed_form(params)
    best = minimize_scalar(lambda s: -maker_round_payoff(params, eq, 2, s), bounds=(0, 1), method="bounded",
                           options={"xatol": 1e-12})
    assert_allclose(best.x, 1 / m, rtol=1e-6)
    assert maker_payoff_curvature(params, eq) < 0


def test_maker_curvature_matches_second_difference(base):
    params, eq = base
    h = 1e-3
    s0 = 1 / params.n_makers
    flow_var = (eq.beta[0] ** 2 * params.dt + eq.sigma_z2[0] + 1) * params.dt
    f = [maker_round_payoff(params, eq, 1, s0 + k * h) / flow_var for k in (-1, 0, 1)]
    second = (f[0] - 2 * f[1] + f[2]) / h**2
    # payoff per unit flow variance is quadratic in the absorbed share
    assert_allclose(second / 2, maker_payoff_curvature(params, eq), rtol=1e-6)


def test_maker_deviation_monte_carlo(base):
    params, eq = base
    r = check_maker_deviation(params, eq, 3.0, SimConfig(n_paths=50_000, seed=4))
    analytic = check_maker_deviation(params, eq, 3.0)
    assert abs(r.delta - analytic.delta) < 3 * r.std_err
    assert r.delta < 0


@pytest.mark.parametrize("scale", [0.0, -1.0])
def test_maker_scale_must_be_positive(base, scale):
    params, eq = base
    with pytest.raises(ValueError):
        check_maker_deviation(params, eq, scale)


def test_competition_inequalities_three_makers():
    rep = check_competition_inequalities(3)
    assert rep.all_hold
    assert_allclose(rep.item1.lhs, 0.5)
    assert_allclose(rep.item1.rhs, 1 - (math.sqrt(3) / 2) / 2, rtol=1e-15)
    assert round(rep.item1.rhs, 4) == 0.5670
    assert_allclose([rep.item4.lhs, rep.item4.rhs], [-0.4, -0.25], rtol=1e-15)
    assert rep.item4.upper == 0.0


def test_competition_inequalities_margins_match_sides():
    for m in (3, 4, 10, 57, 300):
        rep = check_competition_inequalities(m)
        assert_allclose(rep.item1.margin, rep.item1.rhs - rep.item1.lhs, rtol=1e-9)
        assert_allclose(rep.item2.margin, rep.item2.rhs - rep.item2.lhs, rtol=1e-9)
        assert_allclose(rep.item2_makers.margin, rep.item2_makers.rhs - rep.item2_makers.lhs, rtol=1e-9)
        assert_allclose(rep.item3.margin, rep.item3.rhs - rep.item3.lhs, rtol=1e-9)
        assert_allclose(rep.item4.margin, rep.item4.rhs - rep.item4.lhs, rtol=1e-9)


def test_competition_inequalities_sweep():
    for m in range(3, 1001):
        rep = check_competition_inequalities(m)
        assert rep.all_hold, m


def test_competition_inequalities_huge_market():
    rep = check_competition_inequalities(10**6)
    margins = [rep.item1.margin, rep.item2.margin, rep.item2_makers.margin, rep.item3.margin, rep.item4.margin]
    assert rep.all_hold
    assert all(0 < x < 1e-5 for x in margins)


def test_competition_inequalities_reject_small_m():
    with pytest.raises(ModelDomainError):
        check_competition_inequalities(2)


def test_limits_table():
    rows, monotone = check_limits([3, 10, 100, 1000])
    assert monotone
    assert [round(r.price_impact, 4) for r in rows] == [0.8660, 0.5590, 0.5051, 0.5005]
    assert_allclose(rows[-1].autocorr, -1 / 1998, rtol=1e-15)
    big, _ = check_limits([10**6], sigma_v=2, sigma_u=5)
    assert big[0].impact_gap < 1e-5 * 2 / 5
    assert big[0].informed_gap < 1e-5


def test_limits_need_increasing_sequence():
    with pytest.raises(ValueError):
        check_limits([10, 3])
