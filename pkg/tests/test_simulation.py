import io
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from kyle_disclosure import (
    MarketParams,
    SimConfig,
    estimate_posterior_variance,
    estimate_price_moments,
    estimate_profits,
    informed_value,
    simulate_path,
    simulate_paths,
    solve_closed_form,
)
from kyle_disclosure.simulation import BLOCK_SIZE, path_rng, write_paths_csv


@pytest.fixture(scope="module")
def ten_round():
    params = MarketParams(10, 3)
    eq = solve_closed_form(params)
    return params, eq, simulate_paths(params, eq, SimConfig(n_paths=20_000, seed=7))


def test_all_draws_zero(base):
    params, eq = base
    zeros = np.zeros(params.n_rounds)
    rec = simulate_path(params, eq, v=0.0, du=zeros, dz=zeros)
    for arr in (rec.dx, rec.prices, rec.vbar, rec.dy_per_maker):
        assert_array_equal(arr, 0.0)
    assert rec.informed_profit() == 0.0


def test_single_round_hand_case():
    params = MarketParams(1, 3)
    eq = solve_closed_form(params)
    rec = simulate_path(params, eq, v=1.0, du=[0.0], dz=[0.0])
    assert_allclose(rec.dx, [math.sqrt(1 / 3)], rtol=1e-15)
    assert_allclose(rec.prices, [0.5], rtol=1e-15)
    assert_allclose(rec.informed_profit(), 0.5 * math.sqrt(1 / 3), rtol=1e-15)
    assert_allclose(rec.informed_profit(), informed_value(params, eq, 0, 1.0), rtol=1e-14)
    # one fully revealing round
    assert_allclose(rec.vbar, [0.0, 1.0], rtol=1e-15)


def test_simulate_path_needs_rng_or_all_draws(base):
    params, eq = base
    with pytest.raises(ValueError):
        simulate_path(params, eq, v=1.0)


def test_path_identities(ten_round):
    params, eq, batch = ten_round
    M = params.n_makers
    clearing = M * batch.dy_per_maker + batch.dx + batch.du
    assert np.max(np.abs(clearing)) < 1e-12
    assert_allclose(np.diff(batch.vbar, axis=1), eq.psi * batch.dx, rtol=0, atol=1e-13)
    price = (batch.vbar[:, :-1] + batch.vbar[:, 1:] + eq.psi * batch.du) / 2
    assert_allclose(batch.prices, price, rtol=0, atol=1e-12)
    # each maker takes an equal share of the net flow
    assert_allclose(batch.dy_per_maker, -(batch.dx + batch.du) / M, rtol=0, atol=1e-13)


def test_single_path_from_rng_satisfies_identities(base):
    params, eq = base
    rec = simulate_path(params, eq, np.random.default_rng(3))
    assert np.max(np.abs(params.n_makers * rec.dy_per_maker + rec.dx + rec.du)) < 1e-12
    assert rec.vbar.shape == (params.n_rounds + 1,)


def test_draw_distributions(ten_round):
    params, eq, batch = ten_round
    n = len(batch)
    assert abs(batch.v.std(ddof=1) - params.sigma_v) < 4 * params.sigma_v / math.sqrt(2 * n)
    assert_allclose(batch.du.std(axis=0), params.sigma_u * math.sqrt(params.dt), rtol=0.05)
    assert_allclose(batch.dz[:, :-1].std(axis=0), np.sqrt(eq.sigma_z2[:-1] * params.dt), rtol=0.05)
    assert_array_equal(batch.dz[:, -1], 0.0)


def test_martingale_increments(ten_round):
    params, _, batch = ten_round
    dv = np.diff(batch.vbar, axis=1)
    sq = dv**2
    for n in range(params.n_rounds):
        se = sq[:, n].std(ddof=1) / math.sqrt(len(batch))
        assert abs(sq[:, n].mean() - params.sigma_v**2 * params.dt) < 3.5 * se
    rng = np.random.default_rng(0)
    for _ in range(12):
        i, j = rng.choice(params.n_rounds, size=2, replace=False)
        prod = dv[:, i] * dv[:, j]
        assert abs(prod.mean()) < 3.5 * prod.std(ddof=1) / math.sqrt(len(batch))


def test_beliefs_orthogonal_to_noise(ten_round):
    params, _, batch = ten_round
    dv = np.diff(batch.vbar, axis=1)
    rng = np.random.default_rng(1)
    for _ in range(12):
        i, j = rng.integers(params.n_rounds, size=2)
        prod = dv[:, i] * batch.du[:, j]
        assert abs(prod.mean()) < 3.5 * prod.std(ddof=1) / math.sqrt(len(batch))


def test_results_do_not_depend_on_worker_count():
    params = MarketParams(8, 4)
    eq = solve_closed_form(params)
    n = 3 * BLOCK_SIZE + 17
    one = estimate_profits(params, eq, SimConfig(n_paths=n, seed=11, n_jobs=1))
    four = estimate_profits(params, eq, SimConfig(n_paths=n, seed=11, n_jobs=4))
    assert one == four
    a = simulate_paths(params, eq, SimConfig(n_paths=n, seed=11, n_jobs=1))
    b = simulate_paths(params, eq, SimConfig(n_paths=n, seed=11, n_jobs=3))
    assert_array_equal(a.prices, b.prices)


def test_path_prefix_stable_across_sample_sizes():
    params = MarketParams(5, 3)
    eq = solve_closed_form(params)
    small = simulate_paths(params, eq, SimConfig(n_paths=100, seed=5))
    large = simulate_paths(params, eq, SimConfig(n_paths=BLOCK_SIZE + 5, seed=5))
    assert_array_equal(small.v, large.v[:100])


def test_different_seeds_differ():
    params = MarketParams(5, 3)
    eq = solve_closed_form(params)
    a = simulate_paths(params, eq, SimConfig(n_paths=10, seed=1))
    b = simulate_paths(params, eq, SimConfig(n_paths=10, seed=2))
    assert not np.array_equal(a.v, b.v)
    assert not np.array_equal(path_rng(1, 0).random(3), path_rng(1, 1).random(3))


def test_single_path_has_undefined_error(base):
    params, eq = base
    pi_i, pi_m, pi_n = estimate_profits(params, eq, SimConfig(n_paths=1, seed=3))
    rec = simulate_paths(params, eq, SimConfig(n_paths=1, seed=3)).record(0)
    assert math.isnan(pi_i.std_err)
    assert pi_i.mean == pytest.approx(rec.informed_profit(), abs=1e-15)
    assert math.isnan(pi_i.z_score(0.0))


def test_noise_profit_is_residual(ten_round):
    params, eq, _ = ten_round
    pi_i, pi_m, pi_n = estimate_profits(params, eq, SimConfig(n_paths=5000, seed=2))
    assert abs(pi_i.mean + pi_m.mean + pi_n.mean) < 1e-12


def test_profits_close_to_theory_small_sample(ten_round):
    params, eq, _ = ten_round
    pi_i, pi_m, pi_n = estimate_profits(params, eq, SimConfig(n_paths=20_000, seed=9))
    assert pi_i.within(1 / (2 * math.sqrt(3)), n_se=4)
    assert pi_m.within(1 / math.sqrt(3), n_se=4)
    assert pi_n.within(-math.sqrt(3) / 2, n_se=4)


def test_antithetic_unbiased_and_paired():
    params = MarketParams(10, 3)
    eq = solve_closed_form(params)
    cfg = SimConfig(n_paths=20_000, seed=4, antithetic=True)
    batch = simulate_paths(params, eq, cfg)
    half = BLOCK_SIZE
    assert_array_equal(batch.v[:half], -batch.v[half : 2 * half])
    pi_i, pi_m, _ = estimate_profits(params, eq, cfg)
    assert pi_i.within(1 / (2 * math.sqrt(3)), n_se=4)
    assert pi_m.within(1 / math.sqrt(3), n_se=4)


def test_antithetic_needs_even_paths():
    with pytest.raises(ValueError):
        SimConfig(n_paths=3, antithetic=True)


@pytest.mark.parametrize("kw", [{"n_paths": 0}, {"seed": -1}, {"seed": 2**64}, {"n_jobs": 0}])
def test_bad_config(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_price_moments_need_three_rounds():
    params = MarketParams(2, 3)
    with pytest.raises(ValueError):
        estimate_price_moments(params, solve_closed_form(params), SimConfig(n_paths=10))


def test_price_variance_scales_with_volatilities():
    params = MarketParams(50, 3, sigma_v=2, sigma_u=7)
    eq = solve_closed_form(params)
    var_dp, cov_dp, corr = estimate_price_moments(params, eq, SimConfig(n_paths=20_000, seed=8))
    assert var_dp.within(0.16, n_se=4)
    assert cov_dp.within(-4 / 50 / 2, n_se=4)
    assert corr.within(-0.25, n_se=4)


@pytest.mark.parametrize("n_rounds", [10, 200])
def test_autocorrelation_stable_in_horizon(n_rounds):
    params = MarketParams(n_rounds, 4)
    eq = solve_closed_form(params)
    _, _, corr = estimate_price_moments(params, eq, SimConfig(n_paths=10_000, seed=n_rounds))
    assert corr.within(-1 / 6, n_se=4)


def test_posterior_variance_small_sample(base):
    params, eq = base
    est = estimate_posterior_variance(params, eq, SimConfig(n_paths=20_000, seed=6))
    assert len(est) == params.n_rounds + 1
    for e, target in zip(est[:-1], eq.sigma_path[:-1]):
        assert e.within(target, n_se=4)
    assert est[-1].mean < 1e-20


def test_paths_csv(base):
    params, eq = base
    batch = simulate_paths(params, eq, SimConfig(n_paths=5, seed=1))
    buf = io.StringIO()
    rows = write_paths_csv(batch, buf, limit=3)
    lines = buf.getvalue().splitlines()
    assert rows == 3 * params.n_rounds
    assert lines[0] == "path,round,dx,du,dz,dy,price,vbar"
    assert len(lines) == rows + 1
    first = lines[1].split(",")
    assert first[:2] == ["0", "1"]
    assert float(first[6]) == batch.prices[0, 0]
