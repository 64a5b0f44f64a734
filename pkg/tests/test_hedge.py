import math

import numpy as np
import pytest

from jumpsv import ConfigurationError, ConstantVol, evolve, gen_noise
from jumpsv.hedge import (EstimatorConfig, Strategy, compare_strategies, default_perturbations, estimate_eta, h2,
                          h2_objective, optimal_eta, price, replicate)
from jumpsv.mc import combined_se
from jumpsv.measure import build_min_entropy_shift, constant_shift

import oracles
from models import black_scholes, brownian, mixed, pure_poisson


def start_path(spec, shift, seed=0):
    return evolve(spec, gen_noise(spec.grid, 1.0, 1.0, seed=seed), shift)


def test_eta_black_scholes_delta():
    spec = black_scholes(n=16)
    sh = build_min_entropy_shift(spec)
    est = estimate_eta(spec, sh, start_path(spec, sh), 0, EstimatorConfig(n_inner=50_000, seed=1))
    assert est.mode == "closed-form"
    assert abs(est.value - oracles.bs_delta(100, 100, 1, 0, 0.2)) < 3 * est.std_error


def test_eta_deep_out_of_the_money_is_zero():
    spec = mixed(n=8, strike=1e5)
    sh = build_min_entropy_shift(spec)
    assert optimal_eta(spec, sh, start_path(spec, sh), 0, EstimatorConfig(n_inner=200)) == 0.0


def test_eta_pure_poisson_intensity_cancels():
    spec = pure_poisson(n=8)
    sh = build_min_entropy_shift(spec)
    path = start_path(spec, sh, seed=3)
    k = 2
    est = estimate_eta(spec, sh, path, k, EstimatorConfig(n_inner=2000, seed=4))
    sig = spec.vol.value(0.0, path.Y[k])
    direct = est.cond_dN.estimate / (spec.discount_to_maturity(k) * sig * path.S[k])
    assert est.value == pytest.approx(direct, rel=1e-12)
    assert est.cond_dW is None


def test_eta_needs_martingale_measure():
    spec = mixed(n=4)
    with pytest.raises(ConfigurationError):
        estimate_eta(spec, constant_shift(b1=0.1), start_path(spec, None), 0, EstimatorConfig(n_inner=10))
    with pytest.raises(ConfigurationError):
        price(spec, None, 10, 0)


@pytest.mark.parametrize("make", [mixed, pure_poisson, brownian])
def test_eta_minimizes_h2(make):
    spec = make(n=8)
    sh = build_min_entropy_shift(spec)
    path = start_path(spec, sh, seed=2)
    est = estimate_eta(spec, sh, path, 3, EstimatorConfig(n_inner=500, seed=0))
    x = est.value
    d = 1e-3 * abs(x) + 1e-6
    h0 = h2_objective(spec, sh, path, 3, x, estimate=est)
    assert h2_objective(spec, sh, path, 3, x + d, estimate=est) >= h0
    assert h2_objective(spec, sh, path, 3, x - d, estimate=est) >= h0


def test_h2_parabola_without_jumps():
    cw, growth, sig, S, a1 = 3.0, 1.05, 0.2, 90.0, 0.8
    xs = np.linspace(-1, 1, 2001)
    vals = h2(xs, cw, 0.0, a1, 0.0, 1.0, growth, sig, S)
    vertex = cw / (growth * sig * S * a1)
    assert xs[np.argmin(vals)] == pytest.approx(vertex, abs=1e-3)
    assert h2(vertex, cw, 0.0, a1, 0.0, 1.0, growth, sig, S) == pytest.approx(0.0, abs=1e-24)


def test_h2_zero_inputs_minimized_at_zero():
    xs = np.linspace(-1, 1, 11)
    vals = h2(xs, 0.0, 0.0, 1.0, 0.5, 1.0, 1.0, 0.2, 100.0)
    assert vals[5] == 0.0 and np.all(vals >= 0)


def test_replicate_bank_only():
    spec = brownian(n=10)
    path = start_path(spec, None)
    plan = replicate(spec, path, 5.0, np.zeros(10))
    assert plan.V[-1] == pytest.approx(5.0 * math.exp(0.03), rel=1e-14)


def test_replicate_buy_and_hold():
    spec = mixed(n=10, r=0.0, mu=0.0)
    path = start_path(spec, None)
    plan = replicate(spec, path, spec.s0, np.ones(10))
    np.testing.assert_allclose(plan.V, path.S, rtol=1e-13)
    np.testing.assert_allclose(plan.zeta, 0.0, atol=1e-12)


def test_replicate_accepts_a_rule():
    spec = mixed(n=6)
    path = start_path(spec, None)
    a = replicate(spec, path, 1.0, lambda k, p: 0.1 * k)
    b = replicate(spec, path, 1.0, 0.1 * np.arange(6))
    np.testing.assert_array_equal(a.V, b.V)


def test_price_black_scholes():
    spec = black_scholes(n=32)
    rep = price(spec, build_min_entropy_shift(spec), 40_000, seed=2)
    assert abs(rep.estimate - oracles.bs_call(100, 100, 1, 0, 0.2)) < 3 * rep.std_error


@pytest.mark.parametrize("make", [brownian, pure_poisson, mixed])
def test_zero_strike_prices_the_asset(make):
    spec = make(n=16, strike=0.0)
    rep = price(spec, build_min_entropy_shift(spec), 40_000, seed=1)
    assert abs(rep.estimate - 100.0) < 3 * rep.std_error


def test_tiny_vol_out_of_the_money_is_worthless():
    spec = black_scholes(n=8, vol=1e-4).with_(s0=90.0)
    assert price(spec, build_min_entropy_shift(spec), 1000, seed=0).estimate == 0.0


def test_put_call_parity_small():
    spec = mixed(n=16)
    sh = build_min_entropy_shift(spec)
    c = price(spec, sh, 40_000, seed=5, kind="call")
    p = price(spec, sh, 40_000, seed=5, kind="put")
    assert abs(c.estimate - p.estimate - (100.0 - 100.0 * math.exp(-0.03))) < 3 * combined_se(c, p)


def test_unhedged_error_is_payoff_variance():
    spec = mixed(n=8)
    sh = build_min_entropy_shift(spec)
    cmp_ = compare_strategies(spec, sh, [Strategy.constant(0.0)], 300, seed=3, config=EstimatorConfig(n_inner=10))
    payoff = cmp_.errors[0] + cmp_.price.estimate * math.exp(0.03)
    assert cmp_.reports[0].estimate == pytest.approx(np.var(payoff), rel=1e-10)


def test_complete_market_hedge():
    spec = black_scholes(n=16)
    sh = build_min_entropy_shift(spec)
    cfg = EstimatorConfig(n_inner=400, seed=1)
    fine = compare_strategies(spec, sh, [Strategy.optimal(), Strategy.constant(0.0)], 200, seed=2, config=cfg,
                              V0=oracles.bs_call(100, 100, 1, 0, 0.2))
    err = fine.errors[0]
    assert abs(err.mean()) < 3 * err.std(ddof=1) / math.sqrt(err.size)
    # the hedge removes most of the payoff variance
    assert fine.reports[0].estimate < 0.1 * fine.reports[1].estimate
    coarse = compare_strategies(black_scholes(n=4), build_min_entropy_shift(black_scholes(n=4)),
                                [Strategy.optimal()], 200, seed=2, config=cfg)
    assert fine.reports[0].estimate < coarse.reports[0].estimate


def test_optimal_beats_perturbed_small():
    spec = pure_poisson(n=4)
    sh = build_min_entropy_shift(spec)
    strategies = [Strategy.optimal()] + default_perturbations()
    cmp_ = compare_strategies(spec, sh, strategies, 300, seed=1, config=EstimatorConfig(n_inner=300, seed=1))
    assert cmp_.strategies[1:] == ["optimal*0.8", "optimal*1.2", "optimal-0.1", "optimal+0.1", "optimal*0.5"]
    best = cmp_.reports[0].estimate
    assert all(best < r.estimate for r in cmp_.reports[1:])


def test_comparison_is_thread_independent():
    spec = mixed(n=4)
    sh = build_min_entropy_shift(spec)
    strategies = [Strategy.optimal(), Strategy.scaled(0.5)]
    one = compare_strategies(spec, sh, strategies, 40, seed=1, config=EstimatorConfig(n_inner=50, outer_chunk=8))
    many = compare_strategies(spec, sh, strategies, 40, seed=1,
                              config=EstimatorConfig(n_inner=50, outer_chunk=8, threads=4))
    np.testing.assert_array_equal(one.errors, many.errors)
    np.testing.assert_array_equal(one.eta0, many.eta0)


def test_constant_vol_brownian_uses_black_scholes_delta_along_path():
    spec = black_scholes(n=8, vol=0.3, r=0.02)
    sh = build_min_entropy_shift(spec)
    path = start_path(spec, sh, seed=9)
    k = 4
    est = estimate_eta(spec, sh, path, k, EstimatorConfig(n_inner=40_000, seed=2))
    tau = 1.0 - spec.grid.times[k]
    assert abs(est.value - oracles.bs_delta(path.S[k], 100, tau, 0.02, 0.3)) < 3 * est.std_error
    assert isinstance(spec.vol, ConstantVol)
