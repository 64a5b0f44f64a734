import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from jumpsv import ConstantVol, ModelSpec, ModelViolation, SolverError, TimeGrid, evolve, gen_noise
from jumpsv.measure import (DensityPath, GirsanovShift, build_min_entropy_shift, constant_shift, doleans_exponential,
                            emm_residual, entropy_samples, max_emm_residual, min_entropy_drift_log_s,
                            pointwise_objective, random_emm_alternatives, relative_entropy, solve_beta3_array,
                            solve_min_entropy_beta3, terminal_density)
from jumpsv.simulate import simulate_batch

import oracles
from models import SIGMOID, brownian, mixed, pure_poisson

# bisection oracle for lambda=1, sigma=0.2, a3=0.1, a1=1, r-mu=0.02
ROOT_FIXTURE = 0.009999000199949974


def const_spec(mu=0.05, r=0.0, a1=1.0, a3=0.1, lam=1.0, sig=0.2, n=10):
    return ModelSpec(TimeGrid(1.0, n), 100.0, 0.0, 100.0, ConstantVol(sig), mu=mu, r=r, a1=a1, a3=a3,
                     lambda1=lam)


# ---------------------------------------------------------------- densities

def test_zero_shift_density_is_one():
    spec = mixed(n=20)
    rho = doleans_exponential(spec, constant_shift(), evolve(spec, gen_noise(spec.grid, 1.0, 1.0, seed=0))).rho
    np.testing.assert_array_equal(rho, np.ones(21))


def test_density_closed_form_for_constant_shift():
    spec = mixed(n=40, lambda1=2.0)
    g1, g3 = 0.3, 0.5
    path = evolve(spec, gen_noise(spec.grid, 2.0, 1.0, seed=4))
    rho = doleans_exponential(spec, constant_shift(b1=g1, b3=g3), path).rho
    t = spec.grid.times
    W = np.concatenate([[0.0], np.cumsum(path.noise.dW1)])
    N = np.concatenate([[0], np.cumsum(path.noise.dN1)])
    exact = np.exp(g1 * W - 0.5 * g1 * g1 * t) * (1 + g3) ** N * np.exp(-2.0 * g3 * t)
    np.testing.assert_allclose(rho, exact, rtol=1e-12)


def test_poisson_exponential_oracle_has_mean_one():
    lam, g, T = 1.0, 0.5, 1.0
    assert oracles.poisson_expectation(lambda n: (1 + g) ** n * math.exp(-lam * g * T), lam * T) == \
        pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("shift", [constant_shift(b1=0.3), constant_shift(b3=0.5)])
def test_density_mean_one(shift):
    rep = terminal_density(mixed(n=8, lambda1=1.0), shift, 100_000, seed=3)
    assert abs(rep.estimate - 1.0) < 3 * rep.std_error


def test_density_path_must_be_positive():
    with pytest.raises(ValueError):
        DensityPath(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        DensityPath(np.array([2.0, 1.0]))


# ---------------------------------------------------------------- martingale relation

def test_residual_zero_when_risk_neutral():
    spec = const_spec(mu=0.03, r=0.03)
    assert emm_residual(spec, constant_shift(), 0.5, 0.0) == 0.0


def test_residual_zero_for_market_price_of_risk():
    spec = const_spec(mu=0.08, r=0.03, a3=0.0)
    assert emm_residual(spec, constant_shift(b1=-(0.08 - 0.03) / 0.2), 0.5, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_residual_arithmetic():
    spec = const_spec(mu=0.05, r=0.0, a1=1.0, a3=0.1, lam=1.0, sig=0.2)
    assert emm_residual(spec, constant_shift(b1=0.1, b3=0.5), 0.3, 0.0) == pytest.approx(0.08, abs=1e-15)


def test_emm_tag_enforces_relation():
    spec = const_spec()
    bad = GirsanovShift(0.1, 0.0, 0.0, 0.0, tag="EMM")
    with pytest.raises(ModelViolation):
        bad.evaluate(spec, 0, 0.0)


def test_shift_rejects_intensity_below_zero():
    with pytest.raises(ModelViolation):
        constant_shift(b3=-1.0).evaluate(const_spec(), 2, 0.0)


# ---------------------------------------------------------------- root solver

def test_root_fixture_matches_bisection():
    assert oracles.bisect_beta3(1.0, 0.2, 1.0, 0.1, 0.02) == pytest.approx(ROOT_FIXTURE, abs=1e-12)
    x, deg, _ = solve_beta3_array(1.0, 0.2, 1.0, 0.1, 0.02)
    assert not deg
    assert float(x) == pytest.approx(ROOT_FIXTURE, abs=1e-12)


def test_root_zero_when_risk_neutral():
    spec = const_spec(mu=0.03, r=0.03)
    assert solve_min_entropy_beta3(spec, 0.2, 0.0).value == 0.0


def test_root_linear_when_no_brownian_part():
    root = solve_min_entropy_beta3(const_spec(mu=0.05, r=0.02, a1=0.0, a3=0.7, lam=2.0, sig=0.3), 0.0, 0.0)
    assert root.value == pytest.approx((0.02 - 0.05) / (2.0 * 0.3 * 0.7), rel=1e-14)
    assert root.value == pytest.approx(oracles.bisect_beta3(2.0, 0.3, 0.0, 0.7, -0.03), abs=1e-12)


def test_root_degenerate_without_jumps():
    root = solve_min_entropy_beta3(const_spec(a3=0.0), 0.0, 0.0)
    assert root.value == 0.0 and root.degenerate


def test_solver_gives_up_loudly():
    with pytest.raises(SolverError):
        solve_beta3_array(1.0, 0.2, 1.0, 0.1, 0.02, tol=0.0, max_iter=2)


coef = st.floats(0.05, 3.0)


@settings(max_examples=300, deadline=None)
@given(lam=coef, sig=st.floats(-0.8, 0.8), a1=st.floats(-2, 2), a3=st.floats(-2, 2), rmu=st.floats(-0.5, 0.5))
def test_root_matches_oracles(lam, sig, a1, a3, rmu):
    assume(abs(sig) > 1e-2 and abs(a3) > 1e-2 and abs(a1) > 1e-3)
    x, _, _ = solve_beta3_array(lam, sig, a1, a3, rmu)
    assume(x > -1 + 1e-6)
    assert float(x) == pytest.approx(oracles.bisect_beta3(lam, sig, a1, a3, rmu), abs=1e-10)
    assert float(x) == pytest.approx(oracles.quadratic_beta3(lam, sig, a1, a3, rmu), rel=1e-9, abs=1e-10)
    assert abs(oracles.entropy_lhs(float(x), lam, sig, a1, a3, rmu)) < 1e-11


def test_root_is_vectorized():
    rng = np.random.default_rng(0)
    lam, sig = rng.uniform(0.1, 2, 50), rng.uniform(0.05, 0.5, 50)
    a1, a3, rmu = rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50), rng.uniform(-0.1, 0.1, 50)
    x, _, _ = solve_beta3_array(lam, sig, a1, a3, rmu)
    for i in range(50):
        assert x[i] == pytest.approx(float(solve_beta3_array(lam[i], sig[i], a1[i], a3[i], rmu[i])[0]), abs=1e-13)


# ---------------------------------------------------------------- minimal-entropy shift

def test_min_entropy_shift_is_zero_when_risk_neutral():
    spec = mixed(mu=0.03, r=0.03)
    sh = build_min_entropy_shift(spec)
    for y in (-1.0, 0.0, 2.0):
        assert [float(b) for b in sh.evaluate(spec, 3, y)] == [0.0, 0.0, 0.0, 0.0]


def test_min_entropy_brownian_case():
    spec = brownian()
    y = np.linspace(-2, 2, 9)
    b1, b2, b3, b4 = build_min_entropy_shift(spec).evaluate(spec, 5, y)
    np.testing.assert_allclose(b1, (0.03 - 0.08) / SIGMOID.value(0, y), rtol=1e-15)
    assert np.all(np.asarray(b3) == 0) and b2 == 0 and b4 == 0


def test_min_entropy_poisson_case_and_log_drift():
    spec = pure_poisson(lambda1=1.3)
    y = np.linspace(-2, 2, 9)
    sig = SIGMOID.value(0, y)
    _, _, b3, _ = build_min_entropy_shift(spec).evaluate(spec, 2, y)
    np.testing.assert_allclose(b3, (0.03 - 0.08) / (1.3 * sig), rtol=1e-14)
    drift = min_entropy_drift_log_s(spec, 2, y)
    display = 0.08 + (0.03 - 0.08) / sig * np.log1p(sig)
    # the displayed exponent leaves out the compensator difference lambda (log(1 + sigma) - sigma)
    np.testing.assert_allclose(drift, display + 1.3 * (np.log1p(sig) - sig), rtol=1e-13)
    lam_q = 1.3 * (1 + b3)
    np.testing.assert_allclose(drift - lam_q * np.log1p(sig) + lam_q * sig, 0.03, rtol=1e-13)


@pytest.mark.parametrize("make", [brownian, pure_poisson, mixed])
def test_min_entropy_satisfies_relation_on_paths(make):
    spec = make(n=16)
    sh = build_min_entropy_shift(spec)
    assert max_emm_residual(spec, sh, simulate_batch(spec, sh, 2, 0, 500)) < 1e-12


def test_root_minimizes_pointwise_objective():
    rng = np.random.default_rng(11)
    xs = np.linspace(-0.95, 3.0, 4001)
    for _ in range(20):
        mu_r, lam1, lam2 = rng.uniform(-0.2, 0.2), rng.uniform(0.2, 3), rng.uniform(0.2, 3)
        a1, a3, sig = rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5), rng.uniform(0.1, 0.5)
        root = float(solve_beta3_array(lam1, sig, a1, a3, -mu_r)[0])
        grid = pointwise_objective(xs[:, None], xs[None, :], mu_r, lam1, lam2, a1, a3, sig)
        i, j = np.unravel_index(np.argmin(grid), grid.shape)
        assert abs(xs[i] - root) <= 2 * (xs[1] - xs[0])
        assert abs(xs[j]) <= 2 * (xs[1] - xs[0])


# ---------------------------------------------------------------- relative entropy

def test_entropy_of_zero_shift_is_zero():
    assert relative_entropy(mixed(n=8), constant_shift(), 100, seed=0).estimate == 0.0


def test_entropy_of_constant_brownian_shift():
    rep = relative_entropy(mixed(n=8), constant_shift(b1=0.4), 1000, seed=0)
    assert rep.estimate == pytest.approx(0.4**2 / 2, rel=1e-12)


def test_min_entropy_beats_alternatives():
    spec = mixed(n=8)
    shifts = [build_min_entropy_shift(spec)] + random_emm_alternatives(spec, 10, seed=1)
    for s in shifts[1:]:
        assert max_emm_residual(spec, s, simulate_batch(spec, None, 0, 0, 200)) < 1e-12
    E = entropy_samples(spec, shifts, 5000, seed=2)
    m = E.mean(axis=1)
    assert np.argmin(m) == 0
    assert np.all(E[0] >= 0)


def test_alternatives_accept_an_offset_grid():
    spec = mixed(n=4)
    alts = random_emm_alternatives(spec, 0, seed=1, offsets=[-0.2, 0.1, 0.3])
    assert len(alts) == 3
    y = 0.4
    b3_hat = build_min_entropy_shift(spec).evaluate(spec, 0, y)[2]
    assert float(alts[1].evaluate(spec, 0, y)[2]) == pytest.approx(float(b3_hat) + 0.1)
