"""Variance-minimizing hedge ratio, self-financing replication and pricing.

The hedge ratio at t_k is

    eta = (a1 E[D^W f | F_t] + lam_q a3 E[D^N f | F_t])
          / ((a1^2 + lam_q a3^2) exp(int_t^T r) sigma(t, Y_t) S_t)

with lam_q = lambda1 (1 + beta3) the jump intensity under the hedging
measure. Rebalancing happens at every grid step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coeffs import ModelSpec
from .errors import ConfigurationError
from .malliavin import derivative_mode, inner_derivatives, payoff_fn
from .mc import DEFAULT_CHUNK, MCReport, run_chunks
from .simulate import MarketPath, simulate_batch


@dataclass(frozen=True)
class EstimatorConfig:
    """Nested Monte Carlo settings for conditional expectations."""

    n_inner: int = 1000
    seed: int = 0
    kind: str = "call"
    outer_chunk: int = 32
    threads: int | None = 1


@dataclass(frozen=True)
class EtaEstimate:
    value: float
    std_error: float
    cond_dW: MCReport | None
    cond_dN: MCReport | None
    beta3: float
    denominator: float
    mode: str


def _require_emm(shift):
    if shift is None or getattr(shift, "tag", "") != "EMM":
        raise ConfigurationError("pricing and hedging need a shift tagged as a martingale measure")


def _eta_terms(spec: ModelSpec, shift, k: int, S_k, Y_k):
    """(a1, lam_q * a3, denominator) at step k for states (S_k, Y_k)."""
    tb = spec.tables
    t = spec.grid.times[k]
    sig = spec.vol.value(t, Y_k)
    _, _, b3, _ = shift.evaluate(spec, k, Y_k, sig)
    lam_q = tb.lambda1[k] * (1.0 + b3)
    a1, a3 = tb.a1[k], tb.a3[k]
    den = (a1 * a1 + lam_q * a3 * a3) * spec.discount_to_maturity(k) * sig * S_k
    if np.any(den == 0):
        raise ConfigurationError(f"hedge ratio denominator vanishes at step {k}")
    return a1, lam_q * a3, den, b3


def eta_batch(spec: ModelSpec, shift, k: int, S_k, Y_k, outer_ids, config: EstimatorConfig):
    """Optimal hedge ratios for a batch of outer states; returns (eta, se, mean_dW, mean_dN)."""
    S_k = np.asarray(S_k, dtype=float)
    Y_k = np.asarray(Y_k, dtype=float)
    a1, lq3, den, _ = _eta_terms(spec, shift, k, S_k, Y_k)
    need_w, need_n = a1 != 0, np.any(lq3 != 0)
    dw, dn = inner_derivatives(spec, shift, k, S_k, Y_k, outer_ids, config.n_inner, config.seed,
                               need_w=need_w, need_n=bool(need_n), kind=config.kind)
    z = np.zeros((len(S_k), config.n_inner))
    if dw is not None:
        z = z + a1 * dw
    if dn is not None:
        z = z + np.asarray(lq3)[..., None] * dn
    num = z.mean(axis=1)
    se = z.std(axis=1, ddof=1) / math.sqrt(config.n_inner) if config.n_inner > 1 else np.zeros(len(S_k))
    mw = dw.mean(axis=1) if dw is not None else np.zeros(len(S_k))
    mn = dn.mean(axis=1) if dn is not None else np.zeros(len(S_k))
    return num / den, se / np.abs(den), mw, mn


def estimate_eta(spec: ModelSpec, shift, path: MarketPath, t_index: int, config: EstimatorConfig) -> EtaEstimate:
    _require_emm(shift)
    k = t_index
    S_k, Y_k = np.array([path.S[k]]), np.array([path.Y[k]])
    a1, lq3, den, b3 = _eta_terms(spec, shift, k, S_k, Y_k)
    dw, dn = inner_derivatives(spec, shift, k, S_k, Y_k, [path.noise.path_index], config.n_inner, config.seed,
                               need_w=a1 != 0, need_n=bool(np.any(lq3 != 0)), kind=config.kind)
    z = np.zeros(config.n_inner)
    rep_w = rep_n = None
    if dw is not None:
        z = z + a1 * dw[0]
        rep_w = MCReport.from_samples(dw[0], config.seed)
    if dn is not None:
        z = z + float(lq3[0]) * dn[0]
        rep_n = MCReport.from_samples(dn[0], config.seed)
    num = MCReport.from_samples(z, config.seed)
    d = float(den[0])
    return EtaEstimate(num.estimate / d, num.std_error / abs(d), rep_w, rep_n, float(np.asarray(b3).ravel()[0]), d,
                       derivative_mode(spec, shift))


def optimal_eta(spec: ModelSpec, shift, path: MarketPath, t_index: int, config: EstimatorConfig) -> float:
    return estimate_eta(spec, shift, path, t_index, config).value


def h2(x, cond_dW, cond_dN, a1, a3, lam_q, growth, sig, S):
    """x-dependent part of the convex objective whose minimizer is the hedge ratio.

    ``growth`` is exp(int_t^T r). The second-direction terms do not depend on
    x and are left out.
    """
    unit = growth * sig * x * S
    return (cond_dW - unit * a1) ** 2 + lam_q * (cond_dN - unit * a3) ** 2


def h2_objective(spec: ModelSpec, shift, path: MarketPath, t_index: int, x, config: EstimatorConfig | None = None,
                 estimate: EtaEstimate | None = None):
    """h2 at ``x`` with frozen conditional expectations (estimated unless given)."""
    if estimate is None:
        estimate = estimate_eta(spec, shift, path, t_index, config or EstimatorConfig())
    k = t_index
    tb = spec.tables
    sig = float(spec.vol.value(spec.grid.times[k], path.Y[k]))
    cw = estimate.cond_dW.estimate if estimate.cond_dW else 0.0
    cn = estimate.cond_dN.estimate if estimate.cond_dN else 0.0
    lam_q = tb.lambda1[k] * (1 + estimate.beta3)
    return h2(x, cw, cn, tb.a1[k], tb.a3[k], lam_q, spec.discount_to_maturity(k), sig, path.S[k])


# ---------------------------------------------------------------- replication

@dataclass(frozen=True, eq=False)
class HedgePlan:
    eta: np.ndarray
    zeta: np.ndarray
    V: np.ndarray
    V0: float
    A: np.ndarray = field(repr=False)


def bank_account(spec: ModelSpec) -> np.ndarray:
    return np.exp(spec.rate_integral)


def replicate(
    spec: ModelSpec,
    path: MarketPath,
    V0: float,
    eta: np.ndarray | Callable[[int, MarketPath], float],
) -> HedgePlan:
    """Self-financing portfolio along ``path``; eta[k] is held over step k."""
    n = spec.grid.n_steps
    A = bank_account(spec)
    if callable(eta):
        eta = np.array([eta(k, path) for k in range(n)], dtype=float)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (n,):
        raise ValueError(f"eta must have {n} entries")
    V = np.empty(n + 1)
    zeta = np.empty(n)
    V[0] = V0
    S = path.S
    for k in range(n):
        zeta[k] = (V[k] - eta[k] * S[k]) / A[k]
        V[k + 1] = zeta[k] * A[k + 1] + eta[k] * S[k + 1]
    return HedgePlan(eta, zeta, V, float(V0), A)


def optimal_plan(spec: ModelSpec, shift, path: MarketPath, V0: float, config: EstimatorConfig) -> HedgePlan:
    return replicate(spec, path, V0, lambda k, p: optimal_eta(spec, shift, p, k, config))


# ---------------------------------------------------------------- pricing

def price(spec: ModelSpec, shift, n_paths: int, seed: int, kind: str = "call", chunk: int = DEFAULT_CHUNK,
          threads: int | None = 1) -> MCReport:
    """E_Q[exp(-int_0^T r) f(S_T)] at t = 0."""
    _require_emm(shift)
    f = payoff_fn(kind, spec.strike)
    disc = math.exp(-spec.rate_integral[-1])

    def work(a, b):
        return disc * f(simulate_batch(spec, shift, seed, a, b).S[:, -1])

    return MCReport.from_samples(run_chunks(work, n_paths, chunk, threads), seed)


def discounted_price_samples(spec: ModelSpec, shift, n_paths: int, seed: int, indices: Sequence[int],
                             chunk: int = DEFAULT_CHUNK, threads: int | None = 1) -> np.ndarray:
    """exp(-int_0^{t_k} r) S_{t_k} for each grid index in ``indices``; shape (len(indices), n_paths)."""
    idx = np.asarray(indices)
    disc = np.exp(-spec.rate_integral[idx])[:, None]

    def work(a, b):
        return disc * simulate_batch(spec, shift, seed, a, b).S[:, idx].T

    return run_chunks(work, n_paths, chunk, threads)


# ---------------------------------------------------------------- strategy comparison

@dataclass(frozen=True)
class Strategy:
    """Maps (optimal eta, k, S_k, Y_k) to the position held over step k."""

    name: str
    fn: Callable
    needs_optimal: bool = True

    @classmethod
    def optimal(cls):
        return cls("optimal", lambda e, k, S, Y: e)

    @classmethod
    def scaled(cls, c: float):
        return cls(f"optimal*{c:g}", lambda e, k, S, Y: c * e)

    @classmethod
    def offset(cls, d: float):
        return cls(f"optimal{d:+g}", lambda e, k, S, Y: e + d)

    @classmethod
    def constant(cls, v: float):
        return cls(f"constant{v:g}", lambda e, k, S, Y: np.full(np.shape(S), float(v)), needs_optimal=False)


def default_perturbations() -> list[Strategy]:
    return [Strategy.scaled(0.8), Strategy.scaled(1.2), Strategy.offset(-0.1), Strategy.offset(0.1),
            Strategy.scaled(0.5)]


@dataclass(frozen=True, eq=False)
class StrategyComparison:
    """Hedging errors of several strategies on common paths."""

    price: MCReport
    strategies: list[str]
    reports: list[MCReport]
    errors: np.ndarray   # f(S_T) - V_T, (n_strategies, n_paths)
    eta0: np.ndarray     # optimal eta at t = 0 per path (nan if not computed)

    @property
    def sq_errors(self) -> np.ndarray:
        return self.errors ** 2

    def paired_diff(self, i: int, j: int) -> MCReport:
        """Mean and SE of sq_error[i] - sq_error[j] over the common paths."""
        return MCReport.from_samples(self.sq_errors[i] - self.sq_errors[j], self.price.seed)


def compare_strategies(
    spec: ModelSpec,
    shift,
    strategies: Sequence[Strategy],
    n_paths: int,
    seed: int,
    config: EstimatorConfig,
    V0: float | None = None,
) -> StrategyComparison:
    """E_Q[(f(S_T) - V_T)^2] for each strategy on the same outer paths.

    V_T is affine in V0, so per-path gains are accumulated with V0 = 0 and the
    initial capital (the Monte Carlo price of the same paths unless given) is
    added afterwards.
    """
    _require_emm(shift)
    n = spec.grid.n_steps
    A = bank_account(spec)
    f = payoff_fn(config.kind, spec.strike)
    need = any(s.needs_optimal for s in strategies)

    def work(a, b):
        batch = simulate_batch(spec, shift, seed, a, b)
        gains = np.zeros((len(strategies), b - a))
        eta0 = np.full(b - a, np.nan)
        for k in range(n):
            S_k, Y_k = batch.S[:, k], batch.Y[:, k]
            e = eta_batch(spec, shift, k, S_k, Y_k, batch.index, config)[0] if need else None
            if k == 0 and e is not None:
                eta0 = e
            # value change of a unit position, carried to T in the bank account
            move = (batch.S[:, k + 1] - S_k * A[k + 1] / A[k]) * (A[-1] / A[k + 1])
            for i, s in enumerate(strategies):
                gains[i] += s.fn(e, k, S_k, Y_k) * move
        return f(batch.S[:, -1]), gains, eta0

    payoff, gains, eta0 = run_chunks(work, n_paths, config.outer_chunk, config.threads)
    disc = 1.0 / A[-1]
    pr = MCReport.from_samples(disc * payoff, seed)
    v0 = pr.estimate if V0 is None else float(V0)
    errs = payoff - v0 * A[-1] - gains
    reports = [MCReport.from_samples(e * e, seed) for e in errs]
    return StrategyComparison(pr, [s.name for s in strategies], reports, errs, eta0)


def hedging_error_variance(spec: ModelSpec, shift, strategy: Strategy, n_paths: int, seed: int,
                           config: EstimatorConfig) -> MCReport:
    return compare_strategies(spec, shift, [strategy], n_paths, seed, config).reports[0]
