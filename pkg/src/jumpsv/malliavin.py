"""Malliavin derivatives of the option payoff and their conditional expectations.

Brownian direction (pure-Brownian configuration, a3 = a4 = 0, under the
minimal-entropy measure): with c_u = sigma1_u (r_u - mu_u) dsigma/dy / sigma^2,

    D_t Y_s = sigma1_t a1_t exp(-int_t^s c_u du)
    D_t log S_T = a1_t sigma_t + int_t^T a1 sigma_y D_t Y_s dW_s
                  - int_t^T a1^2 sigma sigma_y D_t Y_s ds

On the grid the step carrying the bump (t_k, t_{k+1}) contributes only
a1_k sigma_k, since Y_k does not depend on that step's increment.

Poisson direction: the add-one-jump operator, F(path with one more N1 jump in
step k) - F(path), every other increment held fixed.

Other configurations use a central finite-difference bump of the Brownian
increment ("numerical" mode).
"""

from __future__ import annotations

from dataclasses import replace
from typing import Callable

import numpy as np

from .coeffs import ModelSpec
from .errors import ConfigurationError
from .mc import MCReport
from .simulate import MarketPath, draw_inner, evolve, evolve_arrays

BUMP = 1e-5


def payoff_fn(kind: str, strike: float) -> Callable[[np.ndarray], np.ndarray]:
    if kind == "call":
        return lambda s: np.maximum(s - strike, 0.0)
    if kind == "put":
        return lambda s: np.maximum(strike - s, 0.0)
    raise ValueError(f"unknown payoff {kind!r}")


def _payoff_slope(kind: str, strike: float, s):
    if kind == "call":
        return np.where(s > strike, 1.0, 0.0)
    return np.where(s < strike, -1.0, 0.0)


def is_brownian_config(spec: ModelSpec, shift) -> bool:
    tb = spec.tables
    return (bool(np.all(tb.a3 == 0) and np.all(tb.a4 == 0) and np.all(tb.a1 != 0))
            and getattr(shift, "min_entropy", False))


def derivative_mode(spec: ModelSpec, shift) -> str:
    """'closed-form' when every needed derivative has an exact grid form, else 'numerical'."""
    if np.all(spec.tables.a1 == 0) or is_brownian_config(spec, shift):
        return "closed-form"
    return "numerical"


def _require_brownian(spec, shift):
    if not is_brownian_config(spec, shift):
        raise ConfigurationError(
            "closed-form Brownian derivative needs a3 = a4 = 0, a1 != 0 and the minimal-entropy shift")


# ---------------------------------------------------------------- Brownian

def dY_closed(spec: ModelSpec, k: int, Y_seg: np.ndarray) -> np.ndarray:
    """D_{t_k} Y_{t_{k+j}} for j = 0..m given Y_seg = (Y_k .. Y_{k+m}), shape (..., m + 1)."""
    tb, dt, times = spec.tables, spec.grid.dt, spec.grid.times
    m = Y_seg.shape[-1] - 1
    out = np.empty(Y_seg.shape)
    base = tb.sigma1_y[k] * tb.a1[k]
    out[..., 0] = base
    acc = np.zeros(Y_seg.shape[:-1])
    for j in range(1, m + 1):
        out[..., j] = base * np.exp(-acc)
        if j < m:
            i = k + j
            y = Y_seg[..., j]
            sig = spec.vol.value(times[i], y)
            acc = acc + tb.sigma1_y[i] * (tb.r[i] - tb.mu[i]) * spec.vol.dy(times[i], y) / (sig * sig) * dt
    return out


def brownian_derivative_Y(spec: ModelSpec, shift, path: MarketPath, t_index: int, s_index: int) -> float:
    _require_brownian(spec, shift)
    if not 0 <= t_index <= s_index <= spec.grid.n_steps:
        raise ValueError("need 0 <= t_index <= s_index <= n_steps")
    return float(dY_closed(spec, t_index, path.Y[t_index:s_index + 1])[-1])


def dW_payoff_closed(spec: ModelSpec, k: int, S_T, Y_seg, dW_seg, kind: str = "call"):
    """Closed-form D_{t_k} f(S_T) for paths given from step k on (batched)."""
    tb, dt, times = spec.tables, spec.grid.dt, spec.grid.times
    m = dW_seg.shape[-1]
    DY = dY_closed(spec, k, Y_seg)
    dlog = tb.a1[k] * spec.vol.value(times[k], Y_seg[..., 0])
    for j in range(1, m):
        i = k + j
        y = Y_seg[..., j]
        sy = spec.vol.dy(times[i], y)
        sig = spec.vol.value(times[i], y)
        a1 = tb.a1[i]
        dlog = dlog + a1 * sy * DY[..., j] * (dW_seg[..., j] - a1 * sig * dt)
    return _payoff_slope(kind, spec.strike, S_T) * S_T * dlog


def brownian_derivative_payoff(spec: ModelSpec, shift, path: MarketPath, t_index: int, kind: str = "call") -> float:
    _require_brownian(spec, shift)
    if not 0 <= t_index < spec.grid.n_steps:
        raise ValueError("t_index must be a step index")
    k = t_index
    return float(dW_payoff_closed(spec, k, path.S[-1], path.Y[k:], path.noise.dW1[k:], kind))


def dW_payoff_bump(spec: ModelSpec, shift, k: int, S_k, Y_k, dW1, dW2, dN1, dN2, kind: str = "call", eps: float = BUMP):
    """Central difference of f(S_T) in the first Brownian increment of step k (counts held fixed)."""
    f = payoff_fn(kind, spec.strike)
    vals = []
    for sgn in (1.0, -1.0):
        w = dW1.copy()
        w[..., 0] += sgn * eps
        ev = evolve_arrays(spec, shift, k, S_k, Y_k, w, dW2, dN1=dN1, dN2=dN2)
        vals.append(f(ev.S[..., -1]))
    return (vals[0] - vals[1]) / (2 * eps)


# ---------------------------------------------------------------- Poisson

def dN_payoff_shift(spec: ModelSpec, shift, k: int, S_k, Y_k, dW1, dW2, dN1, dN2, f_base, kind: str = "call"):
    """Add-one-jump difference for paths given from step k on (batched)."""
    n1 = dN1.copy()
    n1[..., 0] += 1
    ev = evolve_arrays(spec, shift, k, S_k, Y_k, dW1, dW2, dN1=n1, dN2=dN2)
    return payoff_fn(kind, spec.strike)(ev.S[..., -1]) - f_base


def poisson_shift_payoff(
    spec: ModelSpec,
    shift,
    path: MarketPath,
    t_index: int,
    functional: Callable[[MarketPath], float] | None = None,
) -> float:
    """F(path + one N1 jump in step t_index) - F(path); F defaults to the call payoff."""
    if not 0 <= t_index < spec.grid.n_steps:
        raise ValueError("t_index must be a step index")
    if functional is None:
        functional = lambda p: float(max(p.S[-1] - spec.strike, 0.0))
    dN1 = path.noise.dN1.copy()
    dN1[t_index] += 1
    bumped = evolve(spec, replace(path.noise, dN1=dN1), shift, fixed_counts=True)
    base = evolve(spec, path.noise, shift, fixed_counts=True)
    return functional(bumped) - functional(base)


# ---------------------------------------------------------------- conditional expectations

def inner_derivatives(
    spec: ModelSpec,
    shift,
    k: int,
    S_k: np.ndarray,
    Y_k: np.ndarray,
    outer_ids,
    n_inner: int,
    seed: int,
    need_w: bool = True,
    need_n: bool = True,
    kind: str = "call",
    mode: str | None = None,
):
    """Nested simulation from states (S_k, Y_k) of a batch of outer paths.

    Returns per-inner-path derivative samples ``(dW, dN)``, each of shape
    (B, n_inner) or None when not requested.
    """
    n = spec.grid.n_steps
    if not 0 <= k < n:
        raise ValueError("t_index must be a step index")
    m = n - k
    S_k = np.asarray(S_k, dtype=float)[:, None]
    Y_k = np.asarray(Y_k, dtype=float)[:, None]
    dW1, dW2, u1, u2 = draw_inner(seed, outer_ids, k, n_inner, m, spec.grid.dt)
    ev = evolve_arrays(spec, shift, k, S_k, Y_k, dW1, dW2, u1, u2)
    S_T = ev.S[..., -1]
    mode = mode or derivative_mode(spec, shift)
    dw = dn = None
    if need_w:
        if mode == "closed-form" and is_brownian_config(spec, shift):
            dw = dW_payoff_closed(spec, k, S_T, ev.Y, dW1, kind)
        else:
            dw = dW_payoff_bump(spec, shift, k, S_k, Y_k, dW1, dW2, ev.dN1, ev.dN2, kind)
    if need_n:
        f_base = payoff_fn(kind, spec.strike)(S_T)
        dn = dN_payoff_shift(spec, shift, k, S_k, Y_k, dW1, dW2, ev.dN1, ev.dN2, f_base, kind)
    return dw, dn


def cond_expect_derivative(
    spec: ModelSpec,
    shift,
    outer_path: MarketPath,
    t_index: int,
    which: str,
    n_inner: int,
    seed: int,
    kind: str = "call",
) -> MCReport:
    """E[D_t f(S_T) | F_t] by nested Monte Carlo; ``which`` is 'dW1' or 'dN1'."""
    if which not in ("dW1", "dN1"):
        raise ValueError("which must be 'dW1' or 'dN1'")
    if n_inner < 1:
        raise ValueError("n_inner must be positive")
    k = t_index
    dw, dn = inner_derivatives(
        spec, shift, k, [outer_path.S[k]], [outer_path.Y[k]], [outer_path.noise.path_index],
        n_inner, seed, need_w=which == "dW1", need_n=which == "dN1", kind=kind,
    )
    samples = (dw if which == "dW1" else dn)[0]
    return MCReport.from_samples(samples, seed)


# ---------------------------------------------------------------- predictable representation

def clark_ocone_terms(
    spec: ModelSpec,
    shift,
    dW1: np.ndarray,
    dW2: np.ndarray,
    outer_ids,
    n_inner: int,
    seed: int,
    kind: str = "call",
    chunk: int = 16,
):
    """Payoffs and stochastic-integral parts of the predictable representation.

    For outer Brownian increments ``dW1``/``dW2`` of shape (B, n) (no jumps),
    returns ``(F, I)`` with F = f(S_T) and I = sum_k E[D_{t_k} F | F_{t_k}] dW1_k,
    each conditional expectation estimated from ``n_inner`` nested paths.
    F - I - E[F] is the representation error.
    """
    n = spec.grid.n_steps
    if dW1.shape[-1] != n:
        raise ValueError("increments do not match the grid")
    zeros = np.zeros(dW1.shape, dtype=np.int64)
    ev = evolve_arrays(spec, shift, 0, spec.s0, spec.y0, dW1, dW2, dN1=zeros, dN2=zeros)
    F = payoff_fn(kind, spec.strike)(ev.S[:, -1])
    outer_ids = np.asarray(outer_ids)
    integral = np.zeros(len(F))
    for lo in range(0, len(F), chunk):
        sl = slice(lo, lo + chunk)
        for k in range(n):
            dw, _ = inner_derivatives(spec, shift, k, ev.S[sl, k], ev.Y[sl, k], outer_ids[sl], n_inner, seed,
                                      need_w=True, need_n=False, kind=kind)
            integral[sl] += dw.mean(axis=1) * dW1[sl, k]
    return F, integral


def clark_ocone_error(spec: ModelSpec, shift, dW1, dW2, outer_ids, n_inner: int, seed: int,
                      kind: str = "call") -> MCReport:
    """Mean squared representation error, with E[F] replaced by the sample mean of F - I."""
    F, integral = clark_ocone_terms(spec, shift, dW1, dW2, outer_ids, n_inner, seed, kind)
    resid = F - integral
    return MCReport.from_samples((resid - resid.mean()) ** 2, seed)
