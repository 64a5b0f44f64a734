"""Girsanov shifts, Doleans-Dade densities and the minimal-entropy measure.

A shift beta = (beta1, beta2, beta3, beta4) drifts the two Brownian motions by
beta1, beta2 and multiplies the jump intensities by (1 + beta3), (1 + beta4).
It defines a martingale measure when

    mu - r + beta1 * a1 * sigma + lambda1 * beta3 * a3 * sigma = 0.

Among those, relative entropy is minimized pointwise by beta2 = beta4 = 0 and
beta3 the root in (-1, inf) of

    lambda1 * sigma * a3**2 * x + a1**2 * sigma * x / (1 + x) - a3 * (r - mu) = 0,

with beta1 then fixed by the martingale relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .coeffs import Coefficient, ModelSpec
from .errors import ConfigurationError, ModelViolation, SolverError
from .mc import ALTERNATIVES, DEFAULT_CHUNK, MCReport, run_chunks, substream
from .simulate import MarketPath, PathBatch, simulate_batch

EMM_TOL = 1e-10
ROOT_TOL = 1e-12
MAX_ITER = 200
_LOWER = -1.0 + 1e-9
X_TOL = 1e-14

Component = float | Coefficient | Callable[[float, np.ndarray], np.ndarray]


def _component(c, k: int, t: float, y):
    if isinstance(c, Coefficient):
        return c.at_step(k)
    if callable(c):
        return c(t, y)
    return float(c)


@dataclass(frozen=True, eq=False)
class GirsanovShift:
    """A predictable R^4-valued shift, evaluated at (t_k, Y[k]).

    Each component is a constant, a per-step ``Coefficient`` or a callable
    ``(t, y) -> array``. ``rule`` (spec, k, y, sigma) -> 4-tuple overrides the
    components when the four are computed jointly.
    """

    beta1: Component = 0.0
    beta2: Component = 0.0
    beta3: Component = 0.0
    beta4: Component = 0.0
    tag: str = ""
    name: str = "beta"
    rule: Callable | None = None
    min_entropy: bool = False

    def raw(self, spec: ModelSpec, k: int, y, sig=None):
        if self.rule is not None:
            return self.rule(spec, k, y, sig)
        t = spec.grid.times[k]
        return tuple(_component(c, k, t, y) for c in (self.beta1, self.beta2, self.beta3, self.beta4))

    def evaluate(self, spec: ModelSpec, k: int, y, sig=None):
        b1, b2, b3, b4 = self.raw(spec, k, y, sig)
        if np.any(np.asarray(b3) <= -1) or np.any(np.asarray(b4) <= -1):
            raise ModelViolation("shift components beta3, beta4 must exceed -1", step=k)
        if self.tag == "EMM":
            if sig is None:
                sig = spec.vol.value(spec.grid.times[k], y)
            res = _residual(spec, k, sig, b1, b3)
            if np.any(np.abs(res) > EMM_TOL):
                raise ModelViolation(f"EMM relation off by {float(np.max(np.abs(res))):.3e}", step=k)
        return b1, b2, b3, b4


ZERO_SHIFT = GirsanovShift(tag="", name="zero")


def constant_shift(b1=0.0, b2=0.0, b3=0.0, b4=0.0, name="constant") -> GirsanovShift:
    return GirsanovShift(float(b1), float(b2), float(b3), float(b4), name=name)


def _residual(spec: ModelSpec, k: int, sig, b1, b3):
    tb = spec.tables
    return tb.mu[k] - tb.r[k] + b1 * tb.a1[k] * sig + tb.lambda1[k] * b3 * tb.a3[k] * sig


def emm_residual(spec: ModelSpec, shift: GirsanovShift, t: float, y: float) -> float:
    k = spec.grid.step_of(t)
    sig = spec.vol.value(t, y)
    b1, _, b3, _ = shift.raw(spec, k, y, sig)
    return float(_residual(spec, k, sig, b1, b3))


# ---------------------------------------------------------------- root solver

def entropy_equation(x, lam, sig, a1, a3, r_minus_mu):
    """Left-hand side of the minimal-entropy equation for beta3."""
    return lam * sig * a3 * a3 * x + a1 * a1 * sig * x / (1.0 + x) - a3 * r_minus_mu


def solve_beta3_array(lam, sig, a1, a3, r_minus_mu, tol: float = ROOT_TOL, max_iter: int = MAX_ITER):
    """Vectorized minimal-entropy beta3; returns (x, degenerate, iterations).

    Solves phi(x) = F(x) / sigma, which is strictly increasing on (-1, inf)
    for any sign of sigma, by Newton steps kept inside a sign-change bracket
    (bisection whenever Newton leaves it). The bracket starts at
    (-1 + 1e-9, 1] and its right end doubles until phi changes sign.
    Iteration stops once |F| < tol and the Newton step is below X_TOL
    relative to x, or when the bracket has collapsed.
    """
    lam, sig, a1, a3, rmu = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lam, sig, a1, a3, r_minus_mu)))
    shape = lam.shape
    lam, sig, a1, a3, rmu = (v.ravel() for v in (lam, sig, a1, a3, rmu))
    x = np.zeros(lam.shape)
    degenerate = a3 == 0
    linear = (a1 == 0) & ~degenerate
    if linear.any():
        x[linear] = rmu[linear] / (lam[linear] * sig[linear] * a3[linear])
    idx = np.flatnonzero(~degenerate & ~linear)
    iters = 0
    if idx.size:
        L, A1s, c, s = lam[idx] * a3[idx] ** 2, a1[idx] ** 2, a3[idx] * rmu[idx] / sig[idx], sig[idx]
        phi = lambda z: L * z + A1s * z / (1.0 + z) - c
        lo = np.full(idx.size, _LOWER)
        hi = np.ones(idx.size)
        for _ in range(1100):
            bad = phi(lo) > 0
            if not bad.any():
                break
            lo[bad] = -1.0 + (lo[bad] + 1.0) * 1e-3
        for _ in range(1100):
            bad = phi(hi) < 0
            if not bad.any():
                break
            hi[bad] *= 2.0
        z = np.clip(np.zeros(idx.size), lo, hi)
        done = np.zeros(idx.size, dtype=bool)
        for iters in range(1, max_iter + 1):
            f = phi(z)
            d = L + A1s / (1.0 + z) ** 2
            step = f / d
            converged = (np.abs(f * s) < tol) & (np.abs(step) <= X_TOL * np.maximum(1.0, np.abs(z)))
            done |= converged | (f == 0) | (hi - lo <= 4 * np.spacing(np.maximum(np.abs(lo), np.abs(hi))))
            if done.all():
                break
            lo = np.where(f < 0, z, lo)
            hi = np.where(f > 0, z, hi)
            zn = z - step
            inside = (zn > lo) & (zn < hi)
            zn = np.where(inside, zn, 0.5 * (lo + hi))
            z = np.where(done, z, zn)
        else:
            raise SolverError(f"minimal-entropy root did not converge in {max_iter} iterations")
        x[idx] = z
    return x.reshape(shape), degenerate.reshape(shape), iters


class Beta3Root(NamedTuple):
    value: float
    degenerate: bool
    iterations: int


def solve_min_entropy_beta3(spec: ModelSpec, t: float, y: float) -> Beta3Root:
    k = spec.grid.step_of(t)
    tb = spec.tables
    sig = float(spec.vol.value(t, y))
    x, deg, it = solve_beta3_array(tb.lambda1[k], sig, tb.a1[k], tb.a3[k], tb.r[k] - tb.mu[k])
    x = float(x)
    if not x > -1:
        raise ModelViolation("no martingale measure with beta3 > -1 at this state", step=k)
    return Beta3Root(x, bool(deg), it)


def _min_entropy_rule(spec: ModelSpec, k: int, y, sig=None):
    tb = spec.tables
    if sig is None:
        sig = spec.vol.value(spec.grid.times[k], y)
    a1, a3, lam, rmu = tb.a1[k], tb.a3[k], tb.lambda1[k], tb.r[k] - tb.mu[k]
    if a3 == 0:
        b1 = rmu / (sig * a1) if a1 != 0 else 0.0 * sig
        return b1, 0.0, 0.0 * sig, 0.0
    if a1 == 0:
        b3 = rmu / (lam * sig * a3)
    else:
        b3, _, _ = solve_beta3_array(lam, sig, a1, a3, rmu)
    if np.ndim(y) == 0:
        b3 = float(b3)
    if np.any(np.asarray(b3) <= -1):
        raise ModelViolation("no martingale measure with beta3 > -1 at this state", step=k)
    if a1 != 0:
        b1 = (rmu - lam * a3 * sig * b3) / (sig * a1)
    else:
        b1 = 0.0 * b3
    return b1, 0.0, b3, 0.0


def build_min_entropy_shift(spec: ModelSpec) -> GirsanovShift:
    return GirsanovShift(tag="EMM", name="min_entropy", rule=_min_entropy_rule, min_entropy=True)


def emm_shift_from_beta3(spec: ModelSpec, beta3_offset: float, beta2: float = 0.0, beta4: float = 0.0,
                         name: str = "alternative") -> GirsanovShift:
    """An EMM shift with beta3 = (minimal-entropy beta3) + offset and beta1 re-solved."""
    if np.any(spec.tables.a1 == 0):
        raise ConfigurationError("beta1 can only be re-solved where a1 != 0")

    def rule(spec_, k, y, sig=None):
        tb = spec_.tables
        if sig is None:
            sig = spec_.vol.value(spec_.grid.times[k], y)
        _, _, b3, _ = _min_entropy_rule(spec_, k, y, sig)
        b3 = b3 + beta3_offset
        b1 = (tb.r[k] - tb.mu[k] - tb.lambda1[k] * tb.a3[k] * sig * b3) / (sig * tb.a1[k])
        return b1, float(beta2), b3, float(beta4)

    return GirsanovShift(tag="EMM", name=name, rule=rule)


def random_emm_alternatives(spec: ModelSpec, count: int, seed: int,
                            offsets: Sequence[float] | None = None) -> list[GirsanovShift]:
    """EMM alternatives with beta2 and beta4 uniform on (-0.5, 0.5).

    The beta3 offsets from the minimal-entropy value are ``offsets`` when
    given (``count`` is then ignored), else of random sign and size in [0.1, 0.4].
    """
    g = substream(seed, ALTERNATIVES)
    if offsets is None:
        offsets = [float(g.choice([-1.0, 1.0]) * g.uniform(0.1, 0.4)) for _ in range(count)]
    out = []
    for i, off in enumerate(offsets):
        b2, b4 = g.uniform(-0.5, 0.5, size=2)
        out.append(emm_shift_from_beta3(spec, float(off), float(b2), float(b4), name=f"alternative_{i}"))
    return out


# ---------------------------------------------------------------- densities

@dataclass(frozen=True, eq=False)
class DensityPath:
    rho: np.ndarray

    def __post_init__(self):
        if self.rho[0] != 1.0 or not np.all(self.rho > 0):
            raise ValueError("density must start at 1 and stay positive")


def _log_density_increments(spec: ModelSpec, gamma: GirsanovShift, Y, dWp1, dWp2, dN1, dN2):
    """Per-step log-increments of the Doleans-Dade exponential, shape (..., n)."""
    tb, dt = spec.tables, spec.grid.dt
    n = dWp1.shape[-1]
    out = np.empty(dWp1.shape)
    for k in range(n):
        y = Y[..., k]
        g1, g2, g3, g4 = gamma.evaluate(spec, k, y)
        inc = g1 * dWp1[..., k] - 0.5 * g1 * g1 * dt + g2 * dWp2[..., k] - 0.5 * g2 * g2 * dt
        for g, dN, lam in ((g3, dN1[..., k], tb.lambda1[k]), (g4, dN2[..., k], tb.lambda2[k])):
            lg = np.log1p(g)
            # log(1+g) dM + lam (log(1+g) - g) dt = log(1+g) dN - lam g dt
            inc = inc + lg * dN - lam * g * dt
        out[..., k] = inc
    return out


def doleans_exponential(spec: ModelSpec, gamma: GirsanovShift, path: MarketPath) -> DensityPath:
    """Density process rho along ``path``, using its P-Brownian increments."""
    dWp1, dWp2 = path.p_increments(spec.grid.dt)
    inc = _log_density_increments(spec, gamma, path.Y, dWp1, dWp2, path.noise.dN1, path.noise.dN2)
    rho = np.exp(np.concatenate([[0.0], np.cumsum(inc)]))
    rho[0] = 1.0
    return DensityPath(rho)


def log_density_batch(spec: ModelSpec, gamma: GirsanovShift, batch: PathBatch) -> np.ndarray:
    dt = spec.grid.dt
    inc = _log_density_increments(spec, gamma, batch.Y, batch.dW1 + batch.b1 * dt, batch.dW2 + batch.b2 * dt,
                                  batch.dN1, batch.dN2)
    out = np.zeros(inc.shape[:-1] + (inc.shape[-1] + 1,))
    np.cumsum(inc, axis=-1, out=out[..., 1:])
    return out


def terminal_density(spec: ModelSpec, gamma: GirsanovShift, n_paths: int, seed: int,
                     chunk: int = DEFAULT_CHUNK, threads: int | None = 1) -> MCReport:
    """E_P[rho_T] from P-paths; also checks rho > 0 along every path."""
    def work(a, b):
        logr = log_density_batch(spec, gamma, simulate_batch(spec, None, seed, a, b))
        rho = np.exp(logr)
        if not np.all(rho > 0):
            raise ModelViolation("density hit zero")
        return rho[:, -1]

    return MCReport.from_samples(run_chunks(work, n_paths, chunk, threads), seed)


# ---------------------------------------------------------------- entropy

def entropy_rate(spec: ModelSpec, k: int, b1, b2, b3, b4):
    """Integrand of -E_P[log dQ/dP]: sum_i beta_i^2 / 2 - lambda_i (log(1 + beta_{i+2}) - beta_{i+2})."""
    tb = spec.tables
    return (0.5 * (np.square(b1) + np.square(b2))
            - tb.lambda1[k] * (np.log1p(b3) - b3)
            - tb.lambda2[k] * (np.log1p(b4) - b4))


def pointwise_objective(x, y, mu_minus_r, lam1, lam2, a1, a3, sig):
    """The two-variable function minimized at (minimal-entropy beta3, 0)."""
    return ((mu_minus_r + lam1 * a3 * sig * x) ** 2
            - 2 * sig * sig * a1 * a1 * (lam1 * (np.log1p(x) - x) + lam2 * (np.log1p(y) - y)))


def entropy_samples(spec: ModelSpec, shifts: list[GirsanovShift], n_paths: int, seed: int,
                    chunk: int = DEFAULT_CHUNK, threads: int | None = 1) -> np.ndarray:
    """Per-path integrated entropy rate, shape (len(shifts), n_paths), common P-paths."""
    dt, n = spec.grid.dt, spec.grid.n_steps

    def work(a, b):
        batch = simulate_batch(spec, None, seed, a, b)
        out = np.zeros((len(shifts), b - a))
        for k in range(n):
            y = batch.Y[:, k]
            sig = spec.vol.value(spec.grid.times[k], y)
            for i, sh in enumerate(shifts):
                out[i] += entropy_rate(spec, k, *sh.evaluate(spec, k, y, sig)) * dt
        return out

    return run_chunks(work, n_paths, chunk, threads)


def relative_entropy(spec: ModelSpec, shift: GirsanovShift, n_paths: int, seed: int,
                     chunk: int = DEFAULT_CHUNK, threads: int | None = 1) -> MCReport:
    return MCReport.from_samples(entropy_samples(spec, [shift], n_paths, seed, chunk, threads)[0], seed)


def max_emm_residual(spec: ModelSpec, shift: GirsanovShift, batch: PathBatch) -> float:
    """Largest |residual| over every grid point of every path in ``batch``."""
    worst = 0.0
    for k in range(spec.grid.n_steps):
        y = batch.Y[:, k]
        sig = spec.vol.value(spec.grid.times[k], y)
        b1, _, b3, _ = shift.raw(spec, k, y, sig)
        worst = max(worst, float(np.max(np.abs(_residual(spec, k, sig, b1, b3)))))
    return worst


def min_entropy_drift_log_s(spec: ModelSpec, k: int, y):
    """dt-coefficient of log S under the minimal-entropy measure, written against
    the compensated jump measure of that measure (jump part lambda_Q * log(1 + a3 sigma))."""
    tb = spec.tables
    sig = spec.vol.value(spec.grid.times[k], y)
    b1, _, b3, _ = _min_entropy_rule(spec, k, y, sig)
    lam_q = tb.lambda1[k] * (1 + b3)
    a3s = tb.a3[k] * sig
    base = tb.mu[k] + tb.a1[k] * sig * b1 - a3s * tb.lambda1[k] - 0.5 * (tb.a1[k] * sig) ** 2
    return base + lam_q * math.log1p(a3s) if np.ndim(y) == 0 else base + lam_q * np.log1p(a3s)
