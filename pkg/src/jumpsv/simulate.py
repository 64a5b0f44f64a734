"""Driving noise and path evolution of (S, Y) under P or under a shifted measure.

Y follows an Euler scheme. S follows the exact exponential scheme with the
volatility frozen at the left end of each step. Jump counts are resolved
per step from stored uniforms by Poisson inversion, so the same uniforms
give P-counts at intensity lambda and Q-counts at lambda * (1 + beta3).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, TextIO

import numpy as np

from .coeffs import Coefficient, ModelSpec, TimeGrid, as_coefficient
from .errors import ModelViolation
from .mc import INNER, INNER_BLOCK, JUMP_TIMES, OUTER, substream


def poisson_counts(u: np.ndarray, mean) -> np.ndarray:
    """Inverse Poisson CDF: the smallest c with P(N <= c) >= u, elementwise."""
    u = np.asarray(u, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if np.any(mean < 0):
        raise ValueError("negative Poisson mean")
    if mean.ndim == 0:
        # one CDF table for every uniform
        m = float(mean)
        p = math.exp(-m)
        cdf = [p]
        top = float(np.max(u, initial=0.0))
        c = 0
        while cdf[-1] < top and c < 50 + 2 * m + 50 * math.sqrt(m):
            c += 1
            p = p * m / c
            cdf.append(cdf[-1] + p)
        return np.searchsorted(np.array(cdf), u, side="left").astype(np.int64)
    mean = np.broadcast_to(mean, u.shape)
    counts = np.zeros(u.shape, dtype=np.int64)
    p = np.exp(-mean)
    cdf = p.copy()
    active = u > cdf
    c = 0
    cap = 50 + float(np.max(mean, initial=0.0)) * 2 + 50 * math.sqrt(float(np.max(mean, initial=0.0)))
    while active.any() and c < cap:
        counts += active
        c += 1
        p = p * mean / c
        cdf = cdf + p
        active &= u > cdf
    return counts


@dataclass(frozen=True, eq=False)
class DrivingNoise:
    """Brownian increments and Poisson counts of one path.

    ``u1``/``u2`` are the uniforms the counts were resolved from; they let
    the same path be re-resolved under a measure with other intensities.
    """

    seed: int
    path_index: int
    dW1: np.ndarray
    dW2: np.ndarray
    dN1: np.ndarray
    dN2: np.ndarray
    jump_times1: np.ndarray
    jump_times2: np.ndarray
    u1: np.ndarray | None = None
    u2: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return self.dW1.shape[-1]

    def same_as(self, other: "DrivingNoise") -> bool:
        names = ("dW1", "dW2", "dN1", "dN2", "jump_times1", "jump_times2", "u1", "u2")
        if (self.seed, self.path_index) != (other.seed, other.path_index):
            return False
        for name in names:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and (a.shape != b.shape or a.tobytes() != b.tobytes()):
                return False
        return True

    def coarsen(self, factor: int) -> "DrivingNoise":
        """Aggregate increments over ``factor`` consecutive steps (counts become fixed)."""
        if self.n_steps % factor:
            raise ValueError("factor must divide the number of steps")
        agg = lambda a: a.reshape(-1, factor).sum(axis=1)
        return replace(self, dW1=agg(self.dW1), dW2=agg(self.dW2), dN1=agg(self.dN1), dN2=agg(self.dN2), u1=None, u2=None)


def draw_outer(seed: int, index: int, n_steps: int, dt: float):
    g = substream(seed, OUTER, index)
    z = g.standard_normal((2, n_steps)) * math.sqrt(dt)
    u = g.random((2, n_steps))
    return z[0], z[1], u[0], u[1]


def draw_outer_batch(seed: int, start: int, stop: int, n_steps: int, dt: float):
    """Outer-path draws for indices start..stop-1, each from its own substream."""
    parts = [draw_outer(seed, i, n_steps, dt) for i in range(start, stop)]
    return tuple(np.stack([p[j] for p in parts]) for j in range(4))


def draw_inner(seed: int, outer_ids, k0: int, n_inner: int, m: int, dt: float):
    """Fresh noise for nested simulations started at step ``k0``.

    Returns four arrays of shape (len(outer_ids), n_inner, m). Blocks of
    ``INNER_BLOCK`` inner paths share a substream keyed by
    (outer id, k0, block number).
    """
    dW1 = np.empty((len(outer_ids), n_inner, m))
    dW2 = np.empty_like(dW1)
    u1 = np.empty_like(dW1)
    u2 = np.empty_like(dW1)
    sq = math.sqrt(dt)
    for b, oid in enumerate(outer_ids):
        for blk, lo in enumerate(range(0, n_inner, INNER_BLOCK)):
            hi = min(lo + INNER_BLOCK, n_inner)
            g = substream(seed, INNER, oid, k0, blk)
            z = g.standard_normal((2, hi - lo, m))
            u = g.random((2, hi - lo, m))
            dW1[b, lo:hi] = z[0] * sq
            dW2[b, lo:hi] = z[1] * sq
            u1[b, lo:hi] = u[0]
            u2[b, lo:hi] = u[1]
    return dW1, dW2, u1, u2


def jump_times(grid: TimeGrid, counts: np.ndarray, seed: int, path_index: int, component: int) -> np.ndarray:
    """Exact jump times, uniform within their step, sorted."""
    total = int(np.sum(counts))
    if total == 0:
        return np.zeros(0)
    g = substream(seed, JUMP_TIMES, path_index, component)
    out = []
    for k in np.flatnonzero(counts):
        out.append(np.sort(grid.times[k] + grid.dt * (1.0 - g.random(int(counts[k])))))
    return np.concatenate(out)


def gen_noise(
    grid: TimeGrid,
    lambda1: Coefficient | float,
    lambda2: Coefficient | float,
    seed: int,
    path_index: int = 0,
) -> DrivingNoise:
    n, dt = grid.n_steps, grid.dt
    l1 = as_coefficient(lambda1).table(n)
    l2 = as_coefficient(lambda2).table(n)
    if np.any(l1 < 0) or np.any(l2 < 0):
        raise ValueError("intensities must be nonnegative")
    dW1, dW2, u1, u2 = draw_outer(seed, path_index, n, dt)
    dN1 = poisson_counts(u1, l1 * dt)
    dN2 = poisson_counts(u2, l2 * dt)
    return DrivingNoise(
        seed, path_index, dW1, dW2, dN1, dN2,
        jump_times(grid, dN1, seed, path_index, 1),
        jump_times(grid, dN2, seed, path_index, 2),
        u1, u2,
    )


class Evolution(NamedTuple):
    S: np.ndarray   # (..., m + 1)
    Y: np.ndarray   # (..., m + 1)
    dN1: np.ndarray  # (..., m)
    dN2: np.ndarray
    b1: np.ndarray  # Brownian drift shifts used per step, (..., m)
    b2: np.ndarray


def evolve_arrays(
    spec: ModelSpec,
    shift,
    k0: int,
    S0,
    Y0,
    dW1: np.ndarray,
    dW2: np.ndarray,
    u1: np.ndarray | None = None,
    u2: np.ndarray | None = None,
    dN1: np.ndarray | None = None,
    dN2: np.ndarray | None = None,
) -> Evolution:
    """Vectorized evolution over steps k0 .. k0 + m - 1.

    ``dW1``/``dW2`` are increments of the Brownian motion of the simulating
    measure (the shifted one when ``shift`` is given). Counts are taken from
    ``dN1``/``dN2`` when given, otherwise resolved from ``u1``/``u2``.
    """
    m = dW1.shape[-1]
    batch = dW1.shape[:-1]
    tb = spec.tables
    dt = spec.grid.dt
    times = spec.grid.times
    vol = spec.vol

    logS = np.empty(batch + (m + 1,))
    Y = np.empty(batch + (m + 1,))
    logS[..., 0] = 0.0  # log(S / S0)
    Y[..., 0] = Y0
    N1 = np.empty(batch + (m,), dtype=np.int64)
    N2 = np.empty(batch + (m,), dtype=np.int64)
    B1 = np.zeros(batch + (m,))
    B2 = np.zeros(batch + (m,))
    fixed = dN1 is not None
    if not fixed and u1 is None:
        raise ValueError("either counts or uniforms are required")

    for j in range(m):
        k = k0 + j
        y = Y[..., j]
        t = times[k]
        sig = vol.value(t, y)
        a1, a2, a3, a4 = tb.a1[k], tb.a2[k], tb.a3[k], tb.a4[k]
        l1, l2 = tb.lambda1[k], tb.lambda2[k]
        if shift is None:
            b1 = b2 = b3 = b4 = 0.0
        else:
            b1, b2, b3, b4 = shift.evaluate(spec, k, y, sig)
        jf = 1.0 + a3 * sig
        if np.any(jf <= 0):
            raise ModelViolation("jump positivity 1 + sigma * a3 > 0 violated", step=k)
        if fixed:
            n1, n2 = dN1[..., j], dN2[..., j]
        else:
            n1 = poisson_counts(u1[..., j], l1 * (1.0 + b3) * dt)
            n2 = poisson_counts(u2[..., j], l2 * (1.0 + b4) * dt)
        w1 = dW1[..., j] + b1 * dt
        w2 = dW2[..., j] + b2 * dt
        a1s = a1 * sig
        step = (tb.mu[k] - a3 * l1 * sig - 0.5 * a1s * a1s) * dt + a1s * w1
        if a3 != 0:
            step = step + n1 * np.log(jf)
        logS[..., j + 1] = logS[..., j] + step
        Y[..., j + 1] = (
            y
            + tb.mu_y[k] * dt
            + tb.sigma1_y[k] * (a1 * w1 + a3 * (n1 - l1 * dt))
            + tb.sigma2_y[k] * (a2 * w2 + a4 * (n2 - l2 * dt))
        )
        N1[..., j] = n1
        N2[..., j] = n2
        B1[..., j] = b1
        B2[..., j] = b2
    return Evolution(np.asarray(S0, dtype=float)[..., None] * np.exp(logS), Y, N1, N2, B1, B2)


@dataclass(frozen=True, eq=False)
class MarketPath:
    """One realization of (S, Y) on the grid.

    ``noise`` holds the increments of the simulating measure's Brownian
    motion and the jump counts actually used. ``b1``/``b2`` record the
    Brownian drift shifts, so P-increments are ``dW + b * dt``.
    """

    noise: DrivingNoise
    S: np.ndarray
    Y: np.ndarray
    measure_tag: str
    b1: np.ndarray
    b2: np.ndarray
    shift: object | None = None

    def p_increments(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        return self.noise.dW1 + self.b1 * dt, self.noise.dW2 + self.b2 * dt

    def to_csv(self, grid: TimeGrid, fh: TextIO | None = None, sigma: np.ndarray | None = None) -> str:
        """Write columns t, S, Y[, sigma], N1, N2 with cumulative counts."""
        out = fh if fh is not None else io.StringIO()
        N1 = np.concatenate([[0], np.cumsum(self.noise.dN1)])
        N2 = np.concatenate([[0], np.cumsum(self.noise.dN2)])
        out.write("t,S,Y,sigma,N1,N2\n" if sigma is not None else "t,S,Y,N1,N2\n")
        for k, t in enumerate(grid.times):
            row = [repr(float(t)), repr(float(self.S[k])), repr(float(self.Y[k]))]
            if sigma is not None:
                row.append(repr(float(sigma[k])))
            row += [str(int(N1[k])), str(int(N2[k]))]
            out.write(",".join(row) + "\n")
        return out.getvalue() if fh is None else ""


def _tag(shift) -> str:
    return "P" if shift is None else f"Q[{getattr(shift, 'name', 'beta')}]"


def evolve(spec: ModelSpec, noise: DrivingNoise, shift=None, fixed_counts: bool | None = None) -> MarketPath:
    """Evolve one path. Under a shift, counts are re-resolved from the noise's
    uniforms at the shifted intensities unless ``fixed_counts`` is set."""
    if noise.n_steps != spec.grid.n_steps:
        raise ValueError("noise was generated on a different grid")
    if fixed_counts is None:
        fixed_counts = shift is None or noise.u1 is None
    ev = evolve_arrays(
        spec, shift, 0, spec.s0, spec.y0, noise.dW1, noise.dW2,
        noise.u1, noise.u2,
        noise.dN1 if fixed_counts else None,
        noise.dN2 if fixed_counts else None,
    )
    if not fixed_counts:
        noise = replace(
            noise, dN1=ev.dN1, dN2=ev.dN2,
            jump_times1=jump_times(spec.grid, ev.dN1, noise.seed, noise.path_index, 1),
            jump_times2=jump_times(spec.grid, ev.dN2, noise.seed, noise.path_index, 2),
        )
    return MarketPath(noise, ev.S, ev.Y, _tag(shift), ev.b1, ev.b2, shift)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Paths ``index[0] .. index[-1]`` simulated together; arrays are (B, ...)."""

    seed: int
    index: np.ndarray
    S: np.ndarray
    Y: np.ndarray
    dW1: np.ndarray
    dW2: np.ndarray
    dN1: np.ndarray
    dN2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    measure_tag: str
    shift: object | None = None

    def __len__(self):
        return len(self.index)

    def path(self, i: int, grid: TimeGrid) -> MarketPath:
        pi = int(self.index[i])
        noise = DrivingNoise(
            self.seed, pi, self.dW1[i], self.dW2[i], self.dN1[i], self.dN2[i],
            jump_times(grid, self.dN1[i], self.seed, pi, 1),
            jump_times(grid, self.dN2[i], self.seed, pi, 2),
            self.u1[i], self.u2[i],
        )
        return MarketPath(noise, self.S[i], self.Y[i], self.measure_tag, self.b1[i], self.b2[i], self.shift)


def simulate_batch(spec: ModelSpec, shift, seed: int, start: int, stop: int) -> PathBatch:
    """Simulate paths start..stop-1; path i is the same whatever batch holds it."""
    n, dt = spec.grid.n_steps, spec.grid.dt
    dW1, dW2, u1, u2 = draw_outer_batch(seed, start, stop, n, dt)
    ev = evolve_arrays(spec, shift, 0, spec.s0, spec.y0, dW1, dW2, u1, u2)
    return PathBatch(
        seed, np.arange(start, stop), ev.S, ev.Y, dW1, dW2, ev.dN1, ev.dN2,
        ev.b1, ev.b2, u1, u2, _tag(shift), shift,
    )
