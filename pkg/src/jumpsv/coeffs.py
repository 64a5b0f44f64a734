"""Deterministic model coefficients, volatility functions and the model spec.

Every deterministic coefficient is piecewise constant on the simulation grid:
either a single float or one value per step, with the step ``[t_k, t_{k+1})``
owning ``t`` and ``t = T`` belonging to the last step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import cached_property
from typing import Any, NamedTuple

import numpy as np
from scipy.special import expit

from .errors import SchemaError

# Grid snapping tolerance, relative to dt, used when locating the step of t.
_SNAP = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.horizon
        return t

    def step_of(self, t: float) -> int:
        """Index of the step containing ``t`` (the last step for ``t == T``)."""
        if not (0.0 <= t <= self.horizon):
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        k = math.floor(t / self.dt + _SNAP)
        return min(k, self.n_steps - 1)

    def index_of(self, t: float) -> int:
        """Grid point index nearest to ``t``; ``t`` must sit on the grid."""
        k = round(t / self.dt)
        if not (0 <= k <= self.n_steps) or abs(k * self.dt - t) > _SNAP * max(1.0, self.horizon):
            raise ValueError(f"t={t} is not a grid point")
        return k


@dataclass(frozen=True)
class Coefficient:
    """A constant or a per-step array of reals."""

    value: float | tuple[float, ...]

    def __post_init__(self):
        v = self.value
        if isinstance(v, (list, tuple, np.ndarray)):
            object.__setattr__(self, "value", tuple(float(x) for x in v))
        else:
            object.__setattr__(self, "value", float(v))

    @property
    def is_constant(self) -> bool:
        return isinstance(self.value, float)

    def table(self, n_steps: int) -> np.ndarray:
        if self.is_constant:
            return np.full(n_steps, self.value)
        if len(self.value) != n_steps:
            raise ValueError(f"coefficient has {len(self.value)} values, grid has {n_steps} steps")
        return np.array(self.value)

    def at_step(self, k: int) -> float:
        return self.value if self.is_constant else self.value[k]

    def to_json(self) -> float | list[float]:
        return self.value if self.is_constant else list(self.value)


def as_coefficient(v: Any) -> Coefficient:
    return v if isinstance(v, Coefficient) else Coefficient(v)


def eval_coefficient(c: Coefficient | float, grid: TimeGrid, t: float) -> float:
    c = as_coefficient(c)
    k = grid.step_of(t)
    if not c.is_constant and len(c.value) != grid.n_steps:
        raise ValueError("coefficient length does not match the grid")
    return c.at_step(k)


@dataclass(frozen=True)
class ConstantVol:
    c: float

    kind = "constant"

    def value(self, t, y):
        return np.full(np.shape(y), float(self.c)) if np.ndim(y) else float(self.c)

    def dy(self, t, y):
        return np.zeros(np.shape(y)) if np.ndim(y) else 0.0

    def violations(self) -> list[str]:
        return [] if self.c != 0 and math.isfinite(self.c) else ["σ must be nonzero"]

    def to_json(self) -> dict:
        return {"kind": self.kind, "c": float(self.c)}


@dataclass(frozen=True)
class BoundedSigmoidVol:
    """sigma(t, y) = lo + (hi - lo) / (1 + exp(-y))."""

    sigma_min: float
    sigma_max: float

    kind = "bounded_sigmoid"

    def value(self, t, y):
        return self.sigma_min + (self.sigma_max - self.sigma_min) * expit(y)

    def dy(self, t, y):
        s = expit(y)
        return (self.sigma_max - self.sigma_min) * s * (1.0 - s)

    def violations(self) -> list[str]:
        if 0 < self.sigma_min < self.sigma_max:
            return []
        return ["bounded sigmoid requires 0 < sigma_min < sigma_max"]

    def to_json(self) -> dict:
        return {"kind": self.kind, "sigma_min": float(self.sigma_min), "sigma_max": float(self.sigma_max)}


VolatilityFunction = ConstantVol | BoundedSigmoidVol

COEFFICIENT_FIELDS = (
    "mu", "r", "mu_y", "lambda1", "lambda2",
    "a1", "a2", "a3", "a4", "sigma1_y", "sigma2_y",
)


class Tables(NamedTuple):
    """Per-step coefficient values, each an array of length n_steps."""

    mu: np.ndarray
    r: np.ndarray
    mu_y: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    sigma1_y: np.ndarray
    sigma2_y: np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    grid: TimeGrid
    s0: float
    y0: float
    strike: float
    vol: VolatilityFunction
    mu: Coefficient = Coefficient(0.0)
    r: Coefficient = Coefficient(0.0)
    mu_y: Coefficient = Coefficient(0.0)
    lambda1: Coefficient = Coefficient(1.0)
    lambda2: Coefficient = Coefficient(1.0)
    a1: Coefficient = Coefficient(1.0)
    a2: Coefficient = Coefficient(1.0)
    a3: Coefficient = Coefficient(0.0)
    a4: Coefficient = Coefficient(0.0)
    sigma1_y: Coefficient = Coefficient(0.0)
    sigma2_y: Coefficient = Coefficient(0.0)

    def __post_init__(self):
        for name in COEFFICIENT_FIELDS:
            object.__setattr__(self, name, as_coefficient(getattr(self, name)))
        for name in ("s0", "y0", "strike"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @cached_property
    def tables(self) -> Tables:
        n = self.grid.n_steps
        return Tables(*(getattr(self, name).table(n) for name in COEFFICIENT_FIELDS))

    @cached_property
    def rate_integral(self) -> np.ndarray:
        """Cumulative integral of r at the grid points, length n_steps + 1."""
        out = np.zeros(self.grid.n_steps + 1)
        np.cumsum(self.tables.r * self.grid.dt, out=out[1:])
        return out

    def discount_to_maturity(self, k: int) -> float:
        """exp(int_{t_k}^T r ds)."""
        return math.exp(self.rate_integral[-1] - self.rate_integral[k])

    def with_(self, **changes) -> "ModelSpec":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return ModelSpec(**kw)


class Violation(NamedTuple):
    field: str
    message: str
    step: int | None = None

    def __str__(self):
        where = "" if self.step is None else f" (first at step {self.step})"
        return f"{self.field}: {self.message}{where}"


def validate(spec: ModelSpec) -> list[Violation]:
    """Static invariants of the model; an empty list means the spec is valid.

    The jump positivity condition depends on the path when the volatility
    depends on y, so for those specs it is checked during simulation.
    """
    out: list[Violation] = []
    n = spec.grid.n_steps
    tables = {}
    for name in COEFFICIENT_FIELDS:
        c = getattr(spec, name)
        try:
            tables[name] = c.table(n)
        except ValueError as exc:
            out.append(Violation(name, str(exc)))
            continue
        if not np.all(np.isfinite(tables[name])):
            out.append(Violation(name, "must be finite", int(np.argmin(np.isfinite(tables[name])))))
    for name in ("lambda1", "lambda2"):
        if name in tables:
            bad = np.flatnonzero(~(tables[name] > 0))
            if bad.size:
                out.append(Violation(name, "intensity must be positive", int(bad[0])))
    if not spec.s0 > 0:
        out.append(Violation("s0", "initial price must be positive"))
    if not spec.strike >= 0:
        out.append(Violation("strike", "strike must be nonnegative"))
    if not math.isfinite(spec.y0):
        out.append(Violation("y0", "must be finite"))
    for msg in spec.vol.violations():
        out.append(Violation("vol", msg))
    if all(k in tables for k in ("a1", "a3", "mu", "r")):
        bad = np.flatnonzero((tables["a1"] == 0) & (tables["a3"] == 0) & (tables["mu"] != tables["r"]))
        if bad.size:
            out.append(Violation("a1/a3", "a1 and a3 both zero while mu != r: no martingale measure", int(bad[0])))
    if isinstance(spec.vol, ConstantVol) and "a3" in tables and not spec.vol.violations():
        bad = np.flatnonzero(~(1.0 + spec.vol.c * tables["a3"] > 0))
        if bad.size:
            out.append(Violation("a3", "jump positivity 1 + sigma * a3 > 0 fails", int(bad[0])))
    return out


# ---------------------------------------------------------------- JSON form

_SPEC_KEYS = ("horizon", "n_steps", "s0", "y0", "strike", "vol") + COEFFICIENT_FIELDS


def _number(doc: dict, key: str, path: str) -> float:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}{key}", f"expected a number, got {type(v).__name__}")
    return float(v)


def vol_from_json(doc: Any, path: str = "vol") -> VolatilityFunction:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    kind = doc.get("kind")
    if kind == "constant":
        keys = {"kind", "c"}
    elif kind == "bounded_sigmoid":
        keys = {"kind", "sigma_min", "sigma_max"}
    else:
        raise SchemaError(f"{path}.kind", f"unknown volatility kind {kind!r}")
    for k in doc:
        if k not in keys:
            raise SchemaError(f"{path}.{k}", "unknown field")
    for k in keys - {"kind"}:
        if k not in doc:
            raise SchemaError(f"{path}.{k}", "missing field")
    if kind == "constant":
        return ConstantVol(_number(doc, "c", path + "."))
    return BoundedSigmoidVol(_number(doc, "sigma_min", path + "."), _number(doc, "sigma_max", path + "."))


def spec_to_json(spec: ModelSpec) -> dict:
    doc = {
        "horizon": spec.grid.horizon,
        "n_steps": spec.grid.n_steps,
        "s0": spec.s0,
        "y0": spec.y0,
        "strike": spec.strike,
        "vol": spec.vol.to_json(),
    }
    for name in COEFFICIENT_FIELDS:
        doc[name] = getattr(spec, name).to_json()
    return doc


def spec_from_json(doc: Any, path: str = "model") -> ModelSpec:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    for k in doc:
        if k not in _SPEC_KEYS:
            raise SchemaError(f"{path}.{k}", "unknown field")
    for k in _SPEC_KEYS:
        if k not in doc:
            raise SchemaError(f"{path}.{k}", "missing field")
    n = doc["n_steps"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SchemaError(f"{path}.n_steps", "expected a positive integer")
    horizon = _number(doc, "horizon", path + ".")
    if not horizon > 0:
        raise SchemaError(f"{path}.horizon", "must be positive")
    coeffs = {}
    for name in COEFFICIENT_FIELDS:
        v = doc[name]
        if isinstance(v, list):
            if len(v) != n or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
                raise SchemaError(f"{path}.{name}", f"expected a number or a list of {n} numbers")
            coeffs[name] = Coefficient(tuple(v))
        else:
            coeffs[name] = Coefficient(_number(doc, name, path + "."))
    return ModelSpec(
        grid=TimeGrid(horizon, n),
        s0=_number(doc, "s0", path + "."),
        y0=_number(doc, "y0", path + "."),
        strike=_number(doc, "strike", path + "."),
        vol=vol_from_json(doc["vol"], f"{path}.vol"),
        **coeffs,
    )
