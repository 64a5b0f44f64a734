"""Batch command line: simulate | hedge | entropy | validate.

Every command reads a JSON scenario (see ``ScenarioConfig``), writes its
data to files under the output directory and echoes the report JSON on
standard output. Diagnostics go to standard error. Exit codes: 0 success,
1 model or runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from typing import Any

import numpy as np

from . import __version__
from .coeffs import ModelSpec, spec_from_json, spec_to_json, validate
from .errors import ConfigurationError, ModelViolation, SchemaError, SolverError
from .hedge import EstimatorConfig, Strategy, compare_strategies, default_perturbations, estimate_eta, price
from .malliavin import derivative_mode
from .mc import MCReport, default_threads, run_chunks
from .measure import build_min_entropy_shift, entropy_samples, random_emm_alternatives, solve_min_entropy_beta3
from .plot import trajectory_svg
from .simulate import simulate_batch

MEASURES = ("P", "min_entropy")
KINDS = ("call", "put")


@dataclass(frozen=True)
class ScenarioConfig:
    """A scenario document.

    ``n_paths`` counts simulated trajectories (simulate), pricing paths
    (hedge) or entropy paths (entropy). ``n_hedge_paths`` outer paths with
    ``n_inner`` nested paths each estimate hedging-error variances.
    ``alternatives`` lists beta3 offsets of the EMM alternatives compared by
    the entropy command; ``n_random_alternatives`` adds random ones.
    """

    model: ModelSpec
    measure: str = "P"
    kind: str = "call"
    n_paths: int = 1
    n_hedge_paths: int = 200
    n_inner: int = 1000
    seed: int = 0
    out: str = "out"
    svg: bool = False
    chunk: int = 4096
    outer_chunk: int = 32
    alternatives: tuple[float, ...] = ()
    n_random_alternatives: int = 0

    def to_json(self) -> dict:
        doc: dict[str, Any] = {"model": spec_to_json(self.model)}
        for f in fields(self)[1:]:
            v = getattr(self, f.name)
            doc[f.name] = list(v) if isinstance(v, tuple) else v
        return doc

    @classmethod
    def from_json(cls, doc: Any) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise SchemaError("<root>", "expected an object")
        known = {f.name for f in fields(cls)}
        for k in doc:
            if k not in known:
                raise SchemaError(k, "unknown field")
        if "model" not in doc:
            raise SchemaError("model", "missing field")
        kw: dict[str, Any] = {"model": spec_from_json(doc["model"])}
        for name in ("n_paths", "n_hedge_paths", "n_inner", "chunk", "outer_chunk"):
            if name in doc:
                kw[name] = _int(doc, name, minimum=1)
        if "n_random_alternatives" in doc:
            kw["n_random_alternatives"] = _int(doc, "n_random_alternatives", minimum=0)
        if "seed" in doc:
            kw["seed"] = _int(doc, "seed", minimum=0)
            if kw["seed"] >= 2**64:
                raise SchemaError("seed", "must fit in 64 bits")
        for name, choices in (("measure", MEASURES), ("kind", KINDS)):
            if name in doc:
                if doc[name] not in choices:
                    raise SchemaError(name, f"expected one of {list(choices)}")
                kw[name] = doc[name]
        if "out" in doc:
            if not isinstance(doc["out"], str):
                raise SchemaError("out", "expected a string")
            kw["out"] = doc["out"]
        if "svg" in doc:
            if not isinstance(doc["svg"], bool):
                raise SchemaError("svg", "expected true or false")
            kw["svg"] = doc["svg"]
        if "alternatives" in doc:
            alt = doc["alternatives"]
            if not isinstance(alt, list) or not all(_is_number(x) for x in alt):
                raise SchemaError("alternatives", "expected a list of numbers")
            kw["alternatives"] = tuple(float(x) for x in alt)
        return cls(**kw)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _int(doc: dict, name: str, minimum: int) -> int:
    v = doc[name]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise SchemaError(name, f"expected an integer >= {minimum}")
    return v


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    return ScenarioConfig.from_json(doc)


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _require_valid(spec: ModelSpec) -> None:
    bad = validate(spec)
    if bad:
        v = bad[0]
        raise SchemaError(f"model.{v.field}", str(v))


def _shift_for(cfg: ScenarioConfig):
    return None if cfg.measure == "P" else build_min_entropy_shift(cfg.model)


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg: ScenarioConfig, threads: int) -> dict:
    spec = cfg.model
    _require_valid(spec)
    shift = _shift_for(cfg)
    grid = spec.grid
    os.makedirs(cfg.out, exist_ok=True)

    def work(a, b):
        batch = simulate_batch(spec, shift, cfg.seed, a, b)
        return batch.S.T, batch.Y.T, batch.dN1.T, batch.dN2.T

    S, Y, dN1, dN2 = (a.T for a in run_chunks(work, cfg.n_paths, cfg.chunk, threads))
    files = []
    tb = spec.tables
    width = len(str(cfg.n_paths - 1))
    for i in range(cfg.n_paths):
        sigma = spec.vol.value(grid.times, Y[i])
        N1 = np.concatenate([[0], np.cumsum(dN1[i])])
        N2 = np.concatenate([[0], np.cumsum(dN2[i])])
        rows = ["t,S,Y,sigma,N1,N2"]
        for k, t in enumerate(grid.times):
            rows.append(",".join([repr(float(t)), repr(float(S[i, k])), repr(float(Y[i, k])),
                                  repr(float(sigma[k])), str(int(N1[k])), str(int(N2[k]))]))
        stem = os.path.join(cfg.out, f"path_{i:0{width}d}")
        _write(stem + ".csv", "\n".join(rows) + "\n")
        files.append(stem + ".csv")
        if cfg.svg:
            s_breaks = np.flatnonzero((dN1[i] > 0) & (tb.a3 != 0))
            y_breaks = np.flatnonzero(((dN1[i] > 0) & (tb.a3 * tb.sigma1_y != 0))
                                      | ((dN2[i] > 0) & (tb.a4 * tb.sigma2_y != 0)))
            _write(stem + "_sigma.svg", trajectory_svg(grid.times, sigma, y_breaks,
                                                        f"volatility, path {i}", "sigma(t, Y)", __version__))
            _write(stem + "_price.svg", trajectory_svg(grid.times, S[i], s_breaks,
                                                        f"price, path {i}", "S", __version__))
            files += [stem + "_sigma.svg", stem + "_price.svg"]
    report = {"command": "simulate", "measure": cfg.measure, "n_paths": cfg.n_paths, "seed": cfg.seed,
              "files": [os.path.basename(f) for f in files]}
    _write(os.path.join(cfg.out, "simulate.json"), dumps(report))
    return report


def _mc(rep: MCReport) -> dict:
    return {"estimate": rep.estimate, "se": rep.std_error}


def cmd_hedge(cfg: ScenarioConfig, threads: int) -> dict:
    spec = cfg.model
    _require_valid(spec)
    shift = build_min_entropy_shift(spec)
    est = EstimatorConfig(n_inner=cfg.n_inner, seed=cfg.seed, kind=cfg.kind, outer_chunk=cfg.outer_chunk,
                          threads=threads)
    pr = price(spec, shift, cfg.n_paths, cfg.seed, cfg.kind, cfg.chunk, threads)
    start = simulate_batch(spec, shift, cfg.seed, 0, 1).path(0, spec.grid)
    eta0 = estimate_eta(spec, shift, start, 0, est)
    strategies = [Strategy.optimal()] + default_perturbations()
    cmp_ = compare_strategies(spec, shift, strategies, cfg.n_hedge_paths, cfg.seed, est)
    report = {
        "command": "hedge",
        "kind": cfg.kind,
        "price": pr.estimate,
        "price_se": pr.std_error,
        "eta0": eta0.value,
        "eta0_se": eta0.std_error,
        "beta3": solve_min_entropy_beta3(spec, 0.0, spec.y0).value,
        "mode": derivative_mode(spec, shift),
        "variance_optimal": _mc(cmp_.reports[0]),
        "variance_perturbed": [
            {"strategy": name, **_mc(rep)} for name, rep in zip(cmp_.strategies[1:], cmp_.reports[1:])
        ],
        "n_paths": cfg.n_paths,
        "n_hedge_paths": cfg.n_hedge_paths,
        "n_inner": cfg.n_inner,
        "seed": cfg.seed,
        "grid": {"horizon": spec.grid.horizon, "n_steps": spec.grid.n_steps},
    }
    os.makedirs(cfg.out, exist_ok=True)
    _write(os.path.join(cfg.out, "hedge.json"), dumps(report))
    return report


def cmd_entropy(cfg: ScenarioConfig, threads: int) -> dict:
    spec = cfg.model
    _require_valid(spec)
    shifts = [build_min_entropy_shift(spec)]
    offsets = [0.0]
    if cfg.alternatives:
        shifts += random_emm_alternatives(spec, 0, cfg.seed, offsets=cfg.alternatives)
        offsets += list(cfg.alternatives)
    if cfg.n_random_alternatives:
        extra = random_emm_alternatives(spec, cfg.n_random_alternatives, cfg.seed + 1)
        shifts += [replace(s, name=f"random_{i}") for i, s in enumerate(extra)]
        offsets += [None] * len(extra)
    samples = entropy_samples(spec, shifts, cfg.n_paths, cfg.seed, cfg.chunk, threads)
    entries = []
    for sh, off, row in zip(shifts, offsets, samples):
        rep = MCReport.from_samples(row, cfg.seed)
        entries.append({"name": sh.name, "beta3_offset": off, "entropy": rep.estimate, "se": rep.std_error})
    report = {"command": "entropy", "n_paths": cfg.n_paths, "seed": cfg.seed, "entries": entries}
    os.makedirs(cfg.out, exist_ok=True)
    _write(os.path.join(cfg.out, "entropy.json"), dumps(report))
    return report


def cmd_validate(cfg: ScenarioConfig, threads: int) -> dict:
    bad = validate(cfg.model)
    return {
        "command": "validate",
        "valid": not bad,
        "violations": [{"field": v.field, "message": v.message, "step": v.step} for v in bad],
    }


COMMANDS = {"simulate": cmd_simulate, "hedge": cmd_hedge, "entropy": cmd_entropy, "validate": cmd_validate}


# ---------------------------------------------------------------- entry point

def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jumpsv", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--paths", type=_positive)
    p.add_argument("--inner", type=_positive)
    p.add_argument("--out")
    p.add_argument("--svg", type=_bool)
    p.add_argument("--threads", type=_positive, default=None, help="worker threads (default: all cores)")
    return p


def _fail(code: int, payload: dict) -> int:
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        over = {k: v for k, v in (("seed", args.seed), ("n_paths", args.paths), ("n_inner", args.inner),
                                  ("out", args.out), ("svg", args.svg)) if v is not None}
        cfg = replace(cfg, **over)
        threads = args.threads or default_threads()
        report = COMMANDS[args.command](cfg, threads)
    except (SchemaError, ConfigurationError) as exc:
        return _fail(2, {"error": type(exc).__name__, "field": getattr(exc, "field", None), "message": str(exc)})
    except ModelViolation as exc:
        return _fail(1, {"error": "ModelViolation", "step": exc.step, "message": str(exc)})
    except SolverError as exc:
        return _fail(1, {"error": "SolverError", "message": str(exc)})
    except OSError as exc:
        return _fail(1, {"error": "OSError", "message": str(exc)})
    except ValueError as exc:
        return _fail(2, {"error": "ValueError", "field": None, "message": str(exc)})
    sys.stdout.write(dumps(report))
    if args.command == "validate" and not report["valid"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
