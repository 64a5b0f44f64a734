"""Random substreams, Monte Carlo reports and the chunked path runner.

Every outer path owns a Philox substream keyed by ``(seed, path index)``;
inner (nested) simulations use ``(seed, outer index, t index, block)``.
Work is cut into chunks of a fixed size that does not depend on the thread
count, and per-path results are concatenated in path order before any
reduction, so the numbers are identical for any ``threads`` value.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

OUTER = 0
INNER = 1
JUMP_TIMES = 2
ALTERNATIVES = 3

DEFAULT_CHUNK = 4096
INNER_BLOCK = 1024


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


@dataclass(frozen=True)
class MCReport:
    estimate: float
    std_error: float
    n_samples: int
    seed: int

    @classmethod
    def from_samples(cls, samples: np.ndarray, seed: int) -> "MCReport":
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n == 0:
            raise ValueError("no samples")
        est = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(est, se, n, int(seed))

    def to_json(self) -> dict:
        d = asdict(self)
        d["n_paths"] = d.pop("n_samples")
        return d


def combined_se(*reports: MCReport) -> float:
    return math.sqrt(sum(r.std_error**2 for r in reports))


def default_threads() -> int:
    return os.cpu_count() or 1


def run_chunks(
    fn: Callable[[int, int], np.ndarray | tuple],
    n: int,
    chunk: int = DEFAULT_CHUNK,
    threads: int | None = 1,
):
    """Apply ``fn(start, stop)`` to fixed-size index chunks and concatenate.

    ``fn`` returns an array (or a tuple of arrays) whose last axis indexes
    paths ``start..stop-1``.
    """
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(bounds) == 1:
        parts = [fn(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), bounds))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts], axis=-1) for i in range(len(parts[0])))
    return np.concatenate(parts, axis=-1)

