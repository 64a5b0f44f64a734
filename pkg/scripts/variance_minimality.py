"""Hedging-error variance of the optimal strategy against perturbed versions of it."""

import argparse
import time

from jumpsv import BoundedSigmoidVol, ModelSpec, TimeGrid
from jumpsv.hedge import EstimatorConfig, Strategy, compare_strategies, default_perturbations
from jumpsv.mc import combined_se
from jumpsv.measure import build_min_entropy_shift


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--outer", type=int, default=10_000)
    p.add_argument("--inner", type=int, default=1000)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--seed", type=int, default=6)
    p.add_argument("--threads", type=int, default=None)
    args = p.parse_args()

    spec = ModelSpec(TimeGrid(1.0, args.steps), 100.0, 0.0, 100.0, BoundedSigmoidVol(0.1, 0.4),
                     mu=0.08, r=0.03, a1=0.0, a2=0.0, a3=1.0, a4=1.0, lambda1=1.0, lambda2=0.5,
                     sigma1_y=0.3, sigma2_y=0.3)
    t0 = time.perf_counter()
    cmp_ = compare_strategies(spec, build_min_entropy_shift(spec), [Strategy.optimal()] + default_perturbations(),
                              args.outer, args.seed,
                              EstimatorConfig(n_inner=args.inner, seed=args.seed, threads=args.threads))
    best = cmp_.reports[0]
    print(f"{'strategy':<14}{'variance':>10}{'se':>8}{'margin/SE':>11}")
    for name, rep in zip(cmp_.strategies, cmp_.reports):
        margin = "" if rep is best else f"{(rep.estimate - best.estimate) / combined_se(best, rep):11.1f}"
        print(f"{name:<14}{rep.estimate:10.4f}{rep.std_error:8.4f}{margin}")
    print(f"{time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
