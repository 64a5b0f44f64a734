"""Black-Scholes limit: Monte Carlo price and initial hedge against the closed form."""

import argparse
import time

from scipy.stats import norm

from jumpsv import ConstantVol, ModelSpec, TimeGrid
from jumpsv.hedge import EstimatorConfig, estimate_eta, price
from jumpsv.measure import build_min_entropy_shift
from jumpsv.simulate import simulate_batch


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--vol", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    spec = ModelSpec(TimeGrid(1.0, args.steps), 100.0, 0.0, 100.0, ConstantVol(args.vol),
                     a1=1.0, a2=1.0, a3=0.0, a4=0.0)
    d1 = 0.5 * args.vol
    exact = 100.0 * (norm.cdf(d1) - norm.cdf(d1 - args.vol))
    t0 = time.perf_counter()
    sh = build_min_entropy_shift(spec)
    pr = price(spec, sh, args.paths, args.seed)
    start = simulate_batch(spec, sh, args.seed, 0, 1).path(0, spec.grid)
    eta = estimate_eta(spec, sh, start, 0, EstimatorConfig(n_inner=args.paths, seed=args.seed))
    print(f"price  {pr.estimate:.5f} +- {pr.std_error:.5f}   closed form {exact:.5f}")
    print(f"eta0   {eta.value:.5f} +- {eta.std_error:.5f}   closed form {norm.cdf(d1):.5f}")
    print(f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
