"""Representation error of the payoff against grid size on matched Brownian paths."""

import argparse

import numpy as np

from jumpsv import BoundedSigmoidVol, ModelSpec, TimeGrid
from jumpsv.malliavin import clark_ocone_error
from jumpsv.measure import build_min_entropy_shift
from jumpsv.simulate import draw_outer_batch


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--outer", type=int, default=200)
    p.add_argument("--inner", type=int, default=1000)
    p.add_argument("--finest", type=int, default=32)
    p.add_argument("--seed", type=int, default=5)
    args = p.parse_args()

    base = ModelSpec(TimeGrid(1.0, args.finest), 100.0, 0.0, 100.0, BoundedSigmoidVol(0.1, 0.4),
                     mu=0.08, r=0.03, a1=1.0, a2=1.0, a3=0.0, a4=0.0, sigma1_y=0.5, sigma2_y=0.3)
    B, N = args.outer, args.finest
    dW1, dW2, _, _ = draw_outer_batch(args.seed, 0, B, N, 1 / N)
    n = N
    while n >= 4:
        spec = base.with_(grid=TimeGrid(1.0, n))
        f = N // n
        rep = clark_ocone_error(spec, build_min_entropy_shift(spec), dW1.reshape(B, n, f).sum(-1),
                                dW2.reshape(B, n, f).sum(-1), np.arange(B), args.inner, args.seed)
        print(f"n={n:4d}  error {rep.estimate:8.4f} +- {rep.std_error:.4f}")
        n //= 2


if __name__ == "__main__":
    main()
