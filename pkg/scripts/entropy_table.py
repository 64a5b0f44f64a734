"""Relative entropy of the minimal-entropy measure against shifted martingale measures."""

import argparse

import numpy as np

from jumpsv import BoundedSigmoidVol, ModelSpec, TimeGrid
from jumpsv.measure import build_min_entropy_shift, entropy_samples, random_emm_alternatives


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--seed", type=int, default=4)
    args = p.parse_args()

    spec = ModelSpec(TimeGrid(1.0, args.steps), 100.0, 0.0, 100.0, BoundedSigmoidVol(0.1, 0.4),
                     mu=0.08, r=0.03, a1=1.0, a2=0.5, a3=0.5, a4=0.5, lambda1=1.0, lambda2=1.0,
                     sigma1_y=0.5, sigma2_y=0.3)
    offsets = [-0.3, -0.1, -0.02, 0.02, 0.1, 0.3]
    shifts = [build_min_entropy_shift(spec)] + random_emm_alternatives(spec, 4, args.seed, offsets=offsets)
    E = entropy_samples(spec, shifts, args.paths, args.seed)
    m, se = E.mean(axis=1), E.std(axis=1, ddof=1) / np.sqrt(E.shape[1])
    for s, mi, si in zip(shifts, m, se):
        print(f"{s.name:<20}{mi:10.5f} +- {si:.5f}")


if __name__ == "__main__":
    main()
