"""Model configurations shared by the tests."""

from jumpsv import BoundedSigmoidVol, ConstantVol, ModelSpec, TimeGrid

SIGMOID = BoundedSigmoidVol(0.1, 0.4)


def black_scholes(n=256, vol=0.2, r=0.0):
    return ModelSpec(TimeGrid(1.0, n), s0=100.0, y0=0.0, strike=100.0, vol=ConstantVol(vol),
                     mu=r, r=r, a1=1.0, a2=1.0, a3=0.0, a4=0.0)


def brownian(n=32, **kw):
    base = dict(s0=100.0, y0=0.0, strike=100.0, vol=SIGMOID, mu=0.08, r=0.03,
                a1=1.0, a2=1.0, a3=0.0, a4=0.0, sigma1_y=0.5, sigma2_y=0.3)
    base.update(kw)
    return ModelSpec(TimeGrid(1.0, n), **base)


def pure_poisson(n=32, **kw):
    base = dict(s0=100.0, y0=0.0, strike=100.0, vol=SIGMOID, mu=0.08, r=0.03,
                a1=0.0, a2=0.0, a3=1.0, a4=1.0, lambda1=1.0, lambda2=0.5, sigma1_y=0.3, sigma2_y=0.3)
    base.update(kw)
    return ModelSpec(TimeGrid(1.0, n), **base)


def mixed(n=32, **kw):
    base = dict(s0=100.0, y0=0.0, strike=100.0, vol=SIGMOID, mu=0.08, r=0.03,
                a1=1.0, a2=0.5, a3=0.5, a4=0.5, lambda1=1.0, lambda2=1.0, sigma1_y=0.5, sigma2_y=0.3)
    base.update(kw)
    return ModelSpec(TimeGrid(1.0, n), **base)


CONFIGS = {"brownian": brownian, "pure_poisson": pure_poisson, "mixed": mixed}
