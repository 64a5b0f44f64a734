"""Simulation and variance-minimizing hedging for a jump stochastic-volatility market."""

from .coeffs import (BoundedSigmoidVol, Coefficient, ConstantVol, ModelSpec, TimeGrid, eval_coefficient,
                     validate)
from .errors import ConfigurationError, ModelViolation, SchemaError, SolverError
from .hedge import (EstimatorConfig, HedgePlan, Strategy, compare_strategies, estimate_eta, h2_objective,
                    hedging_error_variance, optimal_eta, price, replicate)
from .malliavin import (brownian_derivative_payoff, brownian_derivative_Y, cond_expect_derivative,
                        poisson_shift_payoff)
from .mc import MCReport
from .measure import (GirsanovShift, build_min_entropy_shift, constant_shift, doleans_exponential, emm_residual,
                      relative_entropy, solve_min_entropy_beta3)
from .simulate import DrivingNoise, MarketPath, evolve, gen_noise

__version__ = "0.1.0"
