"""Steady-state Fokker-Planck solver with tensor neural networks."""

from .benchmarks import BENCHMARKS, exact_density, exact_normalizer, get_benchmark
from .geometry import Domain, SdeSimConfig
from .problem import Problem, make_gibbs_problem, residual
from .quadrature import QuadratureRule, composite_integrate, gauss_legendre
from .tffn import TffnModel
from .training import TrainConfig, train
from .trbfn import RbfKind, TrbfnModel

__all__ = [
    "BENCHMARKS",
    "Domain",
    "Problem",
    "QuadratureRule",
    "RbfKind",
    "SdeSimConfig",
    "TffnModel",
    "TrainConfig",
    "TrbfnModel",
    "composite_integrate",
    "exact_density",
    "exact_normalizer",
    "gauss_legendre",
    "get_benchmark",
    "make_gibbs_problem",
    "residual",
    "train",
]
