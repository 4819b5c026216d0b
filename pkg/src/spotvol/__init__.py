"""Spot volatility estimation from noisy high-frequency observations.

Pre-averaged squared block increments are projected onto a periodized
Daubechies basis and hard-thresholded at data-driven levels.
"""

from .errors import ConfigError, DataError, NumericalError, SpotVolError
from .estimator import EstimatorConfig, VolatilityEstimate, estimate, estimate_coefficient, preaverage
from .kernels import PreAveragingKernel, make_kernel
from .rates import lp_error, rate_exponent, run_campaign
from .simulate import NoiseModel, ObservationSet, VolatilityScenario, make_scenario, simulate_observations
from .wavelets import CoefficientSet, WaveletBasis, analyze, make_basis, synthesize

__version__ = "0.1.0"

__all__ = [
    "SpotVolError",
    "ConfigError",
    "DataError",
    "NumericalError",
    "EstimatorConfig",
    "VolatilityEstimate",
    "estimate",
    "estimate_coefficient",
    "preaverage",
    "PreAveragingKernel",
    "make_kernel",
    "lp_error",
    "rate_exponent",
    "run_campaign",
    "NoiseModel",
    "ObservationSet",
    "VolatilityScenario",
    "make_scenario",
    "simulate_observations",
    "CoefficientSet",
    "WaveletBasis",
    "analyze",
    "make_basis",
    "synthesize",
]
