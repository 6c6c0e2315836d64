"""Numerics for the linear stochastic fractional heat equation.

Closed-form moments, certified spectral quadrature for the canonical metrics,
exact Gaussian samplers and growth-rate experiments for sup-norms of u.
"""

from .errors import (ConfigError, NumericalContractError, NotIntegrable, OutOfRange,
                     ToleranceNotMet)
from .model import ModelParams, constants, psi, spectral_density, validate, variance_law

__version__ = "0.1.0"

__all__ = ["ConfigError", "NumericalContractError", "NotIntegrable", "OutOfRange", "ToleranceNotMet",
           "ModelParams", "constants", "psi", "spectral_density", "validate", "variance_law"]
