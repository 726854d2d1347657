"""Singular and exterior solutions of -Lap u = (1+g)|grad u|^p, built and checked numerically."""

from .errors import (
    BandLimitError,
    ConfigError,
    DivergenceError,
    DomainError,
    GradSingError,
    HypothesisError,
    QuadratureError,
    RegimeError,
    SingularSystemError,
    TruncationError,
)
from .params import Params, Regime, new_ball_params, new_exterior_params

__version__ = "0.1.0"

__all__ = [
    "BandLimitError",
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "GradSingError",
    "HypothesisError",
    "Params",
    "QuadratureError",
    "Regime",
    "RegimeError",
    "SingularSystemError",
    "TruncationError",
    "__version__",
    "new_ball_params",
    "new_exterior_params",
]
