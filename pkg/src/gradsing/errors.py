"""Exception hierarchy shared by all solvers."""


class GradSingError(Exception):
    """Base class for library errors."""


class RegimeError(GradSingError, ValueError):
    """Parameters lie outside the admissible regime."""


class DomainError(GradSingError, ValueError):
    """An evaluation point or grid lies outside the operation's domain."""


class BandLimitError(GradSingError, ValueError):
    """Requested spherical-harmonic degree exceeds the angular set's exactness."""


class QuadratureError(GradSingError, RuntimeError):
    pass


class SingularSystemError(GradSingError, RuntimeError):
    pass


class DivergenceError(GradSingError, RuntimeError):
    """A fixed-point or Neumann-series iteration failed to contract."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class ConfigError(GradSingError, ValueError):
    pass


class TruncationError(GradSingError, RuntimeError):
    """Neumann truncations did not stabilize by the last outer radius."""


class HypothesisError(GradSingError, ValueError):
    """Exponent outside the range where an inequality is claimed."""
