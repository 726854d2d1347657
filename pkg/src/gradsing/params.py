"""Parameter regimes for the ball and exterior problems.

All derived constants are computed once at construction. ``p`` may be given
as a float, an int, a :class:`fractions.Fraction` or a string such as
``"7/4"``; rational input is kept exactly in :attr:`Params.p_exact` so that
identities between the constants can be checked without rounding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import RegimeError

DEFAULT_EPS_WEIGHT = 0.1
MAX_EPS_WEIGHT = 0.5


class Regime(str, enum.Enum):
    BALL = "ball"
    EXTERIOR = "exterior"


def _as_exact(p) -> Fraction | None:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, int):
        return Fraction(p)
    if isinstance(p, str):
        return Fraction(p)
    return None


@dataclass(frozen=True)
class Params:
    """Regime constants ``(N, p, alpha, beta, sigma)``.

    Use :func:`new_ball_params` or :func:`new_exterior_params`; the
    constructor does not validate.
    """

    regime: Regime
    N: int
    p: float
    alpha: float
    beta: float
    sigma: float
    c_beta: float
    eps_weight: float | None = None
    p_exact: Fraction | None = field(default=None, compare=False)

    @property
    def q(self) -> float:
        """Conjugate-type exponent ``p/(p-1)``; equals ``sigma+2`` on the ball."""
        return self.p / (self.p - 1.0)

    @property
    def is_ball(self) -> bool:
        return self.regime is Regime.BALL

    def R_t(self, t: float) -> float:
        """Radius where ``beta*r`` and ``t*r**alpha`` balance up to beta: ``t R^(alpha-1) = 1``."""
        return t ** (-1.0 / (self.alpha - 1.0))

    def to_dict(self) -> dict:
        out = {"regime": self.regime.value, "N": self.N, "p": self.p}
        if self.regime is Regime.EXTERIOR:
            out["eps_weight"] = self.eps_weight
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        regime = d.get("regime", "ball")
        if regime == Regime.BALL.value:
            return new_ball_params(d["N"], d["p"])
        if regime == Regime.EXTERIOR.value:
            return new_exterior_params(d["N"], d["p"], d.get("eps_weight", DEFAULT_EPS_WEIGHT))
        raise RegimeError(f"unknown regime {regime!r}")

    # identities -----------------------------------------------------------

    def mu_exponent_identity(self) -> tuple[float, float]:
        """Both sides of ``N-1 - p(alpha-1)/(p-1) = sigma - alpha + 2``."""
        if self.p_exact is not None:
            p = self.p_exact
            a = (p - 1) * (self.N - 1)
            s = (2 - p) / (p - 1)
            return float(self.N - 1 - p * (a - 1) / (p - 1)), float(s - a + 2)
        lhs = self.N - 1 - self.p * (self.alpha - 1.0) / (self.p - 1.0)
        return lhs, self.sigma - self.alpha + 2.0


def _derived(N: int, p_exact: Fraction | None, p: float):
    if p_exact is not None:
        alpha = (p_exact - 1) * (N - 1)
        beta = (p_exact - 1) / (alpha - 1)
        return float(alpha), float(beta), beta
    alpha = (p - 1.0) * (N - 1)
    beta = (p - 1.0) / (alpha - 1.0)
    return alpha, beta, None


def new_ball_params(N: int, p) -> Params:
    """Ball regime ``N >= 3``, ``N/(N-1) < p < 2`` with ``sigma = (2-p)/(p-1)``."""
    p_exact = _as_exact(p)
    p_f = float(p_exact) if p_exact is not None else float(p)
    if int(N) != N or N < 3:
        raise RegimeError(f"N must be an integer >= 3, got {N}")
    N = int(N)
    lo = Fraction(N, N - 1)
    inside = (lo < p_exact < 2) if p_exact is not None else (N / (N - 1) < p_f < 2.0)
    if not inside:
        raise RegimeError(f"ball regime needs {N}/{N - 1} < p < 2 strictly, got p={p}")
    alpha, beta, beta_exact = _derived(N, p_exact, p_f)
    if p_exact is not None:
        sigma = float((2 - p_exact) / (p_exact - 1))
    else:
        sigma = (2.0 - p_f) / (p_f - 1.0)
    c_beta = beta ** (-1.0 / (p_f - 1.0))
    if not alpha > 1.0:
        raise RegimeError("alpha must exceed 1")
    return Params(Regime.BALL, N, p_f, alpha, beta, sigma, c_beta, None, p_exact)


def new_exterior_params(N: int, p, eps_weight: float = DEFAULT_EPS_WEIGHT) -> Params:
    """Exterior regime ``p > N/(N-1)`` with ``sigma = N - 2 + eps_weight``."""
    p_exact = _as_exact(p)
    p_f = float(p_exact) if p_exact is not None else float(p)
    if int(N) != N or N < 3:
        raise RegimeError(f"N must be an integer >= 3, got {N}")
    N = int(N)
    if not p_f > N / (N - 1):
        raise RegimeError(f"exterior regime needs p > {N}/{N - 1}, got p={p}")
    eps = float(eps_weight)
    if not (0.0 < eps <= MAX_EPS_WEIGHT):
        raise RegimeError(f"eps_weight must lie in (0, {MAX_EPS_WEIGHT}], got {eps_weight}")
    alpha, beta, _ = _derived(N, p_exact, p_f)
    sigma = N - 2 + eps
    c_beta = beta ** (-1.0 / (p_f - 1.0))
    if not sigma + 1.0 > alpha / (p_f - 1.0):
        raise RegimeError("sigma + 1 must exceed alpha/(p-1)")
    if sigma + 2.0 - p_f * (sigma + 1.0) > 0.0:
        raise RegimeError(
            f"sigma + 2 - p(sigma + 1) = {sigma + 2.0 - p_f * (sigma + 1.0):.6g} > 0; "
            "the gradient-power estimate would fail"
        )
    return Params(Regime.EXTERIOR, N, p_f, alpha, beta, sigma, c_beta, eps, p_exact)


def sphere_area(N: int) -> float:
    """``|S^(N-1)|``."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
