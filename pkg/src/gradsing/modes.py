"""Mode structure of the linearized operators.

For a harmonic of degree ``k`` the linearized operator reduces, in
``s = ln r``, to

    -a_ss - (N - 2 - c(s)) a_s + lambda_k a = r^2 b,   c(s) = p/(beta + t e^{(alpha-1)s})

Near the origin ``c -> p/beta`` and the equation becomes equidimensional;
its indicial roots decide which power-law branch is admissible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, RegimeError
from .params import Params, Regime


class Operator(str, enum.Enum):
    L0 = "L0"
    LAPLACE = "Laplace"


def lambda_k(N: int, k: int) -> int:
    """Eigenvalue ``k(k+N-2)`` of minus the Laplace-Beltrami operator on ``S^{N-1}``."""
    if k < 0:
        raise ConfigError("k must be nonnegative")
    return k * (k + N - 2)


def multiplicity(N: int, k: int) -> int:
    """Dimension of the degree-``k`` harmonic space on ``S^{N-1}``."""
    if k == 0:
        return 1
    return math.comb(k + N - 1, N - 1) - math.comb(k + N - 3, N - 1)


def drift(params: Params, t: float, s) -> np.ndarray | float:
    """``c(s) = p/(beta + t e^{(alpha-1)s})``; ``t = inf`` gives the Laplace limit ``0``."""
    if math.isinf(t):
        return np.zeros_like(np.asarray(s, dtype=float)) if np.ndim(s) else 0.0
    return params.p / (params.beta + t * np.exp((params.alpha - 1.0) * np.asarray(s, dtype=float)))


def _frac_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if n * n == x.numerator and d * d == x.denominator:
        return Fraction(n, d)
    return None


@dataclass(frozen=True)
class EulerRoots:
    """Roots of ``gamma^2 + b gamma - lambda_k = 0`` in increasing order."""

    k: int
    gamma_minus: float
    gamma_plus: float
    operator: Operator
    b: float
    lam: float
    exact: tuple | None = None

    def residuals(self) -> tuple[float, float]:
        return tuple(g * g + self.b * g - self.lam for g in (self.gamma_minus, self.gamma_plus))


def _quadratic_roots(b, lam):
    disc = b * b + 4 * lam
    root = math.sqrt(float(disc))
    # cancellation-free pair
    if b >= 0:
        g1 = (-float(b) - root) / 2.0
        g2 = -float(lam) / g1 if g1 != 0 else (-float(b) + root) / 2.0
    else:
        g2 = (-float(b) + root) / 2.0
        g1 = -float(lam) / g2 if g2 != 0 else (-float(b) - root) / 2.0
    return min(g1, g2), max(g1, g2)


def euler_roots(params: Params, k: int, operator: Operator | str = Operator.L0) -> EulerRoots:
    """Indicial roots of ``L0`` (drift ``p/beta``) or of the Laplacian for mode ``k``."""
    operator = Operator(operator)
    N = params.N
    lam = lambda_k(N, k)
    exact = None
    if operator is Operator.L0:
        if params.regime is not Regime.BALL:
            raise RegimeError("L0 roots are defined for ball params")
        if params.p_exact is not None:
            p = params.p_exact
            alpha = (p - 1) * (N - 1)
            beta = (p - 1) / (alpha - 1)
            b_ex = N - 2 - p / beta
        else:
            b_ex = None
        b = N - 2 - params.p / params.beta
    else:
        b_ex = Fraction(N - 2)
        b = float(N - 2)
    if b_ex is not None:
        sq = _frac_sqrt(b_ex * b_ex + 4 * lam)
        if sq is not None:
            lo, hi = (-b_ex - sq) / 2, (-b_ex + sq) / 2
            exact = (lo, hi)
            return EulerRoots(k, float(lo), float(hi), operator, float(b_ex), float(lam), exact)
        b = float(b_ex)
    gm, gp = _quadratic_roots(b, lam)
    return EulerRoots(k, gm, gp, operator, b, float(lam), None)


def local_roots(params: Params, t: float, k: int, r: float) -> tuple[float, float]:
    """Roots of the equidimensional equation with the drift frozen at radius ``r``."""
    c = float(drift(params, t, math.log(r)))
    return _quadratic_roots(params.N - 2 - c, lambda_k(params.N, k))


def tau_coefficients(params: Params, t: float, k: int, tau: float) -> tuple[float, float]:
    """Coefficients of ``w_tt + g w_t + C_k w`` for ``w = r^sigma a``, ``tau = ln r``."""
    if params.regime is not Regime.BALL:
        raise RegimeError("tau coefficients are defined for ball params")
    N, sig = params.N, params.sigma
    if math.isinf(tau) and tau < 0:
        c = params.p / params.beta
    else:
        c = float(drift(params, t, tau))
    g = N - 2 - 2 * sig - c
    C = -lambda_k(N, k) + sig * c - sig * (N - 2 - sig)
    return g, C


@dataclass
class KernelDecayReport:
    """Fitted power exponents of the two homogeneous branches of one mode."""

    k: int
    t: float
    singular_exponent: float
    regular_exponent: float
    gamma_minus: float
    gamma_plus: float
    singular_weighted_growth: float
    regular_boundary_value: float
    kernel_trivial: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _fit_slope(s: np.ndarray, a: np.ndarray) -> float:
    return float(np.polyfit(s, np.log(np.abs(a)), 1)[0])


def kernel_decay_diagnostic(params: Params, t: float, k: int, grid, regular_start_decades: float = 10.0) -> KernelDecayReport:
    """Integrate the homogeneous mode equation from both ends and fit exponents.

    The singular branch starts at ``r = 1`` with ``a = 0``, ``a_s = 1`` and is
    integrated inward; its exponent over the innermost decade is compared
    with ``gamma_k^-``. The regular branch starts ``regular_start_decades``
    below ``r_min`` on the frozen-coefficient ``gamma^+`` power law and is
    integrated outward; its exponent over the innermost decade of the grid is
    compared with ``gamma_k^+``. A trivial kernel in the weighted space means
    the first branch makes ``r^sigma |a|`` blow up and the second misses
    ``a(1) = 0``.
    """
    if k < 1:
        raise ConfigError("kernel diagnostic needs k >= 1")
    N, lam = params.N, lambda_k(params.N, k)

    def rhs(s, y):
        c = float(drift(params, t, s))
        return [y[1], -(N - 2 - c) * y[1] + lam * y[0]]

    s_min = math.log(grid.r_min)
    dec = math.log(10.0)
    fit_s = np.linspace(s_min, s_min + dec, 41)
    opts = dict(method="DOP853", rtol=1e-12, atol=1e-14)

    sing = solve_ivp(rhs, (0.0, s_min), [0.0, 1.0], t_eval=fit_s[::-1], **opts)
    a_sing = sing.y[0][::-1]
    s_start = s_min - regular_start_decades * dec
    _, gp0 = local_roots(params, t, k, math.exp(s_start))
    reg = solve_ivp(rhs, (s_start, 0.0), [1.0, gp0], t_eval=np.append(fit_s, 0.0), dense_output=False, **opts)
    a_reg = reg.y[0]
    roots = euler_roots(params, k, Operator.L0)
    e_sing = _fit_slope(fit_s, a_sing)
    e_reg = _fit_slope(fit_s, a_reg[:-1])
    # r^sigma |a| at r_min relative to one decade further out
    growth = abs(a_sing[0]) / (10.0**params.sigma * abs(a_sing[-1]))
    boundary = abs(a_reg[-1]) / max(abs(a_reg[:-1]).max(), 1e-300)
    return KernelDecayReport(
        k=k,
        t=float(t),
        singular_exponent=e_sing,
        regular_exponent=e_reg,
        gamma_minus=roots.gamma_minus,
        gamma_plus=roots.gamma_plus,
        singular_weighted_growth=float(growth),
        regular_boundary_value=float(abs(a_reg[-1])),
        kernel_trivial=bool(e_sing + params.sigma < 0 and boundary > 0),
    )


def root_table(params: Params, k_max: int, operator: Operator | str = Operator.L0) -> list[dict]:
    rows = []
    for k in range(k_max + 1):
        er = euler_roots(params, k, operator)
        rows.append(
            {
                "k": k,
                "gamma_minus": er.gamma_minus,
                "gamma_plus": er.gamma_plus,
                "gamma_minus_plus_sigma": er.gamma_minus + params.sigma,
                "gamma_plus_plus_sigma": er.gamma_plus + params.sigma,
            }
        )
    return rows
