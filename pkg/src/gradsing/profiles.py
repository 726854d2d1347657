"""Explicit radial solution families and their asymptotic bounds.

Ball family (``0 < r <= 1``)::

    u_t(r) = int_r^1 (beta*y + t*y**alpha) ** (-1/(p-1)) dy

Exterior family (``r >= 1``, ``t > beta``)::

    u_t(r) = int_1^r (t*y**alpha - beta*y) ** (-1/(p-1)) dy

First and second derivatives are closed form. Values of ``u_t`` and of the
kernel element ``psi_t = -d/dt u_t`` need quadrature; it is carried out in
``s = ln y`` where the integrands are smooth exponentials.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError, RegimeError
from .params import Params, Regime

_EPSREL = 1e-13


class ProfileKind(str, enum.Enum):
    BALL = "ball"
    EXTERIOR = "exterior"
    KERNEL_PSI = "kernel_psi"


def _check_ball(params: Params, t: float):
    if params.regime is not Regime.BALL:
        raise RegimeError("ball profile requires ball-regime params")
    if not t > 0:
        raise DomainError(f"ball family restricted to t > 0, got {t}")


def _check_ball_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r > 1):
        raise DomainError("ball profiles are defined for 0 < r <= 1")
    return r


def _check_ext(params: Params, t: float, strict: bool = True):
    if params.regime is not Regime.EXTERIOR:
        raise RegimeError("exterior profile requires exterior-regime params")
    if not t > params.beta:
        raise DomainError(f"exterior family needs t > beta = {params.beta:.6g}, got {t}")
    if t < 2 * params.beta:
        if strict:
            raise DomainError(
                f"t={t} < 2*beta; pass strict=False to allow beta < t < 2*beta"
            )
        warnings.warn("t close to beta: the integrand is nearly singular at r=1", stacklevel=3)


def _check_ext_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 1):
        raise DomainError("exterior profiles are defined for r >= 1")
    return r


def _panel_quad(integrand, s_nodes: np.ndarray) -> np.ndarray:
    """Integrals of ``integrand(s)`` over consecutive panels ``[s_i, s_{i+1}]``."""
    out = np.empty(len(s_nodes) - 1)
    for i in range(len(out)):
        a, b = s_nodes[i], s_nodes[i + 1]
        if a == b:
            out[i] = 0.0
            continue
        val, err = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=_EPSREL, limit=200)
        if not np.isfinite(val):
            raise QuadratureError(f"non-finite quadrature on [{a}, {b}]")
        out[i] = val
    return out


def _integral_to_one(integrand, r) -> np.ndarray:
    """``int_r^1`` in log coordinates for every entry of ``r`` (vectorized by panels)."""
    r = np.atleast_1d(r)
    s = np.log(r)
    order = np.argsort(s)
    s_sorted = np.append(s[order], 0.0)
    panels = _panel_quad(integrand, s_sorted)
    tail = np.cumsum(panels[::-1])[::-1]
    out = np.empty_like(s)
    out[order] = tail
    return out


def _integral_from_one(integrand, r) -> np.ndarray:
    r = np.atleast_1d(r)
    s = np.log(r)
    order = np.argsort(s)
    s_sorted = np.insert(s[order], 0, 0.0)
    panels = _panel_quad(integrand, s_sorted)
    out = np.empty_like(s)
    out[order] = np.cumsum(panels)
    return out


def _shape(r, values):
    return values.reshape(np.shape(r)) if np.ndim(r) else float(values[0])


# ---------------------------------------------------------------------------
# ball family


def u_ball(params: Params, t: float, r):
    """Value of the ball solution ``u_t`` at radius (or radii) ``r``."""
    _check_ball(params, t)
    rr = _check_ball_r(r)
    a1, sig, e = params.alpha - 1.0, params.sigma, 1.0 / (params.p - 1.0)

    def f(s):
        return math.exp(-sig * s) * (params.beta + t * math.exp(a1 * s)) ** (-e)

    return _shape(r, _integral_to_one(f, rr.ravel()))


def du_ball(params: Params, t: float, r):
    """``u_t'(r) = -(beta r + t r^alpha)^(-1/(p-1))``."""
    _check_ball(params, t)
    rr = _check_ball_r(r)
    val = -((params.beta * rr + t * rr**params.alpha) ** (-1.0 / (params.p - 1.0)))
    return val if np.ndim(r) else float(val)


def d2u_ball(params: Params, t: float, r):
    _check_ball(params, t)
    rr = _check_ball_r(r)
    e = 1.0 / (params.p - 1.0)
    base = params.beta * rr + t * rr**params.alpha
    val = e * base ** (-e - 1.0) * (params.beta + t * params.alpha * rr ** (params.alpha - 1.0))
    return val if np.ndim(r) else float(val)


def weighted_du_ball(params: Params, t: float, r):
    """``r^(sigma+1) u_t'(r) = -(beta + t r^(alpha-1))^(-1/(p-1))`` without cancellation."""
    _check_ball(params, t)
    rr = _check_ball_r(r)
    val = -((params.beta + t * rr ** (params.alpha - 1.0)) ** (-1.0 / (params.p - 1.0)))
    return val if np.ndim(r) else float(val)


def psi_t(params: Params, t: float, r):
    """Kernel element ``psi_t = -d/dt u_t``, nonnegative with ``psi_t(1) = 0``."""
    _check_ball(params, t)
    rr = _check_ball_r(r)
    a1, q = params.alpha - 1.0, params.q
    expo = params.alpha + 1.0 - q
    pre = 1.0 / (params.p - 1.0)

    def f(s):
        return pre * math.exp(expo * s) * (params.beta + t * math.exp(a1 * s)) ** (-q)

    return _shape(r, _integral_to_one(f, rr.ravel()))


def dpsi_t(params: Params, t: float, r):
    _check_ball(params, t)
    rr = _check_ball_r(r)
    val = -(rr**params.alpha) * (params.beta * rr + t * rr**params.alpha) ** (-params.q) / (params.p - 1.0)
    return val if np.ndim(r) else float(val)


def d2psi_t(params: Params, t: float, r):
    _check_ball(params, t)
    rr = _check_ball_r(r)
    a, b, q = params.alpha, params.beta, params.q
    base = b * rr + t * rr**a
    val = -(a * rr ** (a - 1.0) * base ** (-q) - q * rr**a * base ** (-q - 1.0) * (b + t * a * rr ** (a - 1.0)))
    val = val / (params.p - 1.0)
    return val if np.ndim(r) else float(val)


def ball_residual(params: Params, t: float, r):
    """Weighted residual ``r^(sigma+2) (-Delta u_t - |u_t'|^p)`` from analytic derivatives."""
    rr = np.asarray(r, dtype=float)
    d1 = du_ball(params, t, rr)
    d2 = d2u_ball(params, t, rr)
    res = -(d2 + (params.N - 1) * d1 / rr) - np.abs(d1) ** params.p
    return rr ** (params.sigma + 2.0) * res


# ---------------------------------------------------------------------------
# exterior family


def u_exterior(params: Params, t: float, r, strict: bool = True):
    """Value of the exterior solution on ``r >= 1``; increasing and bounded."""
    _check_ext(params, t, strict)
    rr = _check_ext_r(r)
    a1, e = params.alpha - 1.0, 1.0 / (params.p - 1.0)
    lin = 1.0 - e  # y^(1 - 1/(p-1)) prefactor in log coordinates

    def f(s):
        return math.exp(lin * s) * (t * math.exp(a1 * s) - params.beta) ** (-e)

    return _shape(r, _integral_from_one(f, rr.ravel()))


def u_exterior_limit(params: Params, t: float, strict: bool = True) -> float:
    """``lim_{r -> inf} u_t(r)``."""
    _check_ext(params, t, strict)
    a1, e = params.alpha - 1.0, 1.0 / (params.p - 1.0)
    lin = 1.0 - e

    def f(s):
        # factored so large s cannot overflow
        return math.exp((lin - a1 * e) * s) * (t - params.beta * math.exp(-a1 * s)) ** (-e)

    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=_EPSREL, limit=400)
    return val


def du_exterior(params: Params, t: float, r, strict: bool = True):
    """``u_t'(r) = (t r^alpha - beta r)^(-1/(p-1))``."""
    _check_ext(params, t, strict)
    rr = _check_ext_r(r)
    val = (t * rr**params.alpha - params.beta * rr) ** (-1.0 / (params.p - 1.0))
    return val if np.ndim(r) else float(val)


def d2u_exterior(params: Params, t: float, r, strict: bool = True):
    _check_ext(params, t, strict)
    rr = _check_ext_r(r)
    e = 1.0 / (params.p - 1.0)
    base = t * rr**params.alpha - params.beta * rr
    val = -e * base ** (-e - 1.0) * (t * params.alpha * rr ** (params.alpha - 1.0) - params.beta)
    return val if np.ndim(r) else float(val)


def exterior_residual(params: Params, t: float, r, strict: bool = True):
    """Pointwise ``-Delta u_t - |u_t'|^p`` (unweighted) from analytic derivatives."""
    rr = np.asarray(r, dtype=float)
    d1 = du_exterior(params, t, rr, strict)
    d2 = d2u_exterior(params, t, rr, strict)
    return -(d2 + (params.N - 1) * d1 / rr) - np.abs(d1) ** params.p


def far_field_flux(params: Params, t: float, r, strict: bool = True):
    """``r^(N-2) (x . grad u_t) = (t - beta r^(1-alpha))^(-1/(p-1))``."""
    _check_ext(params, t, strict)
    rr = _check_ext_r(r)
    val = (t - params.beta * rr ** (1.0 - params.alpha)) ** (-1.0 / (params.p - 1.0))
    return val if np.ndim(r) else float(val)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """One member of an explicit family, bound to its parameters."""

    params: Params
    t: float
    kind: ProfileKind = ProfileKind.BALL

    def __post_init__(self):
        if self.kind is ProfileKind.EXTERIOR:
            _check_ext(self.params, self.t, strict=False)
        else:
            _check_ball(self.params, self.t)

    def value(self, r):
        if self.kind is ProfileKind.BALL:
            return u_ball(self.params, self.t, r)
        if self.kind is ProfileKind.EXTERIOR:
            return u_exterior(self.params, self.t, r, strict=False)
        return psi_t(self.params, self.t, r)

    def deriv(self, r):
        if self.kind is ProfileKind.BALL:
            return du_ball(self.params, self.t, r)
        if self.kind is ProfileKind.EXTERIOR:
            return du_exterior(self.params, self.t, r, strict=False)
        return dpsi_t(self.params, self.t, r)

    def deriv2(self, r):
        if self.kind is ProfileKind.BALL:
            return d2u_ball(self.params, self.t, r)
        if self.kind is ProfileKind.EXTERIOR:
            return d2u_exterior(self.params, self.t, r, strict=False)
        return d2psi_t(self.params, self.t, r)


@dataclass
class AsymptoticReport:
    """Pointwise check of the two-branch gradient bound on a grid."""

    t: float
    violations: int
    max_rel_violation: float
    min_slack: float
    weighted_sup: float
    c_beta: float
    crossover_radius: float
    second_branch_active_from: float | None
    passed: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def asymp_check(params: Params, t: float, grid, tol: float = 1e-12) -> AsymptoticReport:
    """Check ``|u_t'| <= min{C_beta r^(-1/(p-1)), t^(-1/(p-1)) r^(1-N)}`` on the grid nodes."""
    _check_ball(params, t)
    r = grid.r if hasattr(grid, "r") else np.asarray(grid, dtype=float)
    e = 1.0 / (params.p - 1.0)
    du = np.abs(du_ball(params, t, r))
    b1 = params.c_beta * r ** (-e)
    b2 = t ** (-e) * r ** (1.0 - params.N)
    bound = np.minimum(b1, b2)
    rel = (du - bound) / bound
    viol = rel > tol
    weighted = np.abs(weighted_du_ball(params, t, r))
    crossover = (params.beta / t) ** (1.0 / (params.alpha - 1.0))
    active = r[b2 <= b1]
    return AsymptoticReport(
        t=float(t),
        violations=int(np.count_nonzero(viol)),
        max_rel_violation=float(max(rel.max(), 0.0)),
        min_slack=float((-rel).min()),
        weighted_sup=float(weighted.max()),
        c_beta=params.c_beta,
        crossover_radius=float(crossover),
        second_branch_active_from=float(active.min()) if active.size else None,
        passed=bool(not viol.any() and weighted.max() <= params.c_beta * (1 + tol)),
    )
