"""Mode-wise solver for the linearized operator on the punctured unit ball.

    L_t phi = -Lap phi + p x.grad(phi) / (beta |x|^2 + t |x|^(alpha+1)),   phi = 0 on |x| = 1

The radial mode has a kernel (spanned by ``psi_t``), so it is solved by the
explicit integrating-factor formula anchored at ``R_t`` with
``t R_t^(alpha-1) = 1``. Higher modes are two-point boundary problems in
``s = ln r`` discretized by finite differences; at the inner end a Robin
condition keeps only the admissible power-law branch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import ConfigError, DomainError, QuadratureError, RegimeError, SingularSystemError
from .fields import (
    DEFAULT_FD_ORDER,
    ModeField,
    RadialGrid,
    grid_with_spacing,
    norm_Y,
    norms,
)
from .modes import drift, lambda_k, local_roots
from .params import Params, Regime, sphere_area

POINTS_PER_DECADE = 85
DEFAULT_R_MIN = 1e-6


def _require_ball(params: Params):
    if params.regime is not Regime.BALL:
        raise RegimeError("ball solver requires ball-regime params")


def ball_grid(
    params: Params,
    t: float,
    r_min: float | None = None,
    points_per_decade: int = POINTS_PER_DECADE,
    fd_order: int = DEFAULT_FD_ORDER,
) -> RadialGrid:
    """Log grid on ``[r_min, 1]`` reaching at least two decades below ``R_t``."""
    _require_ball(params)
    lo = DEFAULT_R_MIN if r_min is None else r_min
    if t > 0 and not math.isinf(t):
        lo = min(lo, params.R_t(t) / 100.0)
    h = math.log(10.0) / points_per_decade
    return grid_with_spacing(math.log(lo), 0.0, h, fd_order)


def mu_t(params: Params, t: float, r):
    """Integrating factor ``r^(sigma-alpha+2) ((beta + t r^(alpha-1))/(beta + t))^(p/(p-1))``."""
    _require_ball(params)
    rr = np.asarray(r, dtype=float)
    if np.any(rr <= 0) or np.any(rr > 1):
        raise DomainError("mu_t is defined on 0 < r <= 1")
    expo = params.sigma - params.alpha + 2.0
    ratio = (params.beta + t * rr ** (params.alpha - 1.0)) / (params.beta + t)
    val = rr**expo * ratio**params.q
    return val if np.ndim(r) else float(val)


def mode0_case_i_bound(params: Params) -> float:
    """``((beta+1)/beta)^(p/(p-1)) / (alpha-1)``: the bound inside ``R_t``."""
    return ((params.beta + 1.0) / params.beta) ** params.q / (params.alpha - 1.0)


def mode0_constant_C1(params: Params) -> float:
    """Constant of the outer-region estimate, from ``(a+b)^q <= 2^(q-1)(a^q+b^q)``."""
    q = params.q
    return 2.0 ** (q - 1.0) * max(params.beta**q, params.p - 1.0) / (params.alpha - 1.0)


def mode0_bound(params: Params) -> float:
    return max(mode0_case_i_bound(params), 2.0 * mode0_constant_C1(params))


# ---------------------------------------------------------------------------
# discrete mode operator


def mode_operator(grid: RadialGrid, params: Params, t: float, k: int) -> sparse.csr_matrix:
    """``A`` with ``(A a)_i = r_i^2 (L_t a)_i`` for mode ``k`` (no boundary rows)."""
    c = drift(params, t, grid.s)
    coef = params.N - 2.0 - c
    lam = lambda_k(params.N, k)
    return (-grid.D2 - sparse.diags(coef) @ grid.D1 + lam * sparse.identity(grid.M)).tocsr()


def apply_mode(grid: RadialGrid, params: Params, t: float, k: int, a: np.ndarray) -> np.ndarray:
    """Mode-``k`` image ``(L_t a)(r)`` on the nodes (works row-wise on 2-D input)."""
    A = mode_operator(grid, params, t, k)
    return (A @ np.asarray(a, dtype=float).T).T / grid.r**2


def weighted_mode_sup(grid: RadialGrid, params: Params, a: np.ndarray, gradient_only: bool = False) -> float:
    """``sup r^sigma |a| + r^(sigma+1) |a'|`` for a single coefficient profile."""
    r, sig = grid.r, params.sigma
    grad = r ** (sig + 1.0) * np.abs(grid.dr(a))
    if gradient_only:
        return float(grad.max())
    return float((r**sig * np.abs(a) + grad).max())


# ---------------------------------------------------------------------------
# radial mode


@dataclass
class Mode0Solution:
    """Radial-mode solution anchored at ``R_t``."""

    t: float
    R_t: float
    anchor: float
    a0: np.ndarray
    a0_prime: np.ndarray
    weighted_gradient_sup: float
    weighted_gradient_sup_inside: float
    bound: float
    residual: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "R_t": self.R_t,
            "anchor": self.anchor,
            "weighted_gradient_sup": self.weighted_gradient_sup,
            "weighted_gradient_sup_inside": self.weighted_gradient_sup_inside,
            "bound": self.bound,
            "residual": self.residual,
        }


def _mode0_profiles(grid: RadialGrid, params: Params, t: float, b: np.ndarray):
    """Return ``(a, r a', anchor)`` for ``-a'' - (N-1)a'/r + p a'/(beta r + t r^alpha) = b``."""
    r = grid.r
    R = params.R_t(t)
    anchor = min(R, 1.0)
    if anchor < grid.r_min * (1 - 1e-12):
        raise ConfigError(f"grid starts at {grid.r_min:.3g}, above the anchor radius R_t={R:.3g}")
    mu = mu_t(params, t, r)
    F = grid.cumulative(mu * b * r)  # int_{r_min}^{r} mu b d(tau)
    F_anchor = grid.interp(F, anchor)
    J = F - F_anchor
    if not np.all(np.isfinite(J)):
        raise QuadratureError("non-finite inner integral in the radial mode")
    Da = -r * J / mu
    a = -grid.cumulative_from_end(Da)
    return a, Da, anchor


def solve_mode0(params: Params, t: float, b0, grid: RadialGrid | None = None) -> Mode0Solution:
    """Explicit radial solve ``a(r) = int_r^1 mu^-1(s) int_{R_t}^s mu b``.

    ``b0`` is a profile on ``grid`` or a callable of ``r``.
    """
    _require_ball(params)
    if not t > 0:
        raise DomainError("radial solve needs t > 0")
    if t < 1:
        warnings.warn("t < 1: R_t > 1, anchoring the radial solve at r = 1", stacklevel=2)
    grid = grid or ball_grid(params, t)
    b = b0(grid.r) if callable(b0) else np.asarray(b0, dtype=float)
    a, Da, anchor = _mode0_profiles(grid, params, t, b)
    r, sig = grid.r, params.sigma
    wgrad = r**sig * np.abs(Da)  # r^(sigma+1) |a'|
    inside = r < anchor
    res = apply_mode(grid, params, t, 0, a) - b
    res_w = (r ** (sig + 2.0) * np.abs(res))[1:-1]
    return Mode0Solution(
        t=float(t),
        R_t=params.R_t(t),
        anchor=anchor,
        a0=a,
        a0_prime=Da / r,
        weighted_gradient_sup=float(wgrad.max()),
        weighted_gradient_sup_inside=float(wgrad[inside].max()) if inside.any() else 0.0,
        bound=mode0_bound(params),
        residual=float(res_w.max()),
    )


# ---------------------------------------------------------------------------
# higher modes


def _inner_robin(params: Params, t: float, k: int, r0: float) -> tuple[float, float]:
    """``(gamma+, 1/(gamma- + sigma))`` with the drift frozen at ``r0``.

    The admissible local behaviour is ``a = A r^-sigma + C r^gamma+`` for a
    right-hand side ``r^2 b ~ r^-sigma``, which gives
    ``Da - gamma+ a = r^2 b / (gamma- + sigma)``.
    """
    gm, gp = local_roots(params, t, k, r0)
    denom = gm + params.sigma
    if denom == 0:
        raise SingularSystemError("inner root coincides with the weight exponent")
    return gp, 1.0 / denom


class BallLinearSolver:
    """Cached mode solver on a fixed grid for one ``t``."""

    def __init__(self, params: Params, t: float, grid: RadialGrid | None = None):
        _require_ball(params)
        if not t > 0:
            raise DomainError("linear solver needs t > 0")
        self.params = params
        self.t = float(t)
        self.grid = grid or ball_grid(params, t)
        self.grid.require_resolution()
        self._lu: dict[int, object] = {}
        self._robin: dict[int, tuple[float, float]] = {}

    def _factor(self, k: int):
        if k in self._lu:
            return self._lu[k], self._robin[k]
        g = self.grid
        A = mode_operator(g, self.params, self.t, k).tolil()
        gp, scale = _inner_robin(self.params, self.t, k, g.r_min)
        A[0, :] = g.D1[0, :] - gp * sparse.eye(1, g.M, 0).tocsr()
        A[g.M - 1, :] = 0.0
        A[g.M - 1, g.M - 1] = 1.0
        try:
            lu = splu(A.tocsc())
        except RuntimeError as exc:  # exactly singular
            raise SingularSystemError(f"mode {k} collocation matrix is singular") from exc
        diag = np.abs(lu.U.diagonal())
        if diag.min() <= 1e-14 * diag.max():
            raise SingularSystemError(f"mode {k} collocation matrix is numerically rank-deficient")
        self._lu[k] = lu
        self._robin[k] = (gp, scale)
        return lu, (gp, scale)

    def solve_modek(self, k: int, b: np.ndarray) -> np.ndarray:
        """Solve mode ``k >= 1``; ``b`` may hold several profiles as rows."""
        if k < 1:
            raise ConfigError("solve_modek handles k >= 1; use solve_mode0 for k = 0")
        lu, (_, scale) = self._factor(k)
        b = np.asarray(b, dtype=float)
        rhs = (self.grid.r**2 * b).T.copy()
        rhs[0] = rhs[0] * scale
        rhs[-1] = 0.0
        return lu.solve(rhs).T

    def solve_mode0(self, b: np.ndarray) -> np.ndarray:
        b = np.atleast_2d(b)
        return np.array([_mode0_profiles(self.grid, self.params, self.t, row)[0] for row in b])

    def solve(self, f: ModeField) -> ModeField:
        """Mode-wise solve of ``L_t phi = f`` on the solver grid."""
        if f.grid.M != self.grid.M or not np.allclose(f.grid.r, self.grid.r, rtol=1e-13):
            raise ConfigError("right-hand side is not sampled on the solver grid")
        out = np.zeros_like(f.coeffs)
        by_k: dict[int, list[int]] = {}
        for i, (k, _) in enumerate(f.labels):
            by_k.setdefault(k, []).append(i)
        for k, rows in by_k.items():
            block = f.coeffs[rows]
            if not np.any(block):
                continue
            out[rows] = self.solve_mode0(block) if k == 0 else self.solve_modek(k, block)
        return ModeField(self.grid, list(f.labels), out, self.params)

    def apply(self, phi: ModeField) -> ModeField:
        """Discrete ``L_t phi``."""
        out = np.zeros_like(phi.coeffs)
        by_k: dict[int, list[int]] = {}
        for i, (k, _) in enumerate(phi.labels):
            by_k.setdefault(k, []).append(i)
        for k, rows in by_k.items():
            out[rows] = apply_mode(phi.grid, self.params, self.t, k, phi.coeffs[rows])
        return ModeField(phi.grid, list(phi.labels), out, self.params)

    def residual(self, phi: ModeField, f: ModeField, interior: int = 1) -> float:
        """Weighted sup of ``L_t phi - f`` away from the two boundary rows."""
        diff = self.apply(phi) - f
        lo, hi = diff.grid.r[interior], diff.grid.r[-1 - interior]
        return norm_Y(diff, r_range=(lo, hi))


def solve_modek(params: Params, t: float, k: int, bk, grid: RadialGrid | None = None) -> np.ndarray:
    """Convenience wrapper: one mode-``k`` solve on ``grid``."""
    solver = BallLinearSolver(params, t, grid)
    b = bk(solver.grid.r) if callable(bk) else bk
    return solver.solve_modek(k, b)


# ---------------------------------------------------------------------------


@dataclass
class LinearSolveReport:
    """Outcome of one linear solve with its measured estimate ratio."""

    phi: ModeField
    ratio: float
    residual: float
    norm_X: float
    norm_Y: float
    mode_split_D: float
    per_mode: dict = field(default_factory=dict)
    iterations: int = 1
    ok: bool = True

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "residual": self.residual,
            "norm_X": self.norm_X,
            "norm_Y": self.norm_Y,
            "mode_split_D": self.mode_split_D,
            "per_mode": {str(k): v for k, v in sorted(self.per_mode.items())},
            "iterations": self.iterations,
            "ok": self.ok,
        }


def mode_split(f: ModeField) -> tuple[float, float, float]:
    """``(||f_0||_Y, ||f - f_0||_Y, D)`` with ``f_0`` the spherical mean of ``f``."""
    f0 = ModeField(f.grid, [(0, 0)], f.mode(0, 0)[None, :], f.params)
    n = norm_Y(f)
    n0 = norm_Y(f0)
    n1 = norm_Y(f - f0)
    return n0, n1, (n0 + n1) / n if n > 0 else 0.0


def solve_Lt(params: Params, t: float, f: ModeField, tol: float = 1e-5, solver: BallLinearSolver | None = None) -> LinearSolveReport:
    """Solve ``L_t phi = f`` and measure ``||phi||_X / ||f||_Y``."""
    solver = solver or BallLinearSolver(params, t, f.grid)
    phi = solver.solve(f)
    nY = norm_Y(f)
    rep = norms(phi)
    res = solver.residual(phi, f)
    per_mode = {}
    for k in sorted({k for k, _ in f.labels}):
        rows = [i for i, (kk, _) in enumerate(f.labels) if kk == k]
        per_mode[k] = {
            "weighted_sup": max(weighted_mode_sup(phi.grid, params, phi.coeffs[i]) for i in rows),
        }
    _, _, D = mode_split(f)
    ratio = rep.norm_X / nY if nY > 0 else 0.0
    scale = max(nY, 1e-300)
    return LinearSolveReport(
        phi=phi,
        ratio=ratio,
        residual=res,
        norm_X=rep.norm_X,
        norm_Y=nY,
        mode_split_D=D,
        per_mode=per_mode,
        ok=bool(res <= tol * scale or nY == 0),
    )


def radial_unit_rhs(params: Params, grid: RadialGrid) -> ModeField:
    """``f = r^(-sigma-2)``, the extremal radial right-hand side with ``||f||_Y = 1``."""
    return ModeField.from_radial(grid, grid.r ** (-params.sigma - 2.0), params)


def radial_coefficient(values: np.ndarray, params: Params) -> np.ndarray:
    """Mode-``(0,0)`` coefficient of a radial function given pointwise."""
    return math.sqrt(sphere_area(params.N)) * np.asarray(values)
