"""Fixed-point construction of singular solutions on the punctured ball.

We look for ``u = u_t + phi`` with ``-Lap u = (1+g)|grad u|^p``. Since
``u_t`` solves the unperturbed equation, ``phi`` satisfies

    L_t phi = g |grad u_t + grad phi|^p + B(grad u_t, grad phi)

with ``B(x, y) = |x+y|^p - |x|^p - p|x|^(p-2) x.y``. The right-hand side
is evaluated pointwise (on the angular set when ``N = 3``) and projected
back onto harmonics; ``L_t`` is inverted mode by mode.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import profiles
from .brackets import gradient_bracket
from .errors import ConfigError, DivergenceError
from .fields import (
    AngularSet,
    ModeField,
    RadialGrid,
    angular_set_for,
    decompose_N3,
    norm_X,
    norm_Y,
    sh_labels,
    synthesize_N3,
)
from .linear_ball import POINTS_PER_DECADE, BallLinearSolver, apply_mode, ball_grid
from .params import Params, sphere_area


class GKind(str, enum.Enum):
    POWER_RADIAL = "power_radial"
    POWER_ANGULAR = "power_angular"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PerturbationG:
    """Nonnegative coefficient ``g`` with ``g(0) = 0``.

    ``power_radial``: ``c r^q``; ``power_angular``: ``c r^q (1 + x_N/(2r))``;
    ``custom``: ``func(r, dirs)`` with ``r`` of shape ``(M, 1)`` and unit
    directions of shape ``(1, n, N)``.
    """

    kind: GKind = GKind.POWER_RADIAL
    amplitude: float = 0.0
    holder_exponent: float = 1.0
    func: object = None
    radial_hint: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", GKind(self.kind))
        if self.kind is GKind.CUSTOM:
            if not callable(self.func):
                raise ConfigError("custom g needs a callable")
            probe_dirs = np.eye(3)[None, :, :]
            at0 = np.asarray(self.func(np.zeros((1, 1)), probe_dirs), dtype=float)
            if np.any(at0 > 0):
                raise ConfigError("g(0) > 0 violates the hypothesis g(0) = 0")
            sample = np.asarray(self.func(np.linspace(0.0, 1.0, 11)[:, None], probe_dirs), dtype=float)
            if np.any(sample < 0) or not np.all(np.isfinite(sample)):
                raise ConfigError("g must be finite and nonnegative")
            return
        if self.amplitude < 0:
            raise ConfigError("g amplitude must be nonnegative")
        if self.amplitude > 0 and not self.holder_exponent > 0:
            raise ConfigError("g(0) > 0 violates the hypothesis g(0) = 0 (need holder_exponent > 0)")

    @property
    def is_zero(self) -> bool:
        return self.kind is not GKind.CUSTOM and self.amplitude == 0.0

    @property
    def is_radial(self) -> bool:
        return self.kind is GKind.POWER_RADIAL or (self.kind is GKind.CUSTOM and self.radial_hint)

    def __call__(self, r: np.ndarray, dirs: np.ndarray | None = None) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind is GKind.CUSTOM:
            return np.asarray(self.func(r, dirs), dtype=float)
        base = self.amplitude * r**self.holder_exponent
        if self.kind is GKind.POWER_ANGULAR:
            if dirs is None:
                raise ConfigError("angular g needs directions")
            return base * (1.0 + 0.5 * dirs[..., -1])
        return base

    def sup_near_origin(self, delta: float) -> float:
        if self.kind is GKind.CUSTOM:
            rr = np.linspace(0.0, delta, 65)[:, None]
            dirs = np.eye(3)[None, :, :]
            return float(np.max(self(rr, dirs)))
        fac = 1.5 if self.kind is GKind.POWER_ANGULAR else 1.0
        return fac * self.amplitude * delta**self.holder_exponent

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "amplitude": self.amplitude, "holder_exponent": self.holder_exponent}


@dataclass
class SolverConfig:
    t: float = 1e3
    R: float = 0.1
    delta: float = 0.1
    max_iter: int = 50
    tol_X: float = 1e-8
    K_max: int = 8
    r_min: float | None = None
    points_per_decade: int = POINTS_PER_DECADE
    divergence_patience: int = 3
    residual_tol: float = 1e-3

    def __post_init__(self):
        if not (0 < self.R < 1):
            raise ConfigError("need 0 < R < 1")
        if not (0 < self.delta < 1):
            raise ConfigError("need 0 < delta < 1")
        if not self.t > 1:
            raise ConfigError("need t > 1")
        if self.max_iter < 1 or self.K_max < 0:
            raise ConfigError("bad iteration or band limit settings")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SolveReport:
    """Iteration history and verification of a fixed-point solve."""

    phi: ModeField | None
    iterates: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    phi_norms: list = field(default_factory=list)
    final_residual: float = math.nan
    residual_annuli: list = field(default_factory=list)
    positivity_ok: bool = False
    blowup_ok: bool = False
    converged: bool = False
    iterations: int = 0
    phi_norm_X: float = math.nan
    sup_u_outer: float = math.nan
    u_profile: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.converged and self.positivity_ok and self.blowup_ok and self.extra.get("residual_ok", True))

    def to_dict(self) -> dict:
        out = {
            "iterates": list(self.iterates),
            "contraction_ratios": list(self.contraction_ratios),
            "phi_norms": list(self.phi_norms),
            "final_residual": self.final_residual,
            "residual_annuli": list(self.residual_annuli),
            "positivity_ok": self.positivity_ok,
            "blowup_ok": self.blowup_ok,
            "converged": self.converged,
            "iterations": self.iterations,
            "phi_norm_X": self.phi_norm_X,
            "sup_u_outer": self.sup_u_outer,
        }
        out.update(self.extra)
        return out


# ---------------------------------------------------------------------------
# pointwise machinery


@dataclass
class _PointwiseFrame:
    """Evaluation layout: one column for radial work, the angular set otherwise."""

    radial: bool
    aset: AngularSet | None
    K_max: int

    @property
    def dirs(self) -> np.ndarray:
        if self.radial:
            return np.array([[[0.0, 0.0, 1.0]]])
        return self.aset.directions[None, :, :]


def _frame_for(params: Params, g: PerturbationG, phi: ModeField, K_max: int) -> _PointwiseFrame:
    if g.is_radial and phi.is_radial:
        return _PointwiseFrame(True, None, 0)
    if params.N != 3:
        raise ConfigError("non-radial nonlinear terms are evaluated for N = 3 only")
    K = max(K_max, phi.K_max)
    return _PointwiseFrame(False, angular_set_for(K), K)


def _project(vals: np.ndarray, grid: RadialGrid, params: Params, frame: _PointwiseFrame) -> ModeField:
    if frame.radial:
        return ModeField(grid, [(0, 0)], math.sqrt(sphere_area(params.N)) * vals[:, 0][None, :], params)
    return decompose_N3(vals, grid, params, frame.K_max, frame.aset)


def _grad_stack(phi: ModeField, frame: _PointwiseFrame) -> np.ndarray:
    """Gradient in the (rhat, tangential...) frame, shape ``(M, n, 3)``."""
    gr, gt, gp = phi.gradient(frame.aset)
    return np.stack([gr, gt, gp], axis=-1)


def pointwise_rhs(params: Params, t: float, g: PerturbationG, phi: ModeField, frame: _PointwiseFrame, du: np.ndarray, include_profile: bool = True) -> np.ndarray:
    """``g|grad u_t + grad phi|^p + B(grad u_t, grad phi)`` on the frame, shape ``(M, n)``."""
    grid = phi.grid
    y = _grad_stack(phi, frame)
    x = np.zeros_like(y)
    if include_profile:
        x[..., 0] = du[:, None]
    n = y.shape[1]
    vals = gradient_bracket(x.reshape(-1, 3), y.reshape(-1, 3), params.p).reshape(grid.M, n)
    if not g.is_zero:
        gv = np.broadcast_to(g(grid.r[:, None], frame.dirs), (grid.M, n))
        vals = vals + gv * np.linalg.norm(x + y, axis=-1) ** params.p
    return vals


def nonlinear_rhs(params: Params, t: float, g: PerturbationG, phi: ModeField, K_max: int = 8, include_profile: bool = True) -> ModeField:
    """Mode coefficients of the fixed-point right-hand side at ``phi``."""
    frame = _frame_for(params, g, phi, K_max)
    du = profiles.du_ball(params, t, phi.grid.r)
    vals = pointwise_rhs(params, t, g, phi, frame, du, include_profile)
    return _project(vals, phi.grid, params, frame)


def laplacian_values(fld: ModeField, frame: _PointwiseFrame) -> np.ndarray:
    """Pointwise ``Lap`` of a mode field on the frame."""
    grid = fld.grid
    lap = np.empty_like(fld.coeffs)
    for i, (k, _) in enumerate(fld.labels):
        # -apply_mode with t = inf is the mode Laplacian with the sign flipped
        lap[i] = -apply_mode(grid, fld.params, math.inf, k, fld.coeffs[i])
    return fld.with_coeffs(lap).values(frame.aset)


# ---------------------------------------------------------------------------
# verification


def _annulus_sups(r: np.ndarray, weighted: np.ndarray, r_lo: float) -> list:
    out = []
    j = 0
    while 2.0 ** (-j - 1) >= r_lo * (1 - 1e-12):
        lo, hi = 2.0 ** (-j - 1), 2.0**-j
        m = (r >= lo) & (r <= hi)
        if m.any():
            out.append({"j": j, "r_lo": lo, "r_hi": hi, "sup": float(weighted[m].max())})
        j += 1
    return out


def verify_solution(
    u: ModeField,
    params: Params,
    g: PerturbationG,
    t: float | None = None,
    r_lo: float | None = None,
    frame: _PointwiseFrame | None = None,
    profile: tuple | None = None,
) -> dict:
    """Weighted residual of ``-Lap u - (1+g)|grad u|^p`` by dyadic annuli.

    If ``t`` is given the field is ``u_t + u`` with ``u_t`` differentiated
    analytically; ``profile = (v, v', v'')`` adds another radial function
    given with its derivatives instead. Otherwise ``u`` is taken as is.
    """
    grid = u.grid
    r = grid.r
    frame = frame or _frame_for(params, g, u, u.K_max if not u.is_radial else 0)
    y = _grad_stack(u, frame)
    lap = laplacian_values(u, frame)
    vals = u.values(frame.aset)
    if profile is None and t is not None:
        profile = (profiles.u_ball(params, t, r), profiles.du_ball(params, t, r), profiles.d2u_ball(params, t, r))
    if profile is not None:
        u0, du, d2u = profile
        y = y.copy()
        y[..., 0] += du[:, None]
        lap = lap + (d2u + (params.N - 1) * du / r)[:, None]
        vals = vals + u0[:, None]
    gv = 0.0 if g.is_zero else np.broadcast_to(g(r[:, None], frame.dirs), lap.shape)
    res = -lap - (1.0 + gv) * np.linalg.norm(y, axis=-1) ** params.p
    weighted = (r ** (params.sigma + 2.0))[:, None] * np.abs(res)
    weighted_r = weighted.max(axis=1)
    lo = r_lo if r_lo is not None else 10.0 * grid.r_min
    mask = r >= lo * (1 - 1e-12)
    # the outermost node carries the Dirichlet row, not the equation
    mask[-1] = False
    return {
        "residual": float(weighted_r[mask].max()),
        "annuli": _annulus_sups(r[:-1], weighted_r[:-1], lo),
        "boundary_max_abs": float(np.abs(vals[-1]).max()),
    }


# ---------------------------------------------------------------------------
# Picard iteration


def _initial_field(params: Params, g: PerturbationG, grid: RadialGrid, K_max: int) -> ModeField:
    if g.is_radial or params.N != 3:
        return ModeField.zeros(grid, params, 0).with_labels([(0, 0)])
    return ModeField(grid, sh_labels(K_max), np.zeros(((K_max + 1) ** 2, grid.M)), params)


def picard_solve(params: Params, g: PerturbationG, config: SolverConfig, include_profile: bool = True, solver: BallLinearSolver | None = None) -> SolveReport:
    """Iterate ``phi <- L_t^{-1}(rhs(phi))`` from ``phi = 0``."""
    t = config.t
    grid = solver.grid if solver is not None else ball_grid(params, t, config.r_min, config.points_per_decade)
    solver = solver or BallLinearSolver(params, t, grid)
    phi = _initial_field(params, g, grid, config.K_max)
    frame = _frame_for(params, g, phi, config.K_max)
    du = profiles.du_ball(params, t, grid.r) if include_profile else np.zeros(grid.M)
    rep = SolveReport(phi=None)
    streak = 0
    for it in range(1, config.max_iter + 1):
        vals = pointwise_rhs(params, t, g, phi, frame, du, include_profile)
        rhs = _project(vals, grid, params, frame)
        new = solver.solve(rhs)
        diff = norm_X(new - phi, frame.aset)
        nrm = norm_X(new, frame.aset)
        rep.iterates.append(diff)
        rep.phi_norms.append(nrm)
        if len(rep.iterates) >= 2 and rep.iterates[-2] > 0:
            ratio = diff / rep.iterates[-2]
            rep.contraction_ratios.append(ratio)
            streak = streak + 1 if ratio >= 1.0 else 0
        phi = new
        rep.iterations = it
        if nrm > config.R:
            raise ConfigError(
                f"iterate left the ball of radius R={config.R} (||phi||_X = {nrm:.3g}); "
                "decrease g or increase t"
            )
        if streak >= config.divergence_patience:
            raise DivergenceError("Picard iteration is not contracting", history=list(rep.iterates))
        if diff <= config.tol_X:
            rep.converged = True
            break
    rep.phi = phi
    rep.phi_norm_X = norm_X(phi, frame.aset)
    _finish_report(rep, params, g, t, frame, include_profile)
    rep.extra["residual_ok"] = bool(rep.final_residual <= config.residual_tol)
    rep.extra["t"] = t
    rep.extra["R_t"] = params.R_t(t)
    rep.extra["grid"] = grid.to_dict()
    return rep


def _finish_report(rep: SolveReport, params: Params, g: PerturbationG, t: float, frame: _PointwiseFrame, include_profile: bool):
    phi, grid = rep.phi, rep.phi.grid
    check = verify_solution(phi, params, g, t if include_profile else None, frame=frame)
    rep.final_residual = check["residual"]
    rep.residual_annuli = check["annuli"]
    rep.extra["boundary_max_abs"] = check["boundary_max_abs"]
    u = phi.values(frame.aset)
    if include_profile:
        ut = profiles.u_ball(params, t, grid.r)
        u = u + ut[:, None]
        rep.blowup_ok = bool(u[0].min() >= 0.5 * ut[0])
    else:
        rep.blowup_ok = True
    inner = grid.r < 1.0 - 1e-12
    rep.positivity_ok = bool(np.all(u[inner] > 0)) if include_profile else bool(np.all(np.abs(u) <= 1e-12))
    outer = grid.r >= 0.5
    rep.sup_u_outer = float(u[outer].max())
    rep.u_profile = u.mean(axis=1) if u.shape[1] > 1 else u[:, 0]
    rep.extra["u_min_interior"] = float(u[inner].min())


def reference_direction_profile(rep: SolveReport, params: Params, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``(r, u(r, theta_ref))`` with ``theta_ref`` the north pole direction."""
    phi = rep.phi
    grid = phi.grid
    if phi.is_radial:
        vals = phi.radial_values()
    else:
        vals = synthesize_N3(phi, 0.0, 0.0)
    return grid.r, vals + profiles.u_ball(params, t, grid.r)


def bracket_scaling_probe(params: Params, t: float, phi: ModeField, eps: float) -> float:
    """``||B(grad u_t, eps grad phi)||_Y / ||B(grad u_t, (eps/2) grad phi)||_Y``."""
    g0 = PerturbationG()
    a = nonlinear_rhs(params, t, g0, phi * eps)
    b = nonlinear_rhs(params, t, g0, phi * (eps / 2.0))
    return norm_Y(a) / norm_Y(b)

