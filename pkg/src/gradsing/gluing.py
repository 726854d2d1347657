"""Two-field gluing for the singular problem on a ball ``B_rho``, ``rho < 1``.

The linear problem ``L_t phi = f`` in ``B_rho``, ``phi = 0`` on the boundary,
is split as ``phi = eta*varphi + psi`` with radial cutoffs ``zeta <= eta``:

* ``varphi`` solves ``L_t varphi = zeta f - zeta p psi_r/(beta r + t r^alpha)``
  on ``B_1`` (the singular part, handled by the ball solver);
* ``psi`` solves a regular advection-diffusion problem on ``B_rho`` whose
  drift is switched off near the origin.

Alternating the two solves is a contraction with factor of order
``delta_t = sup r^(sigma+1)/(beta + t r^(alpha-1))``. Because the cutoffs are
radial, everything stays mode by mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy import sparse
from scipy.sparse.linalg import splu

from . import profiles
from .brackets import gradient_bracket
from .errors import ConfigError, DivergenceError, SingularSystemError
from .fields import ModeField, RadialGrid, gradient_norm, norm_X, norm_Y
from .linear_ball import POINTS_PER_DECADE, BallLinearSolver, apply_mode, mode_operator
from .modes import drift, lambda_k
from .nonlinear_ball import PerturbationG, SolveReport, _frame_for, _grad_stack, _project, verify_solution
from .params import Params, sphere_area

DEFAULT_S0 = 0.02
DEFAULT_RHO = 0.9


# ---------------------------------------------------------------------------
# cutoffs


def _smoothstep_poly(n: int) -> Polynomial:
    """Rising smoothstep of class ``C^n``: 0 at 0, 1 at 1, ``n`` flat derivatives at both ends."""
    coef = np.zeros(2 * n + 2)
    for k in range(n + 1):
        coef[n + 1 + k] = math.comb(n + k, k) * math.comb(2 * n + 1, n - k) * (-1) ** k
    return Polynomial(coef)


# flat to seventh order, so order-6 stencils see a smooth function
_STEP = _smoothstep_poly(7)
_STEP_DERIVS = (_STEP, _STEP.deriv(1), _STEP.deriv(2))


def smooth_cutoff(inner: float, outer: float, r, deriv: int = 0):
    """C^7 step: 1 for ``r <= inner``, 0 for ``r >= outer`` (``deriv`` in 0, 1, 2)."""
    if not 0 < inner < outer:
        raise ConfigError("need 0 < inner < outer")
    rr = np.asarray(r, dtype=float)
    w = outer - inner
    s = np.clip((rr - inner) / w, 0.0, 1.0)
    if deriv not in (0, 1, 2):
        raise ConfigError("deriv must be 0, 1 or 2")
    # S(s) = 1 - S(1-s): evaluate on the half nearest 0, where the monomials are small
    mirrored = s > 0.5
    u = np.where(mirrored, 1.0 - s, s)
    S = _STEP_DERIVS[deriv](u)
    if deriv == 0:
        val = np.where(mirrored, S, 1.0 - S)
    elif deriv == 1:
        val = -S / w
    else:
        val = np.where(mirrored, S, -S) / w**2
    return val if np.ndim(r) else float(val)


@dataclass(frozen=True)
class CutoffPair:
    """``zeta`` (1 on ``B_s0``, 0 outside ``B_2s0``) and ``eta`` (1 on ``B_2s0``, 0 outside ``B_4s0``).

    ``eta_identity`` replaces ``eta`` by the constant 1 (degenerate check).
    """

    s0: float
    eta_identity: bool = False

    def zeta(self, r, deriv: int = 0):
        return smooth_cutoff(self.s0, 2 * self.s0, r, deriv)

    def eta(self, r, deriv: int = 0):
        if self.eta_identity:
            rr = np.asarray(r, dtype=float)
            return np.full_like(rr, 1.0 if deriv == 0 else 0.0)
        return smooth_cutoff(2 * self.s0, 4 * self.s0, r, deriv)

    def eta_laplacian(self, r, N: int):
        return self.eta(r, 2) + (N - 1) * self.eta(r, 1) / np.asarray(r, dtype=float)


# ---------------------------------------------------------------------------
# grids


def glue_grids(params: Params, t: float, rho: float, r_min: float | None = None, points_per_decade: int = POINTS_PER_DECADE):
    """Full grid on ``[r_min, 1]`` with ``rho`` as a node, and its ``[r_min, rho]`` slice."""
    if not 0 < rho <= 1:
        raise ConfigError("need 0 < rho <= 1")
    lo = 1e-6 if r_min is None else r_min
    lo = min(lo, params.R_t(t) / 100.0)
    h0 = math.log(10.0) / points_per_decade
    if rho < 1:
        j = max(1, math.ceil(-math.log(rho) / h0))
        h = -math.log(rho) / j
    else:
        j, h = 0, h0
    n = math.ceil(-math.log(lo) / h)
    full = RadialGrid(-n * h, h, n + 1)
    return full, full.slice(0, n - j + 1)


def delta_t(params: Params, t: float, rho: float, n: int = 4001) -> float:
    """``sup_{|x| < rho} |x|^(sigma+1) / (beta + t |x|^(alpha-1))``."""
    r = np.linspace(0.0, rho, n)[1:]
    return float(np.max(r ** (params.sigma + 1.0) / (params.beta + t * r ** (params.alpha - 1.0))))


# ---------------------------------------------------------------------------
# the regular sub-problem


class PsiSolver:
    """``-Lap psi + (1-zeta) p psi_r/(beta r + t r^alpha) = h`` in ``B_rho``, ``psi = 0`` on the boundary."""

    def __init__(self, params: Params, t: float, grid: RadialGrid, cut: CutoffPair):
        self.params, self.t, self.grid, self.cut = params, float(t), grid, cut
        self._lu: dict[int, object] = {}

    def _factor(self, k: int):
        if k in self._lu:
            return self._lu[k]
        g = self.grid
        c = (1.0 - self.cut.zeta(g.r)) * drift(self.params, self.t, g.s)
        A = (-g.D2 - sparse.diags(self.params.N - 2.0 - c) @ g.D1 + lambda_k(self.params.N, k) * sparse.identity(g.M)).tolil()
        # harmonic near the origin: admissible branch r^k
        A[0, :] = g.D1[0, :] - k * sparse.eye(1, g.M, 0).tocsr()
        A[g.M - 1, :] = 0.0
        A[g.M - 1, g.M - 1] = 1.0
        try:
            lu = splu(A.tocsc())
        except RuntimeError as exc:
            raise SingularSystemError(f"psi system for mode {k} is singular") from exc
        self._lu[k] = lu
        return lu

    def solve(self, h: ModeField) -> ModeField:
        out = np.zeros_like(h.coeffs)
        r2 = self.grid.r**2
        for i, (k, _) in enumerate(h.labels):
            if not np.any(h.coeffs[i]):
                continue
            rhs = r2 * h.coeffs[i]
            rhs[0] = 0.0
            rhs[-1] = 0.0
            out[i] = self._factor(k).solve(rhs)
        return ModeField(self.grid, list(h.labels), out, self.params)

    def apply(self, psi: ModeField) -> ModeField:
        g = self.grid
        c = (1.0 - self.cut.zeta(g.r)) * drift(self.params, self.t, g.s)
        out = np.empty_like(psi.coeffs)
        for i, (k, _) in enumerate(psi.labels):
            a = psi.coeffs[i]
            out[i] = (-(g.D2 @ a) - (self.params.N - 2.0 - c) * (g.D1 @ a) + lambda_k(self.params.N, k) * a) / g.r**2
        return psi.with_coeffs(out)


def psi_rhs(params: Params, t: float, f: ModeField, varphi: ModeField, cut: CutoffPair) -> ModeField:
    """``(1-zeta) f + varphi Lap(eta) + 2 eta' varphi_r - p varphi eta'/(beta r + t r^alpha)``."""
    g = f.grid
    r = g.r
    f_al, v_al = f._aligned(varphi)
    a = v_al.coeffs
    da = g.dr(a)
    e1 = cut.eta(r, 1)
    lap_eta = cut.eta_laplacian(r, params.N)
    denom = params.beta * r + t * r**params.alpha
    coeffs = (1.0 - cut.zeta(r)) * f_al.coeffs + a * lap_eta + 2.0 * e1 * da - params.p * a * e1 / denom
    return f_al.with_coeffs(coeffs)


def solve_psi(params: Params, t: float, rho: float, rhs: ModeField, cut: CutoffPair | None = None, solver: PsiSolver | None = None) -> tuple[ModeField, float]:
    """Solve the regular sub-problem on ``B_rho``; returns ``(psi, sup |grad psi|)``."""
    cut = cut or CutoffPair(DEFAULT_S0)
    if abs(rhs.grid.r_max - rho) > 1e-12 * rho:
        raise ConfigError("right-hand side grid must end at rho")
    solver = solver or PsiSolver(params, t, rhs.grid, cut)
    psi = solver.solve(rhs)
    return psi, float(gradient_norm(psi).max())


# ---------------------------------------------------------------------------
# linear glue


@dataclass
class GlueReport:
    varphi: ModeField
    psi: ModeField
    phi: ModeField
    diffs: list = field(default_factory=list)
    outer_ratios: list = field(default_factory=list)
    residual: float = math.nan
    sup_grad_psi: float = math.nan
    delta_t: float = math.nan
    converged: bool = False
    iterations: int = 0
    ratio: float = math.nan
    defects: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "diffs": list(self.diffs),
            "outer_ratios": list(self.outer_ratios),
            "residual": self.residual,
            "sup_grad_psi": self.sup_grad_psi,
            "delta_t": self.delta_t,
            "converged": self.converged,
            "iterations": self.iterations,
            "ratio": self.ratio,
            "defects": list(self.defects),
        }


class GlueSolver:
    """Reusable factorizations for repeated glued solves on one ``(t, rho, s0)``."""

    def __init__(self, params: Params, t: float, rho: float = DEFAULT_RHO, cut: CutoffPair | None = None, r_min: float | None = None, points_per_decade: int = POINTS_PER_DECADE):
        cut = cut or CutoffPair(DEFAULT_S0)
        if not 10 * cut.s0 < rho:
            raise ConfigError(f"need B_(10 s0) inside B_rho: s0={cut.s0}, rho={rho}")
        self.params, self.t, self.rho, self.cut = params, float(t), rho, cut
        self.full, self.inner = glue_grids(params, t, rho, r_min, points_per_decade)
        self.ball = BallLinearSolver(params, t, self.full)
        self.psi_solver = PsiSolver(params, t, self.inner, cut)

    def _extend(self, fld: ModeField) -> ModeField:
        out = np.zeros((len(fld.labels), self.full.M))
        out[:, : self.inner.M] = fld.coeffs
        return ModeField(self.full, list(fld.labels), out, self.params)

    def _restrict(self, fld: ModeField) -> ModeField:
        return ModeField(self.inner, list(fld.labels), fld.coeffs[:, : self.inner.M], self.params)

    def apply_Lt(self, phi: ModeField) -> ModeField:
        out = np.empty_like(phi.coeffs)
        for i, (k, _) in enumerate(phi.labels):
            out[i] = apply_mode(self.inner, self.params, self.t, k, phi.coeffs[i])
        return phi.with_coeffs(out)

    def _glue_once(self, f: ModeField, tol: float, max_outer: int, patience: int):
        p, t = self.params, self.t
        r = self.inner.r
        zeta = self.cut.zeta(r)
        denom = p.beta * r + t * r**p.alpha
        varphi = ModeField(self.full, list(f.labels), np.zeros((len(f.labels), self.full.M)), p)
        diffs, ratios, streak, converged, it = [], [], 0, False, 0
        for it in range(1, max_outer + 1):
            psi = self.psi_solver.solve(psi_rhs(p, t, f, self._restrict(varphi), self.cut))
            rhs_inner = f.coeffs * zeta - zeta * p.p * self.inner.dr(psi.coeffs) * r / denom
            new = self.ball.solve(self._extend(f.with_coeffs(rhs_inner)))
            diff = norm_X(new - varphi)
            diffs.append(diff)
            if len(diffs) >= 2 and diffs[-2] > 0:
                ratios.append(diff / diffs[-2])
                streak = streak + 1 if ratios[-1] >= 1.0 else 0
                if streak >= patience:
                    raise DivergenceError("glue iteration is not contracting", history=diffs)
            varphi = new
            if diff <= tol * max(1.0, norm_X(varphi)):
                converged = True
                break
        # final psi consistent with the final varphi
        psi = self.psi_solver.solve(psi_rhs(p, t, f, self._restrict(varphi), self.cut))
        phi = self._restrict(varphi).multiply_radial(self.cut.eta(r)) + psi
        return varphi, psi, phi, diffs, ratios, it, converged

    def defect(self, phi: ModeField, f: ModeField) -> ModeField:
        """``f - L_t phi`` on interior nodes, zero on the two end nodes."""
        d = f - self.apply_Lt(phi)
        c = d.coeffs.copy()
        c[:, [0, -1]] = 0.0
        return d.with_coeffs(c)

    def solve(self, f: ModeField, tol: float = 1e-8, max_outer: int = 50, patience: int = 3, refine: int = 6, refine_tol: float = 1e-9) -> GlueReport:
        """Alternate the two sub-solves until ``varphi`` settles in X.

        The glued field commutes with the discrete operator only up to
        truncation error at the cutoff layers, so the result is then polished
        by defect correction with the glued solve as approximate inverse.
        """
        if f.grid.M != self.inner.M:
            raise ConfigError("right-hand side must live on the inner grid")
        varphi, psi, phi, diffs, ratios, it, conv = self._glue_once(f, tol, max_outer, patience)
        rep = GlueReport(varphi=varphi, psi=psi, phi=phi, diffs=diffs, outer_ratios=ratios, iterations=it, converged=conv, delta_t=delta_t(self.params, self.t, self.rho))
        r = self.inner.r
        scale = max(norm_Y(f), 1e-300)
        defects = []
        for _ in range(refine):
            d = self.defect(phi, f)
            defects.append(norm_Y(d, r_range=(r[1], r[-2])))
            if defects[-1] <= refine_tol * scale:
                break
            dv, dpsi, dphi, *_ = self._glue_once(d, tol, max_outer, patience)
            varphi, psi, phi = varphi + dv, psi + dpsi, phi + dphi
        rep.varphi, rep.psi, rep.phi = varphi, psi, phi
        rep.defects = defects
        rep.residual = norm_Y(self.defect(phi, f), r_range=(r[1], r[-2]))
        rep.sup_grad_psi = float(gradient_norm(psi).max())
        rep.ratio = norm_X(phi) / scale if norm_Y(f) > 0 else 0.0
        return rep


def glue_linear_solve(params: Params, t: float, f: ModeField, rho: float = DEFAULT_RHO, s0: float = DEFAULT_S0, tol: float = 1e-8, solver: GlueSolver | None = None) -> GlueReport:
    """Solve ``L_t phi = f`` in ``B_rho`` with ``phi = 0`` on its boundary."""
    solver = solver or GlueSolver(params, t, rho, CutoffPair(s0))
    return solver.solve(f, tol=tol)


# ---------------------------------------------------------------------------
# nonlinear problem on B_rho


@dataclass
class BoundedConfig:
    t: float = 1e3
    rho: float = DEFAULT_RHO
    s0: float = DEFAULT_S0
    R: float = 0.5
    max_iter: int = 50
    tol_X: float = 1e-8
    K_max: int = 8
    r_min: float | None = None
    points_per_decade: int = POINTS_PER_DECADE
    eta_identity: bool = False
    residual_tol: float = 1e-3

    def __post_init__(self):
        if not 0 < self.R < 1:
            raise ConfigError("need 0 < R < 1")
        if not self.t > 1:
            raise ConfigError("need t > 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def profile_times_eta(params: Params, t: float, r: np.ndarray, cut: CutoffPair):
    """``(v, v', v'')`` for ``v = u_t eta``."""
    u = profiles.u_ball(params, t, r)
    du = profiles.du_ball(params, t, r)
    d2u = profiles.d2u_ball(params, t, r)
    e0, e1, e2 = cut.eta(r), cut.eta(r, 1), cut.eta(r, 2)
    return u * e0, du * e0 + u * e1, d2u * e0 + 2 * du * e1 + u * e2


def _w(z, p):
    return np.sign(z) * np.abs(z) ** (p - 1.0)


def split_terms(params: Params, t: float, r: np.ndarray, cut: CutoffPair) -> dict:
    """Radial pieces ``I_1``, ``I_2`` and the ``I_4`` coefficient on the nodes."""
    u = profiles.u_ball(params, t, r)
    du = profiles.du_ball(params, t, r)
    v, dv, _ = profile_times_eta(params, t, r, cut)
    eta = cut.eta(r)
    I1 = u * cut.eta_laplacian(r, params.N) + 2.0 * cut.eta(r, 1) * du
    I2 = np.abs(dv) ** params.p - eta * np.abs(du) ** params.p
    w_diff = _w(dv, params.p) - _w(du, params.p)
    return {"I1": I1, "I2": I2, "w_diff": w_diff, "dv": dv, "v": v}


def eps_t(params: Params, t: float, cut: CutoffPair, rho: float = DEFAULT_RHO, n: int = 2001) -> float:
    """``sup_{|x| > 2 s0} (|I_1| + |I_2| + | w(grad(u_t eta)) - w(grad u_t) |)``, ``w(z) = |z|^(p-2) z``."""
    r = np.geomspace(2 * cut.s0, rho, n)
    parts = split_terms(params, t, r, cut)
    return float(np.max(np.abs(parts["I1"]) + np.abs(parts["I2"]) + np.abs(parts["w_diff"])))


def solve_bounded_domain(params: Params, config: BoundedConfig) -> SolveReport:
    """Picard iteration for ``u = u_t eta + phi`` in ``B_rho`` with the glued linear solver."""
    t = config.t
    cut = CutoffPair(config.s0, config.eta_identity)
    rho = 1.0 if config.eta_identity and config.rho >= 1 else config.rho
    if config.eta_identity and rho < 1:
        raise ConfigError("eta = 1 is only admissible on the whole ball (rho = 1)")
    if config.eta_identity:
        return _solve_eta_identity(params, config, cut)
    glue = GlueSolver(params, t, rho, cut, config.r_min, config.points_per_decade)
    grid = glue.inner
    r = grid.r
    split = split_terms(params, t, r, cut)
    g0 = PerturbationG()
    phi = ModeField(grid, [(0, 0)], np.zeros((1, grid.M)), params)
    frame = _frame_for(params, g0, phi, 0)
    s_area = math.sqrt(sphere_area(params.N))
    forcing = (split["I1"] + split["I2"]) * s_area
    dv = split["dv"]
    rep = SolveReport(phi=None)
    streak = 0
    glue_iters = []
    for it in range(1, config.max_iter + 1):
        y = _grad_stack(phi, frame)
        x = np.zeros_like(y)
        x[..., 0] = dv[:, None]
        I3 = gradient_bracket(x.reshape(-1, 3), y.reshape(-1, 3), params.p).reshape(grid.M, -1)
        I4 = params.p * split["w_diff"][:, None] * y[..., 0]
        rhs = _project(I3 + I4, grid, params, frame)
        rhs = rhs.with_coeffs(rhs.coeffs + forcing[None, :])
        lin = glue.solve(rhs)
        glue_iters.append(lin.iterations)
        new = lin.phi
        diff = norm_X(new - phi)
        nrm = norm_X(new)
        rep.iterates.append(diff)
        rep.phi_norms.append(nrm)
        if len(rep.iterates) >= 2 and rep.iterates[-2] > 0:
            ratio = diff / rep.iterates[-2]
            rep.contraction_ratios.append(ratio)
            streak = streak + 1 if ratio >= 1.0 else 0
        phi = new
        rep.iterations = it
        if nrm > config.R:
            raise ConfigError(f"iterate left the ball of radius R={config.R} (||phi||_X = {nrm:.3g})")
        if streak >= 3:
            raise DivergenceError("bounded-domain iteration is not contracting", history=list(rep.iterates))
        if diff <= config.tol_X:
            rep.converged = True
            break
    rep.phi = phi
    rep.phi_norm_X = norm_X(phi)
    v, dvv, d2v = profile_times_eta(params, t, r, cut)
    check = verify_solution(phi, params, g0, frame=frame, profile=(v, dvv, d2v))
    rep.final_residual = check["residual"]
    rep.residual_annuli = check["annuli"]
    u = phi.values() + v[:, None]
    inner = r < rho * (1 - 1e-12)
    rep.positivity_ok = bool(np.all(u[inner] > 0))
    rep.blowup_ok = bool(u[0].min() >= 0.5 * v[0])
    rep.sup_u_outer = float(u[r >= 0.5].max()) if np.any(r >= 0.5) else float("nan")
    rep.u_profile = u[:, 0]
    e = eps_t(params, t, cut, rho)
    rep.extra.update(
        {
            "eps_t": e,
            "delta_t": delta_t(params, t, rho),
            "boundary_max_abs": float(np.abs(u[-1]).max()),
            "glue_iterations": glue_iters,
            "residual_ok": bool(rep.final_residual <= config.residual_tol),
            "t": t,
            "rho": rho,
            "s0": config.s0,
        }
    )
    return rep


def _solve_eta_identity(params: Params, config: BoundedConfig, cut: CutoffPair) -> SolveReport:
    """With ``eta = 1`` on ``B_1`` the split collapses: ``I_1 = I_2 = I_4 = 0``."""
    from .nonlinear_ball import SolverConfig, picard_solve

    cfg = SolverConfig(t=config.t, R=config.R, max_iter=config.max_iter, tol_X=config.tol_X, K_max=config.K_max, r_min=config.r_min, points_per_decade=config.points_per_decade)
    rep = picard_solve(params, PerturbationG(), cfg)
    grid = rep.phi.grid
    parts = split_terms(params, config.t, grid.r, cut)
    rep.extra.update(
        {
            "I1_max": float(np.abs(parts["I1"]).max()),
            "I2_max": float(np.abs(parts["I2"]).max()),
            "I4_coef_max": float(np.abs(parts["w_diff"]).max()),
            "eps_t": 0.0,
            "rho": 1.0,
            "s0": config.s0,
        }
    )
    return rep


def measured_into_condition(eps: float, R: float, p: float, C: float) -> dict:
    """Evaluate ``C eps + C eps R + C R^p <= R`` with a measured stand-in ``C``."""
    lhs = C * eps + C * eps * R + C * R**p
    return {"lhs": lhs, "R": R, "C": C, "holds": bool(lhs <= R)}
