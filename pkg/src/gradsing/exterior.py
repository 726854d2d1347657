"""Exterior problem on ``B_1^c``: truncated Laplace solves, ``L^t`` as a
perturbation of the Laplacian, the nonlinear fixed point and the far field.

Here ``L^t phi = Lap phi + p phi_r / (t r^alpha - beta r)`` and, for a
harmonic of degree ``k`` in ``s = ln r``,

    r^2 L^t = D^2 + (N - 2 + c(s)) D - lambda_k,   c = p/(t e^{(alpha-1)s} - beta).

Truncations ``1 < r < R_m`` carry ``a(1) = 0`` and ``a_s(R_m) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import profiles
from .brackets import gradient_bracket
from .errors import ConfigError, DivergenceError, RegimeError, SingularSystemError, TruncationError
from .fields import ModeField, RadialGrid, norm_X, norm_Y
from .gluing import smooth_cutoff
from .linear_ball import LinearSolveReport, mode_split
from .modes import lambda_k
from .params import Params, Regime, sphere_area

NODES_PER_OCTAVE = 26
DEFAULT_TRUNCATIONS = (625.0, 1250.0, 2500.0, 5000.0, 10000.0)
FAR_FIELD_RADIUS = 1e3
# relative level at which successive Neumann iterates only differ by rounding
ROUNDOFF_FLOOR = 1e-8


def _require_exterior(params: Params):
    if params.regime is not Regime.EXTERIOR:
        raise RegimeError("exterior solvers need exterior params")


def exterior_grid(R_max: float, nodes_per_octave: int = NODES_PER_OCTAVE) -> RadialGrid:
    """Nodes ``s = i ln2/n`` on ``[0, ln R]``; ``R_max`` is snapped to the nearest node."""
    if not R_max > 1:
        raise ConfigError("need R_max > 1")
    h = math.log(2.0) / nodes_per_octave
    n = max(int(round(math.log(R_max) / h)), 16)
    return RadialGrid(0.0, h, n + 1)


def snap_radius(grid: RadialGrid, R: float) -> int:
    """Index of the node nearest to ``R``."""
    return int(np.clip(round((math.log(R) - grid.s0) / grid.h), 1, grid.M - 1))


def ext_drift(params: Params, t: float, s) -> np.ndarray:
    """``p/(t r^(alpha-1) - beta)``; ``t = inf`` is the Laplacian."""
    s = np.asarray(s, dtype=float)
    if math.isinf(t):
        return np.zeros_like(s)
    return params.p / (t * np.exp((params.alpha - 1.0) * s) - params.beta)


def _operator(grid: RadialGrid, params: Params, t: float, k: int) -> sparse.csr_matrix:
    c = ext_drift(params, t, grid.s)
    return (grid.D2 + sparse.diags(params.N - 2.0 + c) @ grid.D1 - lambda_k(params.N, k) * sparse.identity(grid.M)).tocsr()


class TruncatedSolver:
    """LU factorizations of ``r^2 L^t`` on one truncation, cached per ``k``."""

    def __init__(self, params: Params, t: float, grid: RadialGrid):
        _require_exterior(params)
        if not (math.isinf(t) or t > params.beta):
            raise RegimeError(f"need t > beta = {params.beta}")
        grid.require_resolution()
        self.params, self.t, self.grid = params, float(t), grid
        self._lu: dict[int, object] = {}

    def _factor(self, k: int):
        if k not in self._lu:
            g = self.grid
            A = _operator(g, self.params, self.t, k).tolil()
            A[0, :] = 0.0
            A[0, 0] = 1.0
            A[g.M - 1, :] = g.D1[g.M - 1, :]
            try:
                lu = splu(A.tocsc())
            except RuntimeError as exc:
                raise SingularSystemError(f"exterior system for mode {k} is singular") from exc
            if np.min(np.abs(lu.U.diagonal())) < 1e-14 * np.max(np.abs(lu.U.diagonal())):
                raise SingularSystemError(f"exterior system for mode {k} is numerically singular")
            self._lu[k] = lu
        return self._lu[k]

    @property
    def flux_factor(self) -> np.ndarray:
        """Integrating factor ``r^(N-2) (1 - beta r^(1-alpha)/t)^(p/(p-1))`` of the radial mode."""
        g, P = self.grid, self.params
        mu = g.r ** (P.N - 2.0)
        if not math.isinf(self.t):
            mu = mu * (1.0 - P.beta * g.r ** (1.0 - P.alpha) / self.t) ** P.q
        return mu

    def solve_radial(self, b: np.ndarray) -> np.ndarray:
        """Mode 0 by quadrature: ``mu a_s = -int_s^{ln R} mu r^2 b``, ``a(1) = 0``.

        Going through the flux keeps the gradient accurate where ``a`` is
        nearly constant, which a value-based solve cannot resolve.
        """
        g = self.grid
        mu = self.flux_factor
        da = -g.cumulative_from_end(mu * g.r**2 * b) / mu
        return g.cumulative(da)

    def solve(self, f: ModeField) -> ModeField:
        out = np.zeros((len(f.labels), self.grid.M))
        r2 = self.grid.r**2
        for i, (k, _) in enumerate(f.labels):
            b = f.coeffs[i, : self.grid.M]
            if not np.any(b):
                continue
            if k == 0:
                out[i] = self.solve_radial(b)
                continue
            rhs = r2 * b
            rhs[0] = 0.0
            rhs[-1] = 0.0
            out[i] = self._factor(k).solve(rhs)
        return ModeField(self.grid, list(f.labels), out, self.params)

    def apply(self, phi: ModeField) -> ModeField:
        out = np.empty_like(phi.coeffs)
        for i, (k, _) in enumerate(phi.labels):
            out[i] = (_operator(self.grid, self.params, self.t, k) @ phi.coeffs[i]) / self.grid.r**2
        return phi.with_coeffs(out)


def _restrict(f: ModeField, grid: RadialGrid) -> ModeField:
    return ModeField(grid, list(f.labels), f.coeffs[:, : grid.M].copy(), f.params)


# ---------------------------------------------------------------------------
# Laplace on truncations


@dataclass
class TruncationReport:
    radii: list
    diffs: list
    ratios: list
    stable: bool
    neumann_defect: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def laplace_exterior_solve(f: ModeField, R_seq=DEFAULT_TRUNCATIONS, tol: float = 1e-8, require_stable: bool = True) -> tuple[ModeField, TruncationReport]:
    """``Lap phi = f`` on ``B_{R_m} \\ B_1`` for each ``R_m``; returns the largest one.

    Successive truncations are compared in the gradient norm on their common
    annulus. ``TruncationError`` if they have not settled by the last ``R_m``
    (unless ``require_stable`` is false).
    """
    params = f.params
    _require_exterior(params)
    idx = sorted({snap_radius(f.grid, R) for R in R_seq})
    prev = None
    radii, diffs, ratios = [], [], []
    sol = None
    for i in idx:
        g = f.grid.slice(0, i + 1)
        solver = TruncatedSolver(params, math.inf, g)
        fm = _restrict(f, g)
        sol = solver.solve(fm)
        radii.append(float(g.r_max))
        nY = norm_Y(fm)
        ratios.append(norm_X(sol) / nY if nY > 0 else 0.0)
        if prev is not None:
            diffs.append(norm_X(_restrict(sol, prev.grid) - prev))
        prev = sol
    stable = bool(diffs and diffs[-1] <= tol) or not np.any(f.coeffs)
    neumann = float(np.abs(sol.grid.D1[sol.grid.M - 1, :] @ sol.coeffs.T).max() / sol.grid.r_max) if sol is not None else 0.0
    rep = TruncationReport(radii, diffs, ratios, stable, neumann)
    if require_stable and not stable:
        raise TruncationError(f"truncations did not settle: last difference {diffs[-1] if diffs else math.nan:.3g}")
    return sol, rep


def laplace_radial_oracle(params: Params, r: np.ndarray, R: float) -> np.ndarray:
    """``a'(r)`` for ``Lap a = r^(-sigma-2)``, ``a(1) = 0``, ``a'(R) = 0``, radial."""
    eps = params.sigma - (params.N - 2)
    r = np.asarray(r, dtype=float)
    return -(r ** (-eps) - R ** (-eps)) / (eps * r ** (params.N - 1))


# ---------------------------------------------------------------------------
# L^t as a perturbation of the Laplacian


def T_delta(params: Params, t: float, phi: ModeField) -> ModeField:
    """``T^delta phi = p phi_r / (t r^alpha - beta r)``, ``delta = 1/t``."""
    g = phi.grid
    c = ext_drift(params, t, g.s)
    return phi.with_coeffs(c * (g.D1 @ phi.coeffs.T).T / g.r**2)


def t_delta_bound(params: Params, t: float) -> float:
    """``p delta / (1 - delta beta)``, the sup of the drift factor on ``r >= 1``."""
    d = 1.0 / t
    return params.p * d / (1.0 - d * params.beta)


def operator_norm_probe(params: Params, t: float, grid: RadialGrid, n_fields: int = 16, seed: int = 0) -> dict:
    """Max of ``||T^delta phi||_Y / ||phi||_X`` over random smooth radial ``phi``."""
    rng = np.random.default_rng(seed)
    best = 0.0
    s = grid.s / grid.s[-1]
    for _ in range(n_fields):
        c = rng.standard_normal(6)
        prof = sum(ci * np.sin((j + 1) * math.pi * s / 2) for j, ci in enumerate(c))
        phi = ModeField.from_radial(grid, prof, params)
        nx = norm_X(phi)
        if nx > 0:
            best = max(best, norm_Y(T_delta(params, t, phi)) / nx)
    return {"t": t, "measured": best, "bound": t_delta_bound(params, t)}


def solve_Lt_exterior(params: Params, t: float, f: ModeField, tol: float = 1e-12, max_iter: int = 100, laplace: TruncatedSolver | None = None) -> LinearSolveReport:
    """Neumann series ``phi_{n+1} = Lap^{-1}(f - T^delta phi_n)`` on the grid of ``f``."""
    _require_exterior(params)
    lap = laplace or TruncatedSolver(params, math.inf, f.grid)
    phi = f * 0.0
    diffs = []
    it = 0
    for it in range(1, max_iter + 1):
        new = lap.solve(f - T_delta(params, t, phi))
        diffs.append(norm_X(new - phi))
        phi = new
        scale = max(norm_X(phi), 1e-300)
        if diffs[-1] <= tol * scale or diffs[-1] == 0.0:
            break
        if len(diffs) >= 2 and diffs[-2] > 0 and diffs[-1] / diffs[-2] >= 1.0:
            if diffs[-1] <= ROUNDOFF_FLOOR * scale:
                break
            raise DivergenceError("Neumann series for L^t is not contracting (t too small)", history=diffs)
    direct = TruncatedSolver(params, t, f.grid)
    res_f = f - direct.apply(phi)
    c = res_f.coeffs.copy()
    c[:, [0, -1]] = 0.0
    residual = norm_Y(res_f.with_coeffs(c))
    nY = norm_Y(f)
    nX = norm_X(phi)
    ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0]
    _, _, D = mode_split(f) if nY > 0 else (0, 0, 0.0)
    return LinearSolveReport(
        phi=phi,
        ratio=nX / nY if nY > 0 else 0.0,
        residual=residual,
        norm_X=nX,
        norm_Y=nY,
        mode_split_D=D,
        per_mode={"neumann_ratios": ratios},
        iterations=it,
        ok=bool(nY == 0 or residual <= 1e-5 * nY),
    )


# ---------------------------------------------------------------------------
# nonlinear problem


@dataclass
class ExteriorConfig:
    t: float = 1e2
    R_truncations: tuple = DEFAULT_TRUNCATIONS
    eps_weight: float = 0.1
    R: float = 0.1
    max_iter: int = 50
    tol_X: float = 1e-10
    residual_tol: float = 1e-3
    # the cutoff layer 2 < r < 3 needs the finer spacing
    nodes_per_octave: int = 2 * NODES_PER_OCTAVE
    eta_identity: bool = False

    def __post_init__(self):
        self.R_truncations = tuple(float(R) for R in self.R_truncations)
        if not self.R_truncations or any(b <= a for a, b in zip(self.R_truncations, self.R_truncations[1:])):
            raise ConfigError("R_truncations must be a nonempty increasing sequence")
        if self.R_truncations[0] <= 3:
            raise ConfigError("truncation radii must exceed 3 (support of the cutoff)")
        if not 0 < self.R < 1:
            raise ConfigError("need 0 < R < 1")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["R_truncations"] = list(self.R_truncations)
        return d


def ext_eta(r, deriv: int = 0, identity: bool = False):
    """0 on ``B_2``, 1 outside ``B_3``."""
    r = np.asarray(r, dtype=float)
    if identity:
        return np.full_like(r, 1.0 if deriv == 0 else 0.0)
    v = smooth_cutoff(2.0, 3.0, r, deriv)
    return 1.0 - v if deriv == 0 else -v


def _profile(params: Params, t: float, r: np.ndarray, identity: bool = False):
    u = profiles.u_exterior(params, t, r)
    du = profiles.du_exterior(params, t, r)
    d2u = profiles.d2u_exterior(params, t, r)
    e0, e1, e2 = (ext_eta(r, d, identity) for d in (0, 1, 2))
    return u, du, u * e0, du * e0 + u * e1, d2u * e0 + 2 * du * e1 + u * e2


def _w(z, p):
    return np.sign(z) * np.abs(z) ** (p - 1.0)


def exterior_split(params: Params, t: float, r: np.ndarray, identity: bool = False) -> dict:
    u, du, v, dv, _ = _profile(params, t, r, identity)
    e1 = ext_eta(r, 1, identity)
    lap_eta = ext_eta(r, 2, identity) + (params.N - 1) * e1 / r
    return {
        "I1": u * lap_eta + 2.0 * e1 * du,
        "I2": np.abs(dv) ** params.p - ext_eta(r, 0, identity) * np.abs(du) ** params.p,
        "w_diff": _w(dv, params.p) - _w(du, params.p),
        "dv": dv,
        "v": v,
    }


def exterior_eps(params: Params, t: float, r_max: float = 4.0, n: int = 2001) -> tuple[float, float]:
    """``(eps_t, eps_hat_t)``; the first is a sup over ``1 < r < 3`` in practice.

    ``eps_hat_t = sup r^(-sigma) |grad(u_t eta)|^(p-2)`` for ``p > 2`` and 0 otherwise.
    """
    r = np.geomspace(1.0, r_max, n)
    sp = exterior_split(params, t, r)
    eps = float(np.max(np.abs(sp["I1"]) + np.abs(sp["I2"]) + np.abs(sp["w_diff"])))
    if params.p <= 2:
        return eps, 0.0
    rr = np.geomspace(3.0, 1e6, 4001)
    dv = profiles.du_exterior(params, t, rr)
    return eps, float(np.max(rr ** (-params.sigma) * np.abs(dv) ** (params.p - 2.0)))


@dataclass
class FarFieldReport:
    radii: list
    flux: list
    target: float
    deviation: list
    rel_deviation_at_check: float
    crossover_radius: float
    monotone_beyond_crossover: bool
    measured_crossover: float = math.nan

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def rows(self):
        """``(r, r^(N-2) x.grad u, target)`` rows for CSV output."""
        return [(r, f, self.target) for r, f in zip(self.radii, self.flux)]


def monotone_crossover(params: Params, t: float, R: float) -> float:
    """Smallest ``r >= 3`` from which ``(t - beta r^(1-alpha))^(-1/(p-1)) > R r^(-eps)`` holds onward."""
    eps = params.sigma - (params.N - 2)
    r = np.geomspace(3.0, 1e12, 20001)
    ok = profiles.far_field_flux(params, t, r) > R * r ** (-eps)
    if ok.all():
        return 3.0
    bad = np.nonzero(~ok)[0]
    if bad[-1] == r.size - 1:
        return math.inf
    return float(r[bad[-1] + 1])


def _flux(params: Params, t: float, phi: ModeField, r: np.ndarray, identity: bool = False) -> np.ndarray:
    """``r^(N-1) u_r`` for ``u = eta u_t + phi`` (radial part)."""
    g = phi.grid
    dphi = g.dr(phi.mode(0, 0)) / math.sqrt(sphere_area(params.N))
    _, _, _, dv, _ = _profile(params, t, g.r, identity)
    return g.interp(g.r ** (params.N - 1) * (dv + dphi), r)


def far_field_report(params: Params, t: float, phi: ModeField, R_ball: float, check_radius: float = FAR_FIELD_RADIUS, identity: bool = False) -> FarFieldReport:
    g = phi.grid
    target = t ** (-1.0 / (params.p - 1.0))
    radii = [x for x in (10.0, 30.0, 100.0, 300.0, check_radius, 3e3) if x <= g.r_max / 2]
    if check_radius not in radii and check_radius <= g.r_max:
        radii.append(check_radius)
    radii.sort()
    flux = [float(v) for v in _flux(params, t, phi, np.array(radii), identity)]
    dev = [f - target for f in flux]
    chk = float(abs(_flux(params, t, phi, np.array([check_radius]), identity)[0] - target) / target)
    cross = monotone_crossover(params, t, R_ball)
    dphi = g.dr(phi.mode(0, 0)) / math.sqrt(sphere_area(params.N))
    _, _, _, dv, _ = _profile(params, t, g.r, identity)
    mask = g.r >= cross
    du = dv + dphi
    mono = bool(np.all(du[mask] > 0)) if mask.any() else True
    nonpos = np.nonzero(du <= 0)[0]
    measured = float(g.r[0]) if nonpos.size == 0 else (float(g.r[nonpos[-1] + 1]) if nonpos[-1] + 1 < g.M else math.inf)
    return FarFieldReport(radii, flux, target, dev, chk, cross, mono, measured)


@dataclass
class ExteriorSolveReport:
    iterates: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    phi_norms: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    phi: ModeField | None = None
    phi_norm_X: float = math.nan
    final_residual: float = math.nan
    positivity_ok: bool = False
    boundary_abs: float = math.nan
    eps_t: float = math.nan
    eps_hat_t: float = math.nan
    truncation: dict = field(default_factory=dict)
    far_field: FarFieldReport | None = None
    into: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        ff = self.far_field
        return bool(
            self.converged
            and self.positivity_ok
            and self.final_residual <= self.into.get("residual_tol", 1e-3)
            and (ff is None or ff.monotone_beyond_crossover)
        )

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("phi", "far_field")}
        out["far_field"] = self.far_field.to_dict() if self.far_field else None
        out["ok"] = self.ok
        return out


def _picard(params: Params, t: float, grid: RadialGrid, cfg: ExteriorConfig, rep: ExteriorSolveReport) -> ModeField:
    r = grid.r
    sp = exterior_split(params, t, r, cfg.eta_identity)
    s_area = math.sqrt(sphere_area(params.N))
    forcing = -(sp["I1"] + sp["I2"]) * s_area
    lap = TruncatedSolver(params, math.inf, grid)
    phi = ModeField(grid, [(0, 0)], np.zeros((1, grid.M)), params)
    rep.iterates, rep.contraction_ratios, rep.phi_norms = [], [], []
    streak = 0
    for it in range(1, cfg.max_iter + 1):
        y = grid.dr(phi.coeffs[0]) / s_area
        x = sp["dv"]
        I3 = gradient_bracket(np.stack([x, np.zeros_like(x)], -1), np.stack([y, np.zeros_like(y)], -1), params.p)
        I4 = params.p * sp["w_diff"] * y
        rhs = phi.with_coeffs((forcing - (I3 + I4) * s_area)[None, :])
        new = solve_Lt_exterior(params, t, rhs, laplace=lap).phi
        diff = norm_X(new - phi)
        nrm = norm_X(new)
        rep.iterates.append(diff)
        rep.phi_norms.append(nrm)
        if len(rep.iterates) >= 2 and rep.iterates[-2] > 0:
            rep.contraction_ratios.append(diff / rep.iterates[-2])
            streak = streak + 1 if rep.contraction_ratios[-1] >= 1 else 0
        phi = new
        rep.iterations = it
        if nrm > cfg.R:
            raise ConfigError(f"iterate left the ball of radius R={cfg.R} (||phi||_X = {nrm:.3g})")
        if streak >= 3:
            raise DivergenceError("exterior iteration is not contracting", history=list(rep.iterates))
        if diff <= cfg.tol_X:
            rep.converged = True
            break
    return phi


def exterior_residual(params: Params, t: float, phi: ModeField, r_range, identity: bool = False) -> float:
    """Weighted ``sup r^(sigma+2) |Lap u + |grad u|^p|`` for ``u = eta u_t + phi`` on ``r_range``."""
    g = phi.grid
    a = phi.mode(0, 0) / math.sqrt(sphere_area(params.N))
    da, d2a = g.dr(a), g.drr(a)
    _, _, _, dv, d2v = _profile(params, t, g.r, identity)
    du = dv + da
    lap = d2v + d2a + (params.N - 1) * du / g.r
    res = g.r ** (params.sigma + 2) * np.abs(lap + np.abs(du) ** params.p)
    lo, hi = r_range
    mask = (g.r >= lo) & (g.r <= hi)
    return float(res[mask].max())


def solve_exterior_problem(params: Params, config: ExteriorConfig | None = None) -> ExteriorSolveReport:
    """Fixed point for ``u = eta u_t + phi`` on ``B_1^c``, with truncation and far-field checks."""
    _require_exterior(params)
    cfg = config or ExteriorConfig()
    t = cfg.t
    if t <= 2 * params.beta:
        raise ConfigError(f"need t >= 2 beta = {2 * params.beta}")
    R_max = cfg.R_truncations[-1]
    full = exterior_grid(R_max, cfg.nodes_per_octave)
    rep = ExteriorSolveReport()
    phis, norms_m = [], []
    for R in cfg.R_truncations:
        g = full.slice(0, snap_radius(full, R) + 1)
        sub = ExteriorSolveReport()
        phi_m = _picard(params, t, g, cfg, sub)
        phis.append(phi_m)
        norms_m.append(norm_X(phi_m))
        rep = sub
    phi = phis[-1]
    rep.phi = phi
    rep.phi_norm_X = norms_m[-1]
    diffs = [abs(b - a) for a, b in zip(norms_m, norms_m[1:])]
    rep.truncation = {
        "radii": [float(full.slice(0, snap_radius(full, R) + 1).r_max) for R in cfg.R_truncations],
        "phi_norm_X": norms_m,
        "doubling_change": diffs,
        "stable": bool(not diffs or diffs[-1] <= 1e-6),
    }
    g = phi.grid
    rep.final_residual = exterior_residual(params, t, phi, (1.1, g.r_max / 2), cfg.eta_identity)
    a = phi.mode(0, 0) / math.sqrt(sphere_area(params.N))
    _, _, v, _, _ = _profile(params, t, g.r, cfg.eta_identity)
    u = v + a
    rep.boundary_abs = float(abs(u[0]))
    rep.positivity_ok = bool(np.all(u[1:] > 0))
    rep.eps_t, rep.eps_hat_t = exterior_eps(params, t)
    rep.far_field = far_field_report(params, t, phi, max(rep.phi_norm_X, 1e-300), identity=cfg.eta_identity)
    rep.into = {
        "R": cfg.R,
        "phi_norm_X": rep.phi_norm_X,
        "residual_tol": cfg.residual_tol,
        "contraction_lhs_stand_in": cfg.R ** (params.p - 1.0) + 1.0 / t,
    }
    return rep


def solve_exterior_fields(params: Params, config: ExteriorConfig | None = None) -> tuple[ExteriorSolveReport, np.ndarray, np.ndarray]:
    """The solve plus ``(r, u)`` on its grid, for CSV output."""
    rep = solve_exterior_problem(params, config)
    g = rep.phi.grid
    a = rep.phi.mode(0, 0) / math.sqrt(sphere_area(params.N))
    _, _, v, _, _ = _profile(params, (config or ExteriorConfig()).t, g.r, (config or ExteriorConfig()).eta_identity)
    return rep, g.r, v + a
