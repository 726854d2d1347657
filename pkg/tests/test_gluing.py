import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradsing.errors import ConfigError
from gradsing.fields import ModeField, decompose_N3, norm_X, norm_Y
from gradsing.gluing import (
    BoundedConfig,
    CutoffPair,
    GlueSolver,
    PsiSolver,
    delta_t,
    eps_t,
    glue_grids,
    measured_into_condition,
    smooth_cutoff,
    solve_bounded_domain,
    solve_psi,
    split_terms,
)
from gradsing.modes import lambda_k

RHO = 0.9


def test_cutoff_endpoints_and_midpoint():
    assert smooth_cutoff(1.0, 2.0, 1.0) == 1.0
    assert smooth_cutoff(1.0, 2.0, 2.0) == 0.0
    assert smooth_cutoff(1.0, 2.0, 1.5) == pytest.approx(0.5, abs=1e-15)
    for d in (1, 2):
        assert abs(smooth_cutoff(1.0, 2.0, 1.0, d)) <= 1e-14
        assert abs(smooth_cutoff(1.0, 2.0, 2.0, d)) <= 1e-14


def test_cutoff_derivative_matches_difference():
    r, h = np.linspace(1.05, 1.95, 19), 1e-6
    fd = (smooth_cutoff(1.0, 2.0, r + h) - smooth_cutoff(1.0, 2.0, r - h)) / (2 * h)
    assert np.allclose(smooth_cutoff(1.0, 2.0, r, 1), fd, atol=1e-8)


@settings(max_examples=100, deadline=None)
@given(s0=st.floats(1e-3, 0.05), r=st.floats(1e-6, 1.0))
def test_cutoff_pair_invariants(s0, r):
    cut = CutoffPair(s0)
    z, e = cut.zeta(r), cut.eta(r)
    assert 0.0 <= z <= 1.0 and 0.0 <= e <= 1.0
    assert z * e == pytest.approx(z, abs=1e-15)
    assert cut.eta(r, 1) <= 1e-15


def test_cutoff_monotone():
    r = np.linspace(0.5, 2.5, 2001)
    assert np.all(np.diff(smooth_cutoff(1.0, 2.0, r)) <= 1e-16)


def test_cutoff_rejects_bad_interval():
    with pytest.raises(ConfigError):
        smooth_cutoff(2.0, 1.0, 1.5)


def test_glue_grid_has_rho_node(ball):
    full, inner = glue_grids(ball, 1e3, RHO)
    assert inner.r_max == pytest.approx(RHO, rel=1e-14)
    assert full.r_max == pytest.approx(1.0, rel=1e-14)
    assert np.array_equal(full.r[: inner.M], inner.r)


def test_psi_zero_rhs(ball):
    _, inner = glue_grids(ball, 1e3, RHO)
    psi, sg = solve_psi(ball, 1e3, RHO, ModeField.zeros(inner, ball, 1))
    assert not np.any(psi.coeffs) and sg == 0.0


@pytest.mark.parametrize("k", [0, 1, 2])
def test_psi_manufactured(ball, k):
    t, cut = 1e3, CutoffPair(0.02)
    _, inner = glue_grids(ball, t, RHO)
    r = inner.r
    a = r**k * (RHO**2 - r**2)
    da = k * r ** (k - 1) * (RHO**2 - r**2) - 2 * r ** (k + 1) if k else -2 * r
    d2a = (k * (k - 1) * r ** (k - 2) * (RHO**2 - r**2) - 2 * (2 * k + 1) * r**k) if k else -2 + 0 * r
    drift = (1 - cut.zeta(r)) * ball.p / (ball.beta * r + t * r**ball.alpha)
    h = -d2a - (ball.N - 1) * da / r + drift * da + lambda_k(ball.N, k) * a / r**2
    fld = ModeField(inner, [(k, 0)], h[None, :], ball)
    psi, _ = solve_psi(ball, t, RHO, fld, cut)
    assert np.abs(psi.coeffs[0] - a).max() <= 1e-6


def test_psi_gradient_uniform_in_t(ball):
    sups = []
    for t in (1e2, 1e4):
        _, inner = glue_grids(ball, t, RHO)
        h = decompose_N3(lambda r, d: 1.0 + r * d[..., 2] + 0 * r, inner, ball, 1)
        sups.append(solve_psi(ball, t, RHO, h)[1])
    assert abs(sups[0] - sups[1]) <= 0.1 * max(sups)


def test_delta_t_scaling(ball):
    assert delta_t(ball, 1e3, RHO) / delta_t(ball, 1e4, RHO) == pytest.approx(10.0, rel=0.05)


@pytest.fixture(scope="module")
def glued(ball):
    gs = GlueSolver(ball, 1e3, RHO, CutoffPair(0.05))
    f = decompose_N3(lambda r, d: r ** (-ball.sigma - 2.0) * (1.0 + 0.5 * d[..., 2]), gs.inner, ball, 2)
    return gs, f, gs.solve(f)


def test_glue_residual(glued):
    _, _, rep = glued
    assert rep.converged and rep.iterations <= 10
    assert rep.residual <= 1e-5
    assert all(r < 1 for r in rep.outer_ratios)


def test_glue_assembly_identity(ball, glued):
    gs, _, rep = glued
    r = gs.inner.r
    pointwise = rep.varphi.values()[: gs.inner.M] * gs.cut.eta(r)[:, None] + rep.psi.values()
    assert np.abs(pointwise - rep.phi.values()).max() <= 1e-10 * max(1.0, np.abs(pointwise).max())


def test_glue_boundary_value(glued):
    _, _, rep = glued
    assert np.abs(rep.phi.values()[-1]).max() <= 1e-10


def test_glue_zero_rhs(ball, glued):
    gs, f, _ = glued
    rep = gs.solve(f * 0.0)
    assert norm_X(rep.phi) == 0.0


def test_glue_is_linear(glued):
    gs, f, rep = glued
    twice = gs.solve(f * 2.0)
    assert norm_X(twice.phi - rep.phi * 2.0) <= 1e-8 * norm_X(twice.phi)


def test_glue_needs_room(ball):
    with pytest.raises(ConfigError):
        GlueSolver(ball, 1e3, 0.3, CutoffPair(0.05))


@pytest.fixture(scope="module")
def bounded_runs(ball):
    return {t: solve_bounded_domain(ball, BoundedConfig(t=t)) for t in (1e2, 1e3, 1e4)}


def test_bounded_domain_solution(bounded_runs):
    rep = bounded_runs[1e3]
    assert rep.converged and rep.ok
    assert rep.final_residual <= 1e-3
    assert rep.positivity_ok and rep.blowup_ok
    assert rep.extra["boundary_max_abs"] <= 1e-10


def test_eps_t_decreasing(bounded_runs):
    eps = [bounded_runs[t].extra["eps_t"] for t in (1e2, 1e3, 1e4)]
    assert eps[0] > eps[1] > eps[2] > 0


def test_eps_t_tends_to_zero(ball):
    cut = CutoffPair(0.02)
    assert eps_t(ball, 1e6, cut) < 1e-2 * eps_t(ball, 1e3, cut)


def test_eta_identity_collapses_split(ball):
    rep = solve_bounded_domain(ball, BoundedConfig(t=1e3, rho=1.0, eta_identity=True))
    assert rep.extra["I1_max"] == 0.0 and rep.extra["I2_max"] == 0.0 and rep.extra["I4_coef_max"] == 0.0
    assert rep.iterations == 1 and rep.phi_norm_X <= 1e-12


def test_eta_identity_needs_whole_ball(ball):
    with pytest.raises(ConfigError):
        solve_bounded_domain(ball, BoundedConfig(t=1e3, rho=0.9, eta_identity=True))


def test_split_vanishes_inside_cutoff(ball):
    cut = CutoffPair(0.02)
    r = np.geomspace(1e-5, 0.039, 50)
    parts = split_terms(ball, 1e3, r, cut)
    for key in ("I1", "I2", "w_diff"):
        assert np.abs(parts[key]).max() <= 1e-12 * np.abs(parts["dv"]).max()


def test_into_condition_with_measured_constant(bounded_runs, ball):
    rep = bounded_runs[1e4]
    out = measured_into_condition(rep.extra["eps_t"], 0.5, ball.p, 0.25)
    assert out["holds"]
    assert not measured_into_condition(10.0, 0.5, ball.p, 1.0)["holds"]
