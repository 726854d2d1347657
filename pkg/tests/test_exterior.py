import math

import numpy as np
import pytest

from gradsing.errors import ConfigError, DivergenceError, RegimeError, TruncationError
from gradsing.exterior import (
    ExteriorConfig,
    TruncatedSolver,
    exterior_eps,
    exterior_grid,
    laplace_exterior_solve,
    laplace_radial_oracle,
    monotone_crossover,
    operator_norm_probe,
    snap_radius,
    solve_exterior_problem,
    solve_Lt_exterior,
)
from gradsing.fields import ModeField
from gradsing.params import new_exterior_params


def _decaying(P, g, extra):
    return ModeField.from_radial(g, g.r ** (-P.sigma - 2 - extra), P)


def test_grid_is_dyadic_from_one():
    g = exterior_grid(1e3)
    assert g.r_min == 1.0 and g.r_max == pytest.approx(1e3, rel=0.03)
    i = snap_radius(g, 625.0)
    assert g.r[i] == pytest.approx(625.0, rel=0.03)


def test_laplace_against_radial_oracle(ext):
    g = exterior_grid(1e4)
    sol, rep = laplace_exterior_solve(ModeField.from_radial(g, g.r ** (-ext.sigma - 2), ext), require_stable=False)
    sg = sol.grid
    err = sg.r ** (ext.sigma + 1) * np.abs(sg.dr(sol.radial_values()) - laplace_radial_oracle(ext, sg.r, sg.r_max))
    assert err.max() <= 1e-8
    assert rep.neumann_defect <= 1e-10


def test_laplace_at_the_Y_rate_does_not_settle(ext):
    # f ~ r^(-sigma-2) changes the gradient norm by (1 - 2^-eps)/eps at every doubling
    g = exterior_grid(1e4)
    with pytest.raises(TruncationError):
        laplace_exterior_solve(ModeField.from_radial(g, g.r ** (-ext.sigma - 2), ext))


def test_laplace_truncation_stable_for_faster_decay(ext):
    # with f ~ r^(-sigma-2-d) a doubling changes the gradient norm by about R^-d
    g = exterior_grid(1e4)
    _, rep = laplace_exterior_solve(_decaying(ext, g, 2.0), tol=1e-6)
    assert rep.stable and rep.diffs[-1] <= 1e-6
    assert all(b <= a for a, b in zip(rep.diffs, rep.diffs[1:]))


def test_laplace_zero(ext):
    g = exterior_grid(1e4)
    sol, rep = laplace_exterior_solve(_decaying(ext, g, 0.0) * 0.0)
    assert not np.any(sol.coeffs) and rep.stable


def test_laplace_needs_exterior(ball):
    g = exterior_grid(10.0)
    with pytest.raises(RegimeError):
        laplace_exterior_solve(ModeField.from_radial(g, g.r, ball))


def test_higher_mode_laplace(ext):
    g = exterior_grid(100.0)
    solver = TruncatedSolver(ext, math.inf, g)
    f = ModeField(g, [(1, 0), (2, 1)], np.vstack([g.r ** -4.0, g.r ** -3.5]), ext)
    phi = solver.solve(f)
    d = solver.apply(phi) - f
    assert np.abs(d.coeffs[:, 1:-1] * g.r[1:-1] ** (ext.sigma + 2)).max() <= 1e-8


def test_operator_norm_probe_linear_in_delta(ext):
    g = exterior_grid(1e3)
    probes = [operator_norm_probe(ext, t, g) for t in (1e2, 1e3, 1e4)]
    for pr in probes:
        assert pr["measured"] <= pr["bound"]
    m = [pr["measured"] for pr in probes]
    assert m[0] / m[1] == pytest.approx(10.0, rel=0.05)
    assert m[1] / m[2] == pytest.approx(10.0, rel=0.05)


def _manufactured(ext, t, g):
    # a(1) = 0 and a'(R) = 0 exactly, so the truncated problem reproduces it
    r, R = g.r, g.r_max
    a = (-(r**-2.0) / 2 + 2 / (r * R) + np.log(r) / R**2) - (-0.5 + 2 / R)
    da = r**-3.0 - 2 * r**-2.0 / R + r**-1.0 / R**2
    d2a = -3 * r**-4.0 + 4 * r**-3.0 / R - r**-2.0 / R**2
    b = d2a + (ext.N - 1) * da / r + ext.p * da / (t * r**ext.alpha - ext.beta * r)
    return a, da, ModeField(g, [(0, 0)], b[None, :], ext)


@pytest.mark.parametrize("t", [1e2, 1e4])
def test_Lt_manufactured(ext, t):
    g = exterior_grid(1e3)
    a, da, f = _manufactured(ext, t, g)
    rep = solve_Lt_exterior(ext, t, f)
    assert np.max(g.r ** (ext.sigma + 1) * np.abs(g.dr(rep.phi.coeffs[0]) - da)) <= 1e-5
    assert rep.ok
    assert all(x < 0.05 for x in rep.per_mode["neumann_ratios"])


def test_Lt_zero(ext):
    g = exterior_grid(100.0)
    rep = solve_Lt_exterior(ext, 1e2, ModeField.zeros(g, ext))
    assert rep.norm_X == 0.0 and rep.iterations == 1


def test_neumann_series_diverges_for_tiny_t():
    P = new_exterior_params(3, "7/4", 0.1)
    g = exterior_grid(100.0)
    f = ModeField.from_radial(g, g.r ** (-P.sigma - 3), P)
    with pytest.raises(DivergenceError):
        solve_Lt_exterior(P, 1.6, f)


@pytest.fixture(scope="module")
def ext_run(ext):
    return solve_exterior_problem(ext, ExteriorConfig(t=1e2))


def test_exterior_solution(ext_run):
    rep = ext_run
    assert rep.converged and rep.ok
    assert rep.final_residual <= 1e-3
    assert rep.positivity_ok and rep.boundary_abs <= 1e-12


def test_far_field_flux(ext_run):
    ff = ext_run.far_field
    assert ff.rel_deviation_at_check <= 0.01
    assert ff.target == pytest.approx(1e2 ** (-1 / 0.75), rel=1e-14)


def test_monotone_beyond_crossover(ext_run):
    ff = ext_run.far_field
    assert ff.monotone_beyond_crossover
    assert ff.measured_crossover <= ff.crossover_radius


def test_truncation_stability(ext_run):
    tr = ext_run.truncation
    assert tr["stable"] and tr["doubling_change"][-1] <= 1e-6


def test_crossover_shrinks_with_R(ext):
    assert monotone_crossover(ext, 1e2, 1e-3) <= monotone_crossover(ext, 1e2, 1e-1)


def test_eps_sweeps(ext):
    eps = [exterior_eps(ext, t) for t in (1e2, 1e3, 1e4)]
    assert eps[0][0] > eps[1][0] > eps[2][0] > 0
    assert all(e[1] == 0.0 for e in eps)
    hot = new_exterior_params(3, 2.5, 0.1)
    hats = [exterior_eps(hot, t)[1] for t in (1e2, 1e3, 1e4)]
    assert hats[0] > hats[1] > hats[2] > 0


def test_config_validation():
    with pytest.raises(ConfigError):
        ExteriorConfig(R_truncations=(100.0, 50.0))
    with pytest.raises(ConfigError):
        ExteriorConfig(R_truncations=(2.0, 50.0))
    with pytest.raises(ConfigError):
        solve_exterior_problem(new_exterior_params(3, "7/4", 0.1), ExteriorConfig(t=2.0))
