import numpy as np
import pytest

from gradsing.errors import ConfigError
from gradsing.fields import decompose_N3
from gradsing.linear_ball import ball_grid
from gradsing.nonlinear_ball import (
    PerturbationG,
    SolverConfig,
    bracket_scaling_probe,
    picard_solve,
    reference_direction_profile,
    verify_solution,
)


@pytest.fixture(scope="module")
def radial_runs(ball):
    g = PerturbationG("power_radial", 0.5, 1.0)
    return {t: picard_solve(ball, g, SolverConfig(t=t)) for t in (1e2, 1e3, 1e4)}


def test_zero_g_is_one_step(ball):
    rep = picard_solve(ball, PerturbationG(), SolverConfig(t=1e3))
    assert rep.converged and rep.iterations == 1
    assert rep.phi_norm_X <= 1e-12
    assert rep.positivity_ok and rep.ok


def test_radial_g_contracts(radial_runs):
    rep = radial_runs[1e3]
    assert rep.converged and rep.ok
    assert all(r < 0.5 for r in rep.contraction_ratios)
    assert rep.final_residual <= 1e-3
    assert rep.positivity_ok and rep.blowup_ok


def test_outer_sup_decreases_in_t(radial_runs):
    sups = [radial_runs[t].sup_u_outer for t in (1e2, 1e3, 1e4)]
    assert sups[0] > sups[1] > sups[2] > 0


def test_angular_g(ball):
    rep = picard_solve(ball, PerturbationG("power_angular", 0.5, 1.0), SolverConfig(t=1e3, K_max=4))
    assert rep.ok and rep.phi.K_max == 4
    assert all(r < 0.5 for r in rep.contraction_ratios)
    r, u = reference_direction_profile(rep, ball, 1e3)
    assert np.all(u[:-1] > 0) and abs(u[-1]) <= 1e-12


def test_verify_detects_wrong_field(ball, radial_runs):
    rep = radial_runs[1e3]
    g = PerturbationG("power_radial", 0.5, 1.0)
    good = verify_solution(rep.phi, ball, g, t=1e3)
    bad = verify_solution(rep.phi * 1.5, ball, g, t=1e3)
    assert good["residual"] <= 1e-10
    assert bad["residual"] > 1e3 * good["residual"]


def test_leaving_the_ball_is_reported(ball):
    with pytest.raises(ConfigError):
        picard_solve(ball, PerturbationG("power_radial", 5.0, 1.0), SolverConfig(t=2.0, R=0.9))


def test_g_hypotheses():
    with pytest.raises(ConfigError):
        PerturbationG("power_radial", -1.0)
    with pytest.raises(ConfigError):
        PerturbationG("custom", func=lambda r, d: 1.0 + 0 * r * d[..., 0])
    with pytest.raises(ConfigError):
        SolverConfig(t=0.5)


def test_bracket_is_quadratic_near_the_profile(ball):
    # the bracket scales like eps^2 where |grad u_t| dominates, like eps^p elsewhere
    grid = ball_grid(ball, 1e3)
    phi = decompose_N3(lambda r, d: r ** (1 - ball.sigma) * (1 - r) * (1 + d[..., 2]), grid, ball, 1)
    ratios = [bracket_scaling_probe(ball, 1e3, phi, e) for e in (1e-2, 1e-4)]
    assert 2**ball.p - 0.1 < ratios[0] < ratios[1] <= 4.0 + 1e-9
