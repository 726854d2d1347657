import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from gradsing.errors import ConfigError, RegimeError
from gradsing.linear_ball import ball_grid
from gradsing.modes import (
    Operator,
    euler_roots,
    kernel_decay_diagnostic,
    lambda_k,
    local_roots,
    multiplicity,
    root_table,
    tau_coefficients,
)
from gradsing.params import new_ball_params


def admissible_pairs():
    """Twenty (N, p) pairs strictly inside N/(N-1) < p < 2."""
    out = []
    for N in (3, 4, 5, 7, 10):
        lo = Fraction(N, N - 1)
        for j in (1, 2, 3, 4):
            out.append((N, lo + (2 - lo) * Fraction(j, 5)))
    return out


def test_pair_count():
    assert len(admissible_pairs()) == 20


def test_lambda_and_multiplicity():
    assert [lambda_k(3, k) for k in range(4)] == [0, 2, 6, 12]
    assert [multiplicity(3, k) for k in range(4)] == [1, 3, 5, 7]
    assert multiplicity(4, 2) == 9


@pytest.mark.parametrize("N,p", admissible_pairs())
def test_root_identities(N, p):
    P = new_ball_params(N, p)
    er = euler_roots(P, 1)
    pf = float(p)
    target = ((N - 1) * pf**2 + pf * (-2 * N + 1) + N + 1) / (pf - 1)
    assert er.gamma_minus + P.sigma == pytest.approx(-1.0, abs=1e-12)
    assert P.sigma + er.gamma_plus == pytest.approx(target, abs=1e-12)


@pytest.mark.parametrize("N,p", admissible_pairs()[::3])
def test_roots_against_mpmath(N, p):
    mpmath.mp.dps = 40
    P = new_ball_params(N, p)
    pm = mpmath.mpf(p.numerator) / p.denominator
    alpha = (pm - 1) * (N - 1)
    beta = (pm - 1) / (alpha - 1)
    b = N - 2 - pm / beta
    for k in range(5):
        lam = k * (k + N - 2)
        disc = mpmath.sqrt(b * b + 4 * lam)
        er = euler_roots(P, k)
        assert er.gamma_minus == pytest.approx(float((-b - disc) / 2), abs=1e-13)
        assert er.gamma_plus == pytest.approx(float((-b + disc) / 2), abs=1e-13)
        assert max(abs(x) for x in er.residuals()) <= 1e-12


@pytest.mark.parametrize("N", [3, 4, 5, 8])
def test_laplace_roots_k1(N):
    P = new_ball_params(N, Fraction(N, N - 1) + Fraction(1, 10))
    er = euler_roots(P, 1, Operator.LAPLACE)
    assert (er.gamma_minus, er.gamma_plus) == (-N + 1, 1)
    assert er.exact == (Fraction(-N + 1), Fraction(1))


def test_roots_need_ball(ext):
    with pytest.raises(RegimeError):
        euler_roots(ext, 1)


def test_root_table_rows(ball):
    rows = root_table(ball, 4)
    assert [r["k"] for r in rows] == list(range(5))
    assert all(r["gamma_minus"] < 0 < r["gamma_plus"] or r["k"] == 0 for r in rows)


def test_local_roots_limits(ball):
    # drift tends to p/beta at the origin and to 0 for t r^(alpha-1) large
    far = local_roots(ball, 1e12, 1, 0.5)
    lap = euler_roots(ball, 1, Operator.LAPLACE)
    assert far[0] == pytest.approx(lap.gamma_minus, abs=1e-5)
    near = local_roots(ball, 1.0, 2, 1e-30)
    er = euler_roots(ball, 2)
    assert near == pytest.approx((er.gamma_minus, er.gamma_plus), abs=1e-12)


def test_tau_coefficients_at_origin(ball):
    g, C = tau_coefficients(ball, 10.0, 1, -math.inf)
    # w = r^sigma a turns r^gamma into r^(gamma+sigma): the indicial roots shift by sigma
    er = euler_roots(ball, 1)
    for gam in (er.gamma_minus, er.gamma_plus):
        x = gam + ball.sigma
        assert x * x + g * x + C == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_kernel_is_trivial(ball, k):
    # the drift is frozen to O((r/R_t)^(alpha-1)); fit eight decades below R_t
    grid = ball_grid(ball, 1e3, r_min=ball.R_t(1e3) * 1e-8)
    rep = kernel_decay_diagnostic(ball, 1e3, k, grid)
    assert rep.kernel_trivial
    assert rep.singular_exponent == pytest.approx(rep.gamma_minus, abs=1e-3)
    assert rep.regular_exponent == pytest.approx(rep.gamma_plus, abs=1e-3)


def test_kernel_needs_positive_k(ball):
    with pytest.raises(ConfigError):
        kernel_decay_diagnostic(ball, 10.0, 0, ball_grid(ball, 10.0))
