import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gradsing.brackets import gradient_bracket, linear_term, power_remainder


def _mp_bracket(x, y, p):
    xs = [mpmath.mpf(float(v)) for v in x]
    ys = [mpmath.mpf(float(v)) for v in y]
    nx = mpmath.sqrt(sum(v * v for v in xs))
    nxy = mpmath.sqrt(sum((a + b) ** 2 for a, b in zip(xs, ys)))
    dot = sum(a * b for a, b in zip(xs, ys))
    lin = p * nx ** (p - 2) * dot if nx > 0 else 0
    return nxy**p - nx**p - lin


@pytest.mark.parametrize("p", [1.1, 1.5, 1.75, 2.0, 2.5, 3.0])
def test_bracket_matches_mpmath(p):
    mpmath.mp.dps = 80
    rng = np.random.default_rng(3)
    for scale in (1e-9, 1e-4, 1e-1, 1.0, 1e3):
        x = rng.standard_normal((40, 3))
        y = scale * rng.standard_normal((40, 3))
        got = gradient_bracket(x, y, p)
        for i in range(40):
            ref = float(_mp_bracket(x[i], y[i], mpmath.mpf(p)))
            mag = np.linalg.norm(y[i]) ** 2 * np.linalg.norm(x[i]) ** (p - 2) + np.linalg.norm(y[i]) ** p
            assert abs(got[i] - ref) <= 1e-13 * mag


def test_bracket_zero_x_and_zero_y():
    y = np.array([[0.3, -0.4, 0.0]])
    assert gradient_bracket(np.zeros((1, 3)), y, 1.5)[0] == pytest.approx(0.5**1.5, rel=1e-15)
    assert gradient_bracket(np.ones((1, 3)), np.zeros((1, 3)), 1.5)[0] == 0.0


def test_bracket_p2_is_square():
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((2, 100, 4))
    assert np.allclose(gradient_bracket(x, y, 2.0), np.sum(y * y, axis=-1), rtol=1e-13)


def test_power_remainder_small_and_large():
    q = np.array([-1.0, -0.9, -1e-8, 0.0, 1e-8, 0.3, 5.0])
    mpmath.mp.dps = 50
    for c in (0.55, 0.875, 1.25):
        ref = [float((1 + mpmath.mpf(v)) ** c - 1 - c * mpmath.mpf(v)) for v in q]
        assert np.allclose(power_remainder(q, c), ref, rtol=1e-13, atol=1e-300)


def test_linear_term_convention():
    assert linear_term(np.zeros(3), np.ones(3), 1.5) == 0.0


# squares of magnitudes below ~1e-154 underflow in any norm; keep clear of that range
_coord = st.one_of(st.just(0.0), st.floats(1e-100, 1e3), st.floats(-1e3, -1e-100))
vec = arrays(np.float64, 3, elements=_coord)


@settings(max_examples=200, deadline=None)
@given(x=vec, y=vec, p=st.floats(1.01, 2.0))
def test_bracket_nonnegative_and_bounded(x, y, p):
    # convexity gives the lower bound; the upper constant stays below 4 for p <= 2
    b = gradient_bracket(x, y, p)
    ny = np.linalg.norm(y)
    assert b >= -1e-12 * (ny**p + 1e-300)
    assert b <= 4.0 * ny**p * (1 + 1e-12) + 1e-300


@settings(max_examples=100, deadline=None)
@given(x=vec, y=vec, p=st.floats(1.01, 3.0), lam=st.floats(1e-3, 1e3))
def test_bracket_homogeneous(x, y, p, lam):
    a = gradient_bracket(lam * x, lam * y, p)
    b = lam**p * gradient_bracket(x, y, p)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    with np.errstate(divide="ignore", over="ignore"):
        scale = lam**p * (ny**p + (nx ** (p - 2) if nx > 0 else 0.0) * ny**2)
    assert abs(a - b) <= 1e-10 * scale + 1e-300
