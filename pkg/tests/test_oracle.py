import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gradsing.errors import ConfigError, HypothesisError, RegimeError
from gradsing.oracle import Inequality, check_ineq, estimate_lemma_constants, power_difference


@pytest.mark.parametrize("ineq", ["I1", "I2", "I3"])
@pytest.mark.parametrize("p", [1.1, 1.5, 2.0])
def test_no_violations_small_run(ineq, p):
    rep = check_ineq(ineq, p, 3, 50_000, seed=1)
    assert rep.ok and rep.violations == 0 and rep.lower_violations == 0
    assert 0 < rep.C_est < 10


def test_I1_constant_is_one_at_p2():
    rep = check_ineq("I1", 2.0, 4, 50_000, seed=2)
    assert rep.C_est == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [2.5, 3.0])
def test_pgt2_variant(p):
    rep = check_ineq(Inequality.I3_PGT2, p, 3, 50_000, seed=3)
    assert rep.ok and rep.C_est < 10


def test_determinism():
    a = check_ineq("I2", 1.5, 5, 20_000, seed=9).to_dict()
    b = check_ineq("I2", 1.5, 5, 20_000, seed=9).to_dict()
    assert a == b
    assert check_ineq("I2", 1.5, 5, 20_000, seed=10).to_dict() != a


def test_hypotheses_enforced():
    with pytest.raises(HypothesisError):
        check_ineq("I1", 2.5, 3, 10)
    with pytest.raises(HypothesisError):
        check_ineq("I3_pgt2", 1.5, 3, 10)
    with pytest.raises(ConfigError):
        check_ineq("I1", 1.5, 9, 10)
    with pytest.raises(ConfigError):
        check_ineq("I1", 1.5, 3, 0)


# squares of magnitudes below ~1e-154 underflow in any norm; keep clear of that range
_coord = st.one_of(st.just(0.0), st.floats(1e-100, 1e3), st.floats(-1e3, -1e-100))
vec = arrays(np.float64, 3, elements=_coord)


@settings(max_examples=200, deadline=None)
@given(x=vec, y=vec, z=vec, p=st.floats(1.01, 3.0))
def test_power_difference_matches_direct(x, y, z, p):
    got = power_difference(x[None], y[None], z[None], p)[0]
    direct = np.linalg.norm(x + y) ** p - np.linalg.norm(x + z) ** p
    scale = max(np.linalg.norm(x + y), np.linalg.norm(x + z)) ** p
    assert abs(got - direct) <= 1e-12 * scale + 1e-300


def test_power_difference_trivial_cases():
    x = np.array([[1.0, 2.0, 3.0]])
    y = np.array([[0.1, 0.0, 0.0]])
    assert power_difference(x, y, y, 1.5)[0] == 0.0
    assert power_difference(np.zeros((1, 3)), y, np.zeros((1, 3)), 1.5)[0] == pytest.approx(0.1**1.5, rel=1e-14)


def test_lemma_constants(ball):
    out = estimate_lemma_constants(ball, 1e3, 0.1, 0.1, n_fields=8, seed=0)
    assert out["exponent"] == pytest.approx(7 / 6, abs=1e-14)
    for key in ("C_into", "C_bracket", "C_contraction_I", "C_contraction_J"):
        assert np.isfinite(out[key]) and out[key] >= 0
    zero = estimate_lemma_constants(ball, 1e3, 0.1, 0.0, n_fields=4)
    assert zero["C_bracket"] == 0.0


def test_lemma_constants_reject(ball, ext):
    with pytest.raises(RegimeError):
        estimate_lemma_constants(ext, 1e3, 0.1, 0.1)
    with pytest.raises(ConfigError):
        estimate_lemma_constants(ball, 0.5, 0.1, 0.1)
