import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradsing.errors import BandLimitError, ConfigError
from gradsing.fields import (
    ModeField,
    decompose_N3,
    fd_weights,
    gauss_product_set,
    gradient_norm,
    load_angular_table,
    make_log_grid,
    norms,
    sh_index,
    sh_labels,
    synthesize_N3,
)


def test_fd_weights_are_exact_on_polynomials():
    w = fd_weights((-3, -2, -1, 0, 1, 2, 3), 1)
    x = np.arange(-3, 4, dtype=float)
    for deg in range(7):
        assert w @ x**deg == pytest.approx(1.0 if deg == 1 else 0.0, abs=1e-11)


def test_log_grid_derivatives_order():
    errs = []
    for M in (101, 201):
        g = make_log_grid(1e-3, 1.0, M)
        a = np.sin(3 * g.s)
        errs.append(np.abs(g.ds(a) - 3 * np.cos(3 * g.s)).max())
    # sixth-order stencils: halving h gains roughly 2^6
    assert errs[1] < errs[0] / 30


def test_grid_quadrature():
    g = make_log_grid(1e-2, 1.0, 401)
    assert g.integrate(np.exp(2 * g.s)) == pytest.approx((1 - 1e-4) / 2, rel=1e-10)


def test_labels_index_round_trip():
    for i, (k, m) in enumerate(sh_labels(5)):
        assert sh_index(k, m) == i


def test_shipped_angular_table_matches_generator():
    shipped = load_angular_table()
    fresh = gauss_product_set(8)
    assert shipped.exact_degree == fresh.exact_degree
    for a, b in ((shipped.theta, fresh.theta), (shipped.phi, fresh.phi), (shipped.weights, fresh.weights)):
        assert np.allclose(a, b, rtol=0, atol=1e-15)
    assert shipped.weights.sum() == pytest.approx(4 * math.pi, rel=1e-14)


def test_harmonics_orthonormal():
    aset = gauss_product_set(4)
    Y, _, _ = aset.basis(4)
    G = (Y * aset.weights) @ Y.T
    assert np.allclose(G, np.eye(len(Y)), atol=1e-13)


def test_decompose_and_evaluate(ball):
    g = make_log_grid(1e-2, 1.0, 41)
    f = lambda r, d: r**2 * (d[..., 2] ** 2 + d[..., 0] * d[..., 1]) + r
    fld = decompose_N3(f, g, ball, 2)
    aset = gauss_product_set(2)
    ref = f(g.r[:, None], aset.directions[None])
    assert np.allclose(fld.values(aset), ref, atol=1e-13)
    # along the north pole x3 = 1
    assert np.allclose(synthesize_N3(fld, 0.0), g.r**2 + g.r, atol=1e-13)


def test_band_limit_error(ball):
    g = make_log_grid(1e-2, 1.0, 21)
    with pytest.raises(BandLimitError):
        decompose_N3(lambda r, d: r + 0 * d[..., 0], g, ball, 12, gauss_product_set(2))


def test_gradient_of_linear_function(ball):
    g = make_log_grid(1e-2, 1.0, 201)
    fld = decompose_N3(lambda r, d: r * d[..., 2], g, ball, 1)
    grad = fld.gradient_cartesian()
    assert np.allclose(grad[..., 2], 1.0, atol=1e-9)
    assert np.allclose(grad[..., :2], 0.0, atol=1e-9)
    assert np.allclose(gradient_norm(fld), 1.0, atol=1e-9)


def test_weighted_norms_of_extremal_profile(ball):
    g = make_log_grid(1e-4, 1.0, 401)
    fld = ModeField.from_radial(g, g.r ** (-ball.sigma), ball)
    rep = norms(fld)
    assert rep.zero_order == pytest.approx(1.0, rel=1e-12)
    assert rep.gradient == pytest.approx(ball.sigma, rel=1e-8)
    assert rep.norm_X == pytest.approx(1 + ball.sigma, rel=1e-8)
    assert rep.norm_Y == pytest.approx(1.0, rel=1e-12)


def test_exterior_X_norm_is_gradient_only(ext):
    g = make_log_grid(1.0, 10.0, 201)
    fld = ModeField.from_radial(g, np.ones(g.M), ext)
    assert norms(fld).norm_X == pytest.approx(0.0, abs=1e-10)


def test_csv_round_trip(ball, tmp_path):
    g = make_log_grid(1e-2, 1.0, 31)
    fld = decompose_N3(lambda r, d: r * d[..., 0] + r**2, g, ball, 1)
    path = tmp_path / "fld.csv"
    fld.to_csv(path)
    back = ModeField.from_csv(path, ball)
    assert back.labels == fld.labels
    assert np.array_equal(back.coeffs, fld.coeffs)
    assert np.allclose(back.grid.r, g.r, rtol=1e-15)


def test_shape_mismatch(ball):
    g = make_log_grid(1e-2, 1.0, 21)
    with pytest.raises(ConfigError):
        ModeField(g, [(0, 0)], np.zeros((2, g.M)), ball)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_decompose_is_linear(ball, a, b):
    g = make_log_grid(1e-2, 1.0, 11)
    f1 = lambda r, d: r * d[..., 2]
    f2 = lambda r, d: r**2 * d[..., 0] * d[..., 1]
    lhs = decompose_N3(lambda r, d: a * f1(r, d) + b * f2(r, d), g, ball, 2)
    rhs = decompose_N3(f1, g, ball, 2) * a + decompose_N3(f2, g, ball, 2) * b
    assert np.allclose(lhs.coeffs, rhs.coeffs, atol=1e-12 * (1 + abs(a) + abs(b)))
