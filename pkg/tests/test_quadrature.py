import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from muskat.curve import PeriodicField, PeriodicGrid, differentiate
from muskat.errors import AliasingError, QuadratureNonconvergence, UnsupportedGridError
from muskat.quadrature import (
    LocalModel,
    QuadratureSpec,
    ad_inequality_margin,
    adaptive_lobatto,
    hilbert_transform,
    lambda_op,
    pv_integral,
)

from conftest import random_trig

G64 = PeriodicGrid.uniform_grid(64)


def _cot(b):
    return 1.0 / np.tan(0.5 * b)


def test_pv_cot_is_zero():
    v, err = pv_integral(_cot)
    assert abs(v) < 1e-10 and err < 1e-8


def test_pv_cot_sin():
    # cot(b/2) sin b = 1 + cos b, whose antiderivative gives 2π
    v, _ = pv_integral(lambda b: _cot(b) * np.sin(b))
    assert v == pytest.approx(2 * np.pi, abs=1e-10)


def test_pv_with_local_model():
    # integrand 3 cot(b/2) + 1 + b²: local model supplied explicitly
    spec = QuadratureSpec()
    model = LocalModel(cot_coefficient=3.0, taylor=(1.0, 0.0, 1.0))
    v, _ = pv_integral(lambda b: 3 * _cot(b) + 1 + b**2, spec, local_model=model)
    assert v == pytest.approx(2 * np.pi + 2 * np.pi**3 / 3, rel=1e-11)


def test_regular_cosine():
    v, _ = pv_integral(np.cos, singular=False)
    assert abs(v) < 1e-12


def test_regular_against_scipy():
    fn = lambda b: np.exp(np.sin(b)) * np.cos(3 * b) ** 2
    v, _ = pv_integral(fn, singular=False)
    ref, _ = quad(fn, -np.pi, np.pi, epsabs=1e-13, epsrel=1e-13)
    assert v == pytest.approx(ref, rel=1e-11)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(-4, 4), st.floats(-4, 4))
def test_pv_linear_on_regular_path(seed, a, b):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(2, 4))
    u = lambda x: sum(c[0, j] * np.cos(j * x + c[1, j]) for j in range(4)) * np.exp(0.3 * np.sin(x))
    v = lambda x: np.exp(c[0, 0] * np.cos(x) / 4)
    lhs, _ = pv_integral(lambda x: a * u(x) + b * v(x), singular=False)
    ru, _ = pv_integral(u, singular=False)
    rv, _ = pv_integral(v, singular=False)
    assert lhs == pytest.approx(a * ru + b * rv, abs=1e-10 * (1 + abs(lhs)))


def test_adaptive_lobatto_budget():
    with pytest.raises(QuadratureNonconvergence):
        adaptive_lobatto(lambda x: np.sign(np.sin(1e3 * x)), np.linspace(0, 1, 3), 1e-14, 1e-16, max_panels=20)


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0)
    with pytest.raises(ValueError):
        QuadratureSpec(local_window=1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(taylor_order=5)


def test_hilbert_examples():
    a = G64.alphas
    assert np.allclose(hilbert_transform(PeriodicField(G64, np.cos(a))).values, np.sin(a), atol=1e-13)
    assert np.allclose(hilbert_transform(PeriodicField(G64, np.full(64, 3.0))).values, 0, atol=1e-13)
    assert np.allclose(hilbert_transform(PeriodicField(G64, np.sin(3 * a))).values, -np.cos(3 * a), atol=1e-13)


def test_lambda_examples():
    a = G64.alphas
    assert np.allclose(lambda_op(PeriodicField(G64, np.cos(2 * a))).values, 2 * np.cos(2 * a), atol=1e-13)
    for s in (0.5, 1.0):
        assert np.allclose(lambda_op(PeriodicField(G64, np.full(64, 2.0)), s).values, 0, atol=1e-13)
    assert np.allclose(lambda_op(PeriodicField(G64, np.cos(a)), 0.5).values, np.cos(a), atol=1e-13)


def test_multipliers_need_uniform_grid():
    g = PeriodicGrid(np.linspace(-np.pi, 3.0, 16))
    with pytest.raises(UnsupportedGridError):
        hilbert_transform(PeriodicField(g, np.zeros(16)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_hilbert_squared_is_minus_identity_on_mean_zero(seed):
    f = random_trig(G64, 20, np.random.default_rng(seed))
    hh = hilbert_transform(hilbert_transform(f)).values
    assert np.max(np.abs(hh + (f.values - f.values.mean()))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_lambda_is_derivative_of_hilbert(seed):
    f = random_trig(G64, 20, np.random.default_rng(seed))
    lhs = lambda_op(f).values
    rhs = differentiate(hilbert_transform(f)).values
    assert np.max(np.abs(lhs - rhs)) < 1e-11


def test_ad_margin_examples():
    g256 = PeriodicGrid.uniform_grid(256)
    assert ad_inequality_margin(PeriodicField(g256, np.cos(g256.alphas))) == pytest.approx(1.0, abs=1e-12)
    assert abs(ad_inequality_margin(PeriodicField(g256, np.full(256, 1.7)))) < 1e-12
    g = random_trig(g256, 8, np.random.default_rng(3))
    assert ad_inequality_margin(g) >= -1e-10


def test_ad_margin_aliasing():
    g = PeriodicField(G64, np.cos(20 * G64.alphas))
    with pytest.raises(AliasingError):
        ad_inequality_margin(g)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 32))
def test_ad_inequality_property(seed, degree):
    g = random_trig(PeriodicGrid.uniform_grid(128), degree, np.random.default_rng(seed))
    assert ad_inequality_margin(g) >= -1e-10
