import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbeams.jets import Jet, JetError, jcos, jexp, jsin, monomials, ncoef


def coeffs(dim, degree, lo=-2.0, hi=2.0):
    m = ncoef(dim, degree)
    real = st.lists(st.floats(lo, hi), min_size=m, max_size=m)
    return st.tuples(real, real).map(lambda ri: np.array(ri[0]) + 1j * np.array(ri[1]))


def jets(dim=2, degree=3):
    return coeffs(dim, degree).map(lambda c: Jet(c, dim, degree))


def poly1(values, degree=2):
    return Jet(np.array(values, complex), 1, degree)


def close(a, b, tol=1e-13):
    scale = max(1.0, float(np.max(np.abs(a.coeffs))), float(np.max(np.abs(b.coeffs))))
    return float(np.max(np.abs(a.coeffs - b.coeffs))) <= tol * scale


# -- worked examples ------------------------------------------------------
def test_difference_of_squares():
    out = poly1([1, 1, 0]) * poly1([1, -1, 0])
    assert np.allclose(out.coeffs, [1, 0, -1])


def test_exp_series_product_truncates():
    e = poly1([1, 1, 0.5])
    out = e * poly1([1, -1, 0.5])
    assert np.allclose(out.coeffs, [1, 0, 0], atol=1e-15)


def test_shift_of_square():
    f = poly1([0, 0, 1])
    assert np.allclose(f.compose_shift([1.0]).coeffs, [1, 2, 1])
    assert np.array_equal(f.compose_shift([0.0]).coeffs, f.coeffs)


def test_shift_matches_finite_difference_oracle():
    rng = np.random.default_rng(3)
    f = Jet(rng.normal(size=4) + 0j, 1, 3)
    g = f.compose_shift([0.3])
    # Taylor coefficients at 0.3 from a 7-point polynomial fit of f on a stencil
    hs = np.linspace(-0.2, 0.2, 7)
    vals = np.array([f([0.3 + h]) for h in hs]).real.ravel()
    fit = np.polynomial.polynomial.polyfit(hs, vals, 3)
    assert np.allclose(g.coeffs.real, fit, atol=1e-12)


def test_sqrt_examples():
    assert np.allclose(Jet.constant(4.0, 1, 2).sqrt().coeffs, [2, 0, 0])
    assert np.allclose(poly1([1, 1, 0]).sqrt().coeffs, [1, 0.5, -0.125])


def test_reciprocal_examples():
    assert np.allclose(poly1([2, 1, 0]).reciprocal().coeffs, [0.5, -0.25, 0.125])
    assert np.allclose(Jet.constant(-3.0, 2, 2).reciprocal().coeffs[0], -1 / 3)


def test_derivative_examples():
    assert np.allclose(poly1([0, 0, 1]).diff(0).coeffs, [0, 2])
    assert np.all(Jet.constant(5.0, 2, 3).diff(1).coeffs == 0)


def test_zero_reciprocal_and_sqrt_rejected():
    with pytest.raises((JetError, ValueError)):
        poly1([0, 1, 0]).reciprocal()
    with pytest.raises((JetError, ValueError)):
        poly1([0, 1, 0]).sqrt()


def test_mismatch_rejected():
    with pytest.raises((JetError, ValueError)):
        Jet.zeros(1, 2) + Jet.zeros(2, 2)
    with pytest.raises((JetError, ValueError)):
        Jet.zeros(1, 2) * Jet.zeros(1, 3)


def test_graded_lex_layout():
    assert monomials(2, 2) == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert ncoef(2, 3) == 10


def test_trig_identity():
    x = Jet.variable(0, 1, 6, 0.7)
    one = jsin(x) * jsin(x) + jcos(x) * jcos(x)
    assert np.allclose(one.coeffs, [1, 0, 0, 0, 0, 0, 0], atol=1e-14)
    assert np.isclose(jexp(x).coeffs[3], np.exp(0.7) / 6)


# -- ring laws --------------------------------------------------------------
@given(jets(), jets())
def test_commutative(a, b):
    assert close(a + b, b + a) and close(a * b, b * a)


@given(jets(), jets(), jets())
def test_associative(a, b, c):
    assert close((a + b) + c, a + (b + c))
    assert close((a * b) * c, a * (b * c), 1e-12)


@given(jets(), jets(), jets())
def test_distributive(a, b, c):
    assert close(a * (b + c), a * b + a * c, 1e-12)


@given(jets())
def test_additive_identity(a):
    assert np.array_equal((a + Jet.zeros(2, 3)).coeffs, a.coeffs)


@given(jets(), jets())
def test_leibniz(a, b):
    for axis in (0, 1):
        lhs = (a * b).diff(axis)
        rhs = a.diff(axis) * b.with_degree(2) + a.with_degree(2) * b.diff(axis)
        assert close(lhs, rhs, 1e-12)


@given(coeffs(2, 3, -0.3, 0.3))
def test_sqrt_squares_back(c):
    c = c.copy()
    c[0] = 2.0
    a = Jet(c, 2, 3)
    b = a.sqrt()
    assert close(b * b, a, 1e-12)


@given(coeffs(2, 3, -0.4, 0.4))
def test_reciprocal_inverts(c):
    c = c.copy()
    c[0] = 1 + 1j
    a = Jet(c, 2, 3)
    one = a * a.reciprocal()
    target = Jet.constant(1.0, 2, 3)
    assert close(one, target, 1e-12)


@given(jets(), jets())
def test_degree_is_preserved(a, b):
    for out in (a * b, a + b, a - b, 2.0 * a):
        assert out.degree == 3 and out.coeffs.shape[-1] == ncoef(2, 3)
    assert a.diff(0).degree == 2
