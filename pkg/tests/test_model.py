import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptctl.errors import InfeasibleError
from adaptctl.model import (
    ArmaxPlant,
    Polynomial,
    TransferFunction,
    bezout_solve,
    coprime,
    is_hurwitz,
    matching_solve,
    nonminimal_realize,
    nonminimal_response,
)


def test_polynomial_strips_trailing_zeros():
    p = Polynomial([1.0, 2.0, 0.0, 0.0])
    assert p.degree == 1
    assert p.leading == 2.0
    assert Polynomial([0.0, 0.0]).is_zero()


def test_polynomial_rejects_nonfinite():
    with pytest.raises(ValueError):
        Polynomial([1.0, np.nan])


def test_coprime():
    s_plus_1 = Polynomial([1, 1])
    assert coprime(s_plus_1, Polynomial([2, 1]))
    assert not coprime(s_plus_1, Polynomial.from_roots([-1, -2]))


def test_bezout_first_order():
    F, G = bezout_solve(Polynomial([1, -0.5]), Polynomial([1]), 1)
    np.testing.assert_allclose(F.coeffs, [1.0])
    np.testing.assert_allclose(G.coeffs, [0.5])


def test_bezout_two_step_delay():
    a = 0.7
    F, G = bezout_solve(Polynomial([1, -a]), Polynomial([1]), 2)
    np.testing.assert_allclose(F.coeffs, [1.0, a])
    np.testing.assert_allclose(G.coeffs, [a ** 2])


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-0.9, 0.9), min_size=1, max_size=3),
    st.lists(st.floats(-0.9, 0.9), min_size=0, max_size=2),
    st.integers(1, 4),
)
def test_bezout_identity_holds(a, c, d):
    c = c[: len(a)]
    A = Polynomial([1.0] + a)
    C = Polynomial([1.0] + c)
    F, G = bezout_solve(A, C, d)
    assert F.degree <= d - 1
    zd = Polynomial([0.0] * d + [1.0])
    lhs = (A * F + zd * G).coeffs
    rhs = C.coeffs
    m = max(lhs.size, rhs.size)
    np.testing.assert_allclose(np.pad(lhs, (0, m - lhs.size)), np.pad(rhs, (0, m - rhs.size)), atol=1e-10)


def test_matching_scalar():
    theta, k = matching_solve([[1.0]], [2.0], [[-3.0]], [2.0])
    np.testing.assert_allclose(theta, [-2.0])
    assert k == pytest.approx(1.0)


def test_matching_infeasible():
    with pytest.raises(InfeasibleError):
        matching_solve([[1.0]], [0.0], [[-3.0]], [2.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(0.5, 3))
def test_matching_companion_roundtrip(a, kb):
    # companion plant and model with matched input direction
    Ap = np.array([[0, 1], a])
    bp = np.array([0.0, kb])
    Am = np.array([[0, 1], [-2.0, -3.0]])
    bm = np.array([0.0, 2.0])
    theta, k = matching_solve(Ap, bp, Am, bm)
    np.testing.assert_allclose(Ap + np.outer(bp, theta), Am, atol=1e-9)
    np.testing.assert_allclose(bp * k, bm, atol=1e-9)


def test_nonminimal_first_order():
    Wp = TransferFunction([1.0], [1.0, 1.0])
    th1, th2 = nonminimal_realize(Wp, [[-2.0]], [1.0])
    np.testing.assert_allclose(th1, [1.0])
    np.testing.assert_allclose(th2, [1.0])
    Wp2 = TransferFunction([1.0], [2.0, 1.0])
    th1, th2 = nonminimal_realize(Wp2, [[-2.0]], [1.0])
    np.testing.assert_allclose(th1, [1.0])
    np.testing.assert_allclose(th2, [0.0], atol=1e-12)


def test_nonminimal_response_matches_plant():
    Wp = TransferFunction([2.0, 1.0], [1.0, 3.0, 1.0])
    Lam = [[0.0, 1.0], [-2.0, -3.0]]
    ell = [0.0, 1.0]
    th1, th2 = nonminimal_realize(Wp, Lam, ell)
    for s in (0.3j, 1.0 + 2j, 5j):
        assert nonminimal_response(th1, th2, Lam, ell, s) == pytest.approx(complex(Wp(s)), rel=1e-9)


def test_is_hurwitz():
    assert is_hurwitz([[-1.0, 0.0], [0.0, -2.0]])
    assert not is_hurwitz([[1.0]])


def test_armax_requires_nonzero_gain():
    with pytest.raises(ValueError):
        ArmaxPlant(a=(0.5,), b=(0.0,))
