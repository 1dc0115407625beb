from fractions import Fraction
from math import comb, factorial

import pytest
from hypothesis import given, settings, strategies as st

from whittaker.coefficients import (
    a2_bump, a_coeff, a_coeff_by_fiber, a_normalized, a_zero_closed_form, apery_check, b_coeff,
    b_coeff_recursive, bc2_coeff, coeff_general_shape, coefficient, g2_by_fiber, g2_coeff, g2_constant_term,
    g2_recursive, permutation_invariance_check, rec_residual, sigma_from_tuple, staircase_sigma, tilde_a,
    tilde_a2_closed_form,
)
from whittaker.shapes import AlphaSpec, Shape, staircase

small = st.integers(0, 3)
alphas = st.lists(st.integers(0, 2), min_size=3, max_size=3)


def test_r1_is_inverse_factorial_square():
    for n in range(8):
        assert a_coeff(1, AlphaSpec(), (n,)) == Fraction(1, factorial(n) ** 2)


def test_r1_with_alpha():
    # sum_n x^n / (n! (n+a)!)
    for a in range(3):
        for n in range(5):
            assert a_coeff(1, AlphaSpec((a,)), (n,)) == Fraction(1, factorial(n) * factorial(n + a))


def test_A2_is_binomial():
    for n in range(6):
        for m in range(6):
            assert a_normalized(2, (n, m)) == comb(n + m, n)


@given(alphas.map(lambda a: a[:2]), small, small)
def test_bump_closed_form(alpha, n, m):
    a = AlphaSpec(alpha)
    assert a_coeff(2, a, (n, m)) == a2_bump(a, n, m)


@settings(max_examples=40, deadline=None)
@given(alphas, small, small, small)
def test_recursion_matches_fiber_sum(alpha, n1, n2, n3):
    a = AlphaSpec(alpha)
    assert a_coeff(3, a, (n1, n2, n3)) == a_coeff_by_fiber(3, a, (n1, n2, n3))


@settings(max_examples=60, deadline=None)
@given(alphas, small, small, small)
def test_difference_equation_residual(alpha, n1, n2, n3):
    assert rec_residual(3, AlphaSpec(alpha), (n1, n2, n3)) == 0


def test_value_at_origin():
    for alpha in [(0, 0, 0), (1, 2, 0), (2, 1, 3)]:
        a = AlphaSpec(alpha)
        assert a_coeff(3, a, (0, 0, 0)) == a_zero_closed_form(3, a)


def test_apery_diagonal():
    rep = apery_check(10)
    assert rep["ok"]
    assert rep["values"][:5] == [1, 5, 73, 1445, 33001]


def test_general_shape_agrees_with_staircase():
    lam, mu = staircase(3), staircase(2)
    for n in [(0, 0, 0), (1, 1, 1), (2, 1, 0), (1, 2, 3)]:
        sigma = staircase_sigma(3, n)
        assert coeff_general_shape(lam, mu, sigma) == a_normalized(3, n)


def test_general_shape_symmetric_under_transpose():
    lam, mu = Shape((3, 2)), Shape((1,))
    lt, mt = lam.transpose(), mu.transpose()
    for vals in [(1, 1, 1, 1), (2, 1, 1, 0), (0, 1, 2, 2)]:
        sig = sigma_from_tuple(lam, mu, vals)
        sig_t = {(j, i): v for (i, j), v in sig.items()}
        assert coeff_general_shape(lam, mu, sig) == coeff_general_shape(lt, mt, sig_t)


def test_type_B_routes():
    assert [b_coeff(2, (n, n)) for n in range(5)] == [1, 3, 19, 147, 1251]
    for n in range(4):
        for m in range(4):
            assert b_coeff(2, (n, m)) == b_coeff_recursive(2, (n, m))


def test_G2_three_routes():
    for n in range(4):
        for m in range(4):
            g = g2_coeff(n, m)
            assert g == g2_by_fiber(n, m) == g2_constant_term(n, m) == g2_recursive(n, m)


def test_BC2_small_values():
    assert [[bc2_coeff(n, m) for m in range(3)] for n in range(3)] == [[1, 1, 1], [1, 3, 5], [1, 5, 13]]


def test_shifted_coordinates_permutation_invariance():
    nu = (Fraction(1), Fraction(0), Fraction(-1))
    for n_prime in [(Fraction(2), Fraction(2)), (Fraction(3), Fraction(1)), (Fraction(4), Fraction(3))]:
        for perm in [(1, 0, 2), (2, 1, 0), (0, 2, 1)]:
            assert permutation_invariance_check(2, nu, n_prime, perm)


def test_shifted_closed_form():
    for nu in [(1, 0, -1), (2, -1, -1)]:
        nu = tuple(Fraction(x) for x in nu)
        for n_prime in range(5):
            for m_prime in range(5):
                assert tilde_a(2, nu, (n_prime, m_prime)) == tilde_a2_closed_form(nu, n_prime, m_prime)


def test_dispatch():
    assert coefficient("A", 3, n=(1, 1, 1)) == 5
    assert coefficient("G2", n=(1, 1)) == 4
    with pytest.raises(ValueError):
        coefficient("A", 2, AlphaSpec((1,)), (1, 1))
    with pytest.raises(ValueError):
        coefficient("nope")


def test_outside_cone_is_zero():
    assert a_coeff(2, AlphaSpec(), (-1, 0)) == 0
    with pytest.raises(ValueError):
        a_coeff(2, AlphaSpec(), (1,))
