from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy import integrate, linalg

from whittaker import hitting as H
from whittaker.operators import build_L_r
from whittaker.shapes import AlphaSpec


@pytest.mark.parametrize("a", [0, 2])
def test_kernel_1d_against_expm(a):
    k, t = 5, 0.15
    L = build_L_r(1, AlphaSpec((a,)), (k,))
    order = L.space.states
    row = linalg.expm(t * L.to_dense(order))[order.index((k,))]
    for n in range(k + 1):
        assert H.kernel_1d(k, n, a, t) == pytest.approx(row[order.index((n,))], abs=1e-12)


def test_kernel_1d_is_a_probability():
    assert sum(H.kernel_1d(6, n, 1, 0.3) for n in range(7)) == pytest.approx(1.0, abs=1e-14)


def test_laplace_hit_1d_against_density():
    # d/dt p_t(k, 0) is the density of the absorption time at 0
    k, a, s = 3, 1, 0.7
    dens = lambda t: H.kernel_1d(k, 1, a, t) * 1 * (1 + a)
    val, _ = integrate.quad(lambda t: np.exp(-s * t) * dens(t), 0, 60, limit=200)
    assert float(H.laplace_hit_1d(k, 0, a, s)) == pytest.approx(val, rel=1e-9)


def test_gibbs_identity():
    assert H.gibbs_check(8, 0)
    assert H.gibbs_check(6, 3)
    assert H.gibbs_identity([1]) == 1


def test_green_and_star():
    assert H.green_1d(3, 1) == Fraction(1, 12)
    assert H.a1_star(3, 1) == 2 * 6


def test_absorption_factorization_alpha_zero():
    for n in range(4):
        for m in range(4):
            for s in (Fraction(1), Fraction(5, 2)):
                assert H.absorption_factorization_check(n, m, s, 0)


def test_finite_hitting_two_routes():
    for k in range(5):
        for l in range(5):
            for n in range(k + 1):
                for m in range(l + 1):
                    assert H.hitting_prob_finite(k, l, n, m) == H.hitting_prob_linear_solve(k, l, n, m)


def test_finite_hitting_increases_to_entrance_value():
    h11 = H.hitting_prob_entrance(1, 1).value
    vals = [float(H.hitting_prob_finite(k, k, 1, 1)) for k in (2, 4, 8, 16)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    assert vals[-1] - h11 < 1e-5


def test_sin_squared_two_routes():
    for j in range(1, 8):
        z = H.sin2_pi_omega_complex(j)
        assert abs(mpmath.im(z)) < 1e-30
        assert float(H.sin2_pi_omega(j)) == pytest.approx(float(mpmath.re(z)), rel=1e-14)


@pytest.mark.parametrize("n,m", [(1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (2, 2), (3, 2)])
def test_entrance_two_routes(n, m):
    direct = H.hitting_prob_entrance(n, m)
    assert direct.bound < 1e-14
    assert direct.value == pytest.approx(H.hitting_prob_entrance_via_S(n, m), abs=1e-12)


@pytest.mark.parametrize("n,m", [(1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (2, 2)])
def test_entrance_closed_table(n, m):
    assert H.closed_form_value(n, m) == pytest.approx(H.hitting_prob_entrance(n, m).value, abs=1e-12)


def test_entrance_table_consistent_across_levels():
    t = H.entrance_table(8)
    prev = H.propagate_level({k: v for k, v in t.items() if sum(k) == 8}, 8)
    assert max(abs(prev[k] - t[k]) for k in prev) < 1e-12
    assert all(0 < v <= 1 for v in t.values())


def test_one_over_k2_two_routes():
    t = H.entrance_table(12)
    for k in (1, 2):
        direct = sum(H.one_over_k2_direct_term(n, m, k, v) for (n, m), v in t.items() if n >= k and m >= k)
        assert H.one_over_k2(k, 12, t) == pytest.approx(direct, rel=1e-12)
