"""Transition kernels, absorption times and hitting probabilities for ``r = 1`` and ``r = 2``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath

from . import coefficients as coeffs
from .coefficients import _fact, binom

# ---------------------------------------------------------------------------
# r = 1


def laplace_hit_1d(k: int, n: int, a: int, s) -> Fraction:
    """``E_k exp(-s T_n) = prod_{j=n+1}^k j(j+a) / (j(j+a) + s)`` for ``L^1 = n(n+a) D_n``."""
    if k < n:
        raise ValueError("need k >= n")
    s = Fraction(s)
    out = Fraction(1)
    for j in range(n + 1, k + 1):
        out *= Fraction(j * (j + a)) / (j * (j + a) + s)
    return out


def spectral_coefficient(k: int, n: int, a: int, j: int) -> Fraction:
    """``prod_{l=n..k, l != j} 1 / ((l - j)(l + j + a))``."""
    out = Fraction(1)
    for l in range(n, k + 1):
        if l != j:
            out /= (l - j) * (l + j + a)
    return out


def kernel_tilde_1d(k: int, n: int, a: int, t: float, dps: int = 50) -> float:
    """Heat kernel ``p~_t(k, n)`` of ``h^1`` by its spectral sum (summed at ``dps`` digits)."""
    if k < n:
        return 0.0
    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for j in range(n, k + 1):
            c = spectral_coefficient(k, n, a, j)
            total += mpmath.mpf(c.numerator) / c.denominator * mpmath.exp(-j * (j + a) * mpmath.mpf(t))
        return float(total)


def a1(n: int, a: int) -> Fraction:
    return Fraction(1, _fact(n) * _fact(n + a))


def kernel_1d(k: int, n: int, a: int, t: float) -> float:
    """Transition probability ``p_t(k, n) = a_1(n) / a_1(k) * p~_t(k, n)``."""
    if k < n:
        return 0.0
    ratio = a1(n, a) / a1(k, a)
    with mpmath.workdps(60):
        total = mpmath.mpf(0)
        for j in range(n, k + 1):
            c = spectral_coefficient(k, n, a, j) * ratio
            total += mpmath.mpf(c.numerator) / c.denominator * mpmath.exp(-j * (j + a) * mpmath.mpf(t))
        return float(total)


def gibbs_identity(lams: Sequence) -> Fraction:
    """``sum_a prod_{b != a} 1 / (l_a - l_b)``; zero for two or more distinct values."""
    lams = [Fraction(x) for x in lams]
    total = Fraction(0)
    for i, la in enumerate(lams):
        term = Fraction(1)
        for j, lb in enumerate(lams):
            if i != j:
                term /= la - lb
        total += term
    return total


def gibbs_check(N: int, a: int = 0) -> bool:
    """The identity for ``l_j = j(j+a)`` over every window ``n..n+N-1`` with ``n <= N``."""
    return all(gibbs_identity([j * (j + a) for j in range(n, n + N)]) == 0 for n in range(0, N + 1)) if N >= 2 else True


def green_1d(n: int, a: int) -> Fraction:
    """``g_1(n) = 1 / (n(n+a))``."""
    return Fraction(1, n * (n + a))


def a1_star(n: int, a: int) -> int:
    """``a_1^*(n) = Gamma(n) Gamma(n+a)``."""
    return _fact(n - 1) * _fact(n + a - 1)


# ---------------------------------------------------------------------------
# r = 2 absorption times


def L2_extended_rates(n: int, m: int, a: int = 0) -> tuple[Fraction, Fraction]:
    """Rates of ``L^2`` with ``alpha = (a, -a)`` on ``{m >= a}``: ``n^2(n+a)/(n+m)`` and ``m^2(m-a)/(n+m)``."""
    if n + m == 0:
        return Fraction(0), Fraction(0)
    return Fraction(n * n * (n + a), n + m), Fraction(m * m * (m - a), n + m)


def laplace_absorption_exact(n: int, m: int, s, a: int = 0) -> Fraction:
    """``E exp(-s tau)`` for the hitting time of ``(0, a)`` from ``(n, m)``, by exact backward solve."""
    if m < a:
        raise ValueError("need m >= a")
    s = Fraction(s)
    table: dict = {}
    for N in range(a, n + m + 1):
        for x in range(0, min(n, N - a) + 1):
            y = N - x
            if y > m or y < a:
                continue
            if (x, y) == (0, a):
                table[(x, y)] = Fraction(1)
                continue
            rn, rm = L2_extended_rates(x, y, a)
            acc = Fraction(0)
            if rn:
                acc += rn * table[(x - 1, y)]
            if rm:
                acc += rm * table[(x, y - 1)]
            table[(x, y)] = acc / (rn + rm + s)
    return table[(n, m)]


def absorption_factorization_check(n: int, m: int, s, a: int = 0) -> bool:
    """``E exp(-s tau_{n,m}) = G_s(n) G'_s(m - a)`` exactly."""
    lhs = laplace_absorption_exact(n, m, s, a)
    rhs = laplace_hit_1d(n, 0, a, s) * laplace_hit_1d(m - a, 0, a, s)
    return lhs == rhs


# ---------------------------------------------------------------------------
# r = 2 hitting probabilities, finite start


def P2(n: int, m: int) -> int:
    return n * n + m * m - n * m


def hitting_prob_finite(k: int, l: int, n: int, m: int) -> Fraction:
    """``P_{(k,l)}(T_{(n,m)} < infinity)`` for ``L^2`` with ``alpha = 0``, from the closed products."""
    if k < n or l < m:
        return Fraction(0)
    if (n, m) == (0, 0):
        return Fraction(1)
    if n == 0:
        return hitting_prob_finite(l, k, m, n)
    if m == 0:
        total = Fraction(0)
        for j in range(n, k + 1):
            term = Fraction(1)
            for a in range(n, k + 1):
                if a != j:
                    term *= Fraction(a ** 3, a ** 3 - j ** 3)
            for b in range(1, l + 1):
                term *= Fraction(b ** 3, b ** 3 + j ** 3)
            total += term
        return total
    total = Fraction(0)
    for j in range(n, k + 1):
        term = Fraction(j ** 3)
        for a in range(n, k + 1):
            if a != j:
                term *= Fraction(a ** 3, a ** 3 - j ** 3)
        for b in range(m, l + 1):
            term *= Fraction(b ** 3, b ** 3 + j ** 3)
        total += term
    return Fraction(n ** 3 + m ** 3, n ** 3 * m ** 3) * total


def hitting_prob_linear_solve(k: int, l: int, n: int, m: int) -> Fraction:
    """The same probability from the embedded jump chain, solved exactly state by state."""
    memo: dict = {}

    def h(x: int, y: int) -> Fraction:
        if (x, y) == (n, m):
            return Fraction(1)
        if x < n or y < m or x + y == 0:
            return Fraction(0)
        key = (x, y)
        if key not in memo:
            tot = x ** 3 + y ** 3
            val = Fraction(0)
            if x:
                val += Fraction(x ** 3, tot) * h(x - 1, y)
            if y:
                val += Fraction(y ** 3, tot) * h(x, y - 1)
            memo[key] = val
        return memo[key]

    for s in range(n + m, k + l + 1):
        for x in range(n, min(k, s - m) + 1):
            if s - x <= l:
                h(x, s - x)
    return h(k, l)


# ---------------------------------------------------------------------------
# entrance from infinity: the S_k series

_RHO_LOG = math.pi * math.sqrt(3)


def sin2_pi_omega(j: int, dps: int = 50):
    """``sin(pi omega j)^2`` with ``omega = e^{2 pi i / 3}``; real, ``cosh^2`` for odd ``j`` and ``-sinh^2`` for even."""
    with mpmath.workdps(dps):
        y = mpmath.pi * mpmath.sqrt(3) * j / 2
        return mpmath.cosh(y) ** 2 if j % 2 else -mpmath.sinh(y) ** 2


def sin2_pi_omega_complex(j: int, dps: int = 50):
    """The same value straight from complex arithmetic (second route)."""
    with mpmath.workdps(dps):
        w = mpmath.mpc(-0.5, mpmath.sqrt(3) / 2)
        return mpmath.sin(mpmath.pi * w * j) ** 2


def _tail_bound(p: int, J: int, log_scale: float = 0.0) -> float:
    """Bound on ``scale * sum_{j > J} 6 pi^2 j^p / |sin^2(pi omega j)|`` using ``|sin^2| >= sinh^2 y``."""
    j = J + 1
    log_ratio = p * math.log1p(1 / j) - _RHO_LOG
    if log_ratio >= 0:
        return math.inf
    log_first = (math.log(24 * math.pi ** 2) + p * math.log(j) - _RHO_LOG * j
                 - 2 * math.log1p(-math.exp(-_RHO_LOG)) + log_scale)
    log_total = log_first - math.log1p(-math.exp(log_ratio))
    return math.exp(log_total) if log_total < 700 else math.inf


@dataclass
class SeriesValue:
    value: float
    bound: float
    terms: int


def series_sum(p: int, coeff, start: int = 1, tol: float = 1e-15, jmax: int = 400, dps: int = 60,
               log_scale: float = 0.0) -> SeriesValue:
    """``sum_{j >= start} coeff(j) 6 pi^2 j^p / sin^2(pi omega j)``, assuming ``|coeff(j)| <= exp(log_scale)``.

    Stops once the geometric tail bound drops below ``tol``.
    """
    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        six_pi2 = 6 * mpmath.pi ** 2
        for j in range(start, jmax + 1):
            total += coeff(j) * six_pi2 * mpmath.mpf(j) ** p / sin2_pi_omega(j, dps)
            bound = _tail_bound(p, j, log_scale)
            if j >= start + 2 and bound < tol:
                return SeriesValue(float(total), bound, j)
    return SeriesValue(float(total), _tail_bound(p, jmax, log_scale), jmax)


def S_series(k: int, tol: float = 1e-15) -> SeriesValue:
    """``S_k = sum_{j >= 1} 6 pi^2 j^{2+3k} / sin^2(pi omega j)``."""
    return series_sum(2 + 3 * k, lambda j: 1, tol=tol)


def T_series(r: int, dps: int = 50, tol: float = 1e-30) -> float:
    """``T_r = -sum n^r q^n / (1 - q^n)^2`` with ``q = -exp(-pi sqrt 3)``."""
    with mpmath.workdps(dps):
        q = -mpmath.exp(-mpmath.pi * mpmath.sqrt(3))
        total = mpmath.mpf(0)
        n = 1
        while True:
            term = mpmath.mpf(n) ** r * q ** n / (1 - q ** n) ** 2
            total -= term
            if abs(term) < tol and n > 3:
                break
            n += 1
        return float(total)


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for a, x in p.items():
        for b, y in q.items():
            out[a + b] = out.get(a + b, 0) + x * y
    return out


def R_poly(n: int, sign: int) -> dict:
    """``R_n(sign * x)`` as a polynomial in ``u = x^3``: ``prod_{a=1}^n (a^3 + sign u)``."""
    p = {0: 1}
    for a in range(1, n + 1):
        p = _poly_mul(p, {0: a ** 3, 1: sign})
    return p


def R_value(n: int, x) -> int:
    out = 1
    for a in range(1, n + 1):
        out *= a ** 3 + x ** 3
    return out


def entrance_S_coefficients(n: int, m: int) -> dict[int, Fraction]:
    """Rational ``c_k`` with ``h_{nm} = sum_k c_k S_k``."""
    if (n, m) == (0, 0):
        raise ValueError("h_00 = 1 is not a series")
    if m == 0 or n == 0:
        N = max(n, m)
        poly = R_poly(N - 1, -1)
        pre = Fraction(1, _fact(N - 1) ** 3 * 2)
        return {i: pre * c for i, c in poly.items() if c}
    poly = _poly_mul(R_poly(n - 1, -1), R_poly(m - 1, 1))
    pre = Fraction(n ** 3 + m ** 3, _fact(n) ** 3 * _fact(m) ** 3 * 2)
    return {i + 1: pre * c for i, c in poly.items() if c}


@lru_cache(maxsize=None)
def _S_cached(k: int, tol: float) -> float:
    return S_series(k, tol).value


def hitting_prob_entrance_via_S(n: int, m: int, tol: float = 1e-15) -> float:
    if (n, m) == (0, 0):
        return 1.0
    with mpmath.workdps(60):
        total = mpmath.mpf(0)
        for k, c in entrance_S_coefficients(n, m).items():
            total += mpmath.mpf(c.numerator) / c.denominator * _S_cached(k, tol)
        return float(total)


def hitting_prob_entrance(n: int, m: int, tol: float = 1e-14, jmax: int = 600) -> SeriesValue:
    """``h_{nm} = P(T_{(n,m)} < infinity)`` for the chain entering from infinity, by direct summation."""
    if (n, m) == (0, 0):
        return SeriesValue(1.0, 0.0, 0)
    if n == 0:
        n, m = m, n
    if m == 0:
        pre = Fraction(1, _fact(n - 1) ** 3 * 2)
        p, start = 2, n

        def coeff(j):
            return R_value(n - 1, -j)

        deg = 3 * (n - 1)
    else:
        pre = Fraction(n ** 3 + m ** 3, _fact(n) ** 3 * _fact(m) ** 3 * 2)
        p, start = 5, n

        def coeff(j):
            return R_value(n - 1, -j) * R_value(m - 1, j)

        deg = 3 * (n + m - 2)
    # enough digits to absorb the size of the largest terms before cancellation
    peak = max(1, int(deg * math.log10(max(deg, 2))) + 1)
    dps = 40 + peak
    c = mpmath.mpf(pre.numerator) / pre.denominator
    res = series_sum(p + deg, lambda j: c * coeff(j) / mpmath.mpf(j) ** deg, start=start, tol=tol,
                     jmax=jmax, dps=dps, log_scale=float(mpmath.log(abs(c))) + _log_max_coeff_ratio(n, m))
    return res


def _log_max_coeff_ratio(n: int, m: int) -> float:
    # |R_{n-1}(-j) R_{m-1}(j)| <= j^{3(n+m-2)} prod (1 + a^3) for j >= 1
    return sum(math.log1p(a ** 3) for a in range(1, n)) + sum(math.log1p(a ** 3) for a in range(1, max(m, 1)))


def entrance_table(max_level: int, tol: float = 1e-14) -> dict[tuple[int, int], float]:
    """``h_{nm}`` for ``n + m <= max_level`` by direct series."""
    out = {}
    for N in range(0, max_level + 1):
        for n in range(N, -1, -1):
            m = N - n
            out[(n, m)] = out[(m, n)] if m > n else hitting_prob_entrance(n, m, tol).value
    return out


def propagate_level(h: dict, N: int) -> dict:
    """Level ``N-1`` of the hitting table from level ``N``: each jump lowers ``n + m`` by one."""
    out = {}
    for n in range(0, N):
        m = N - 1 - n
        val = 0.0
        up_n = (n + 1, m)
        if up_n in h:
            val += h[up_n] * (n + 1) ** 3 / ((n + 1) ** 3 + m ** 3)
        up_m = (n, m + 1)
        if up_m in h:
            val += h[up_m] * (m + 1) ** 3 / (n ** 3 + (m + 1) ** 3)
        out[(n, m)] = val
    return out


CLOSED_FORMS = {
    (0, 0): {"S": {}, "const": Fraction(1)},
    (1, 0): {"S": {}, "const": Fraction(1, 2)},
    (1, 1): {"S": {1: Fraction(1)}, "const": Fraction(0)},
    (2, 0): {"S": {1: Fraction(-1, 2)}, "const": Fraction(1, 2)},
    (2, 1): {"S": {1: Fraction(9, 16)}, "const": Fraction(0)},
    (3, 0): {"S": {1: Fraction(-9, 16)}, "const": Fraction(1, 2)},
    (2, 2): {"S": {1: Fraction(1, 8), 3: Fraction(-1, 8)}, "const": Fraction(0)},
}


def closed_form_value(n: int, m: int) -> float:
    key = (n, m) if (n, m) in CLOSED_FORMS else (m, n)
    form = CLOSED_FORMS[key]
    return float(form["const"]) + sum(float(c) * _S_cached(k, 1e-15) for k, c in form["S"].items())


# ---------------------------------------------------------------------------
# zeta(2) identities


def a2_star(n: int, m: int, h: float) -> float:
    """``a_2^*(n, m) = h_{nm} / (P_2(n, m) a_2(n, m))``."""
    a2 = Fraction(_fact(n + m), _fact(n) ** 3 * _fact(m) ** 3)
    return h / (P2(n, m) * float(a2)) if a2 < 1e300 else h / P2(n, m) / float(a2)


def zeta2_identities(max_level: int, table: dict | None = None) -> dict:
    """Partial sums over ``0 < n + m <= max_level`` of both sums whose limits are ``2 zeta(2)`` and ``zeta(2)``."""
    h = table if table is not None else entrance_table(max_level)
    first = second = 0.0
    for (n, m), v in h.items():
        if (n, m) == (0, 0) or n + m > max_level:
            continue
        first += v / P2(n, m)
        second += v / (P2(n, m) * binom(n + m, n))
    z2 = math.pi ** 2 / 6
    return {"first": first, "second": second, "first_target": 2 * z2, "second_target": z2,
            "first_gap": abs(first - 2 * z2), "second_gap": abs(second - z2)}


def one_over_k2(k: int, max_level: int, table: dict | None = None) -> float:
    """Truncation of ``sum_{n,m >= k} q_2((n,m),k) a_1(k) a_2^*(n,m)``, whose limit is ``1/k^2``."""
    h = table if table is not None else entrance_table(max_level)
    total = 0.0
    for (n, m), v in h.items():
        if n >= k and m >= k and n + m <= max_level:
            total += binom(n, k) * binom(m, k) / binom(n + m, n) * v / P2(n, m)
    return total


def one_over_k2_direct_term(n: int, m: int, k: int, h: float) -> float:
    """One term of the same sum from the kernel and coefficients themselves (second route)."""
    from .shapes import AlphaSpec

    q = coeffs.q_kernel(2, AlphaSpec(), (n, m), (k,))
    return float(q * Fraction(1, _fact(k) ** 2)) * a2_star(n, m, h)
