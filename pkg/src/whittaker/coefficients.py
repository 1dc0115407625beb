"""Exact series coefficients of fundamental Whittaker functions.

Everything here is exact: ``Fraction`` for the type A coefficients with
general integer parameters, plain ``int`` for the normalised (index zero)
families, which are sums of products of binomial coefficients.

The inverse factorial ``1/x!`` is taken to be ``0`` for negative integers
``x``; this makes every kernel vanish outside its natural support and is the
only convention used for out-of-range indices.
"""
from __future__ import annotations

import itertools
import threading
from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, prod
from typing import Callable, Hashable, Iterator, Sequence

from .shapes import (
    AlphaSpec,
    Cell,
    PlaneArray,
    Shape,
    alpha_from_nu,
    extension,
    fiber_cells_ok,
    interior,
    omega,
    shifted_staircase_cells,
    staircase,
    staircase_cells,
)


@lru_cache(maxsize=None)
def _fact(x: int) -> int:
    return factorial(x)


def inv_factorial(x: int) -> Fraction:
    """``1/x!`` with ``1/x! = 0`` for negative ``x``."""
    if x < 0:
        return Fraction(0)
    return Fraction(1, _fact(x))


def binom(n: int, k: int) -> int:
    if k < 0 or n < 0 or k > n:
        return 0
    return comb(n, k)


class CoeffTable:
    """Append-only memo ``index -> value`` for one coefficient family.

    Reads are lock-free; a miss computes the value outside the lock and
    publishes it under the lock, so concurrent callers always observe the
    same (deterministic) value.
    """

    def __init__(self, family: str, params: Hashable, compute: Callable):
        self.family = family
        self.params = params
        self._compute = compute
        self._memo: dict = {}
        self._lock = threading.Lock()

    def __getitem__(self, index):
        try:
            return self._memo[index]
        except KeyError:
            pass
        value = self._compute(index)
        with self._lock:
            return self._memo.setdefault(index, value)

    def __len__(self) -> int:
        return len(self._memo)

    def items(self):
        return list(self._memo.items())


_tables: dict[tuple, CoeffTable] = {}
_tables_lock = threading.RLock()


def _table(family: str, params: Hashable, compute_factory: Callable[[], Callable]) -> CoeffTable:
    key = (family, params)
    tab = _tables.get(key)
    if tab is None:
        with _tables_lock:
            tab = _tables.get(key)
            if tab is None:
                tab = CoeffTable(family, params, compute_factory())
                _tables[key] = tab
    return tab


# ---------------------------------------------------------------------------
# type A, general integer alpha


def q_kernel(r: int, alpha: AlphaSpec, n: Sequence[int], k: Sequence[int]) -> Fraction:
    """``prod_i 1/[(n_i - k_i)! (n_i - k_{i-1} + alpha_{i..r})!]`` with ``k_0 = k_r = 0``."""
    if len(n) != r or len(k) != r - 1:
        raise ValueError("expected len(n) == r and len(k) == r - 1")
    kk = (0, *k, 0)
    den = 1
    for i in range(1, r + 1):
        x = n[i - 1] - kk[i]
        y = n[i - 1] - kk[i - 1] + alpha.interval(i, r)
        if x < 0 or y < 0:
            return Fraction(0)
        den *= _fact(x) * _fact(y)
    return Fraction(1, den)


def cone_bounds(r: int, alpha: AlphaSpec) -> tuple[int, ...]:
    """Lower bounds ``omega_{i, r-i+1}`` of the index cone ``Z_+^{r,alpha}``."""
    w = omega(staircase_cells(r), alpha)
    return tuple(w[(i, r - i + 1)] for i in range(1, r + 1))


def in_cone(r: int, alpha: AlphaSpec, n: Sequence[int]) -> bool:
    return all(x >= lo for x, lo in zip(n, cone_bounds(r, alpha)))


def _a_table(r: int, alpha: AlphaSpec) -> CoeffTable:
    alpha = alpha.truncated(r)

    def factory():
        if r == 1:
            a1 = alpha[1]

            def compute(n):
                (x,) = n
                return inv_factorial(x) * inv_factorial(x + a1)

            return compute

        lower = _a_table(r - 1, alpha)

        def compute(n):
            total = Fraction(0)
            for k in itertools.product(*(range(x + 1) for x in n[:-1])):
                q = q_kernel(r, alpha, n, k)
                if q:
                    total += q * lower[k]
            return total

        return compute

    return _table("A", (r, alpha.alpha), factory)


def a_coeff(r: int, alpha: AlphaSpec, n: Sequence[int]) -> Fraction:
    """``a_r(n)`` by the recursion over ``r``; zero outside the cone."""
    n = tuple(int(x) for x in n)
    if len(n) != r:
        raise ValueError(f"index {n} does not have length {r}")
    if any(x < 0 for x in n) or not in_cone(r, alpha, n):
        return Fraction(0)
    return _a_table(r, alpha)[n]


def a_zero_closed_form(r: int, alpha: AlphaSpec) -> Fraction:
    """``prod_{1 <= i <= j <= r} 1/alpha_{ij}!``."""
    out = Fraction(1)
    for i in range(1, r + 1):
        for j in range(i, r + 1):
            out *= inv_factorial(alpha.interval(i, j))
    return out


def a2_bump(alpha: AlphaSpec, n: int, m: int) -> Fraction:
    """Closed form of ``a_2(n, m)`` as a ratio of factorials."""
    a, b = alpha[1], alpha[2]
    top = n + m + a + b
    if top < 0:
        return Fraction(0)
    return _fact(top) * (
        inv_factorial(n) * inv_factorial(n + a) * inv_factorial(n + a + b)
        * inv_factorial(m) * inv_factorial(m + b) * inv_factorial(m + a + b)
    )


def rec_polynomial(alpha: AlphaSpec, n: Sequence[int]) -> int:
    """``P_r(n) = sum n_i^2 - sum n_i n_{i+1} + sum alpha_i n_i``."""
    r = len(n)
    return (
        sum(x * x for x in n)
        - sum(n[i] * n[i + 1] for i in range(r - 1))
        + sum(alpha[i + 1] * n[i] for i in range(r))
    )


def rec_residual(r: int, alpha: AlphaSpec, n: Sequence[int]) -> Fraction:
    """``P_r(n) a_r(n) - sum_i a_r(n - e_i)``; zero when the difference equation holds."""
    n = tuple(n)
    lhs = rec_polynomial(alpha, n) * a_coeff(r, alpha, n)
    rhs = Fraction(0)
    for i in range(r):
        m = list(n)
        m[i] -= 1
        rhs += a_coeff(r, alpha, m)
    return lhs - rhs


def w_weight(r: int, alpha: AlphaSpec, pi: PlaneArray) -> Fraction:
    """Staircase weight ``prod 1/[(pi_ij - pi_{i,j-1})! (pi_ij - pi_{i-1,j} + beta_ij)!]``."""
    den = 1
    for (i, j) in staircase_cells(r):
        x = pi[(i, j)] - pi[(i, j - 1)]
        y = pi[(i, j)] - pi[(i - 1, j)] + alpha.beta(i, j)
        if x < 0 or y < 0:
            return Fraction(0)
        den *= _fact(x) * _fact(y)
    return Fraction(1, den)


def staircase_boundary(r: int, pi) -> tuple[int, ...]:
    return tuple(pi[(i, r - i + 1)] for i in range(1, r + 1))


def staircase_fiber(r: int, alpha: AlphaSpec, n: Sequence[int]) -> Iterator[PlaneArray]:
    """``Pi^{r,alpha}_n``: arrays on the staircase with boundary ``n``."""
    lam, mu = staircase(r), Shape(range(r - 1, 0, -1))
    sigma = {(i, r - i + 1): int(n[i - 1]) for i in range(1, r + 1)}
    yield from fiber(lam, mu, sigma, alpha)


def a_coeff_by_fiber(r: int, alpha: AlphaSpec, n: Sequence[int]) -> Fraction:
    """``a_r(n)`` as the sum of staircase weights over the fiber."""
    if not in_cone(r, alpha, n):
        return Fraction(0)
    return sum((w_weight(r, alpha, pi) for pi in staircase_fiber(r, alpha, n)), Fraction(0))


# ---------------------------------------------------------------------------
# index zero, normalised


def _A_table(r: int) -> CoeffTable:
    def factory():
        if r == 1:
            return lambda n: 1
        lower = _A_table(r - 1)

        def compute(n):
            total = 0
            for k in itertools.product(*(range(min(n[i], n[i + 1]) + 1) for i in range(r - 1))):
                c = 1
                for i in range(r - 1):
                    c *= comb(n[i], k[i]) * comb(n[i + 1], k[i])
                total += c * lower[k]
            return total

        return compute

    return _table("A-normalized", r, factory)


def a_normalized(r: int, n: Sequence[int]) -> int:
    """``A_r(n) = (prod n_i!^2) a_r(n)`` at ``alpha = 0``, as an integer.

    Uses the same recursion over ``r`` with the factorials cleared, which
    leaves a sum of binomial products.
    """
    n = tuple(int(x) for x in n)
    if len(n) != r:
        raise ValueError(f"index {n} does not have length {r}")
    if any(x < 0 for x in n):
        return 0
    return _A_table(r)[n]


def W_r_weight(r: int, pi) -> int:
    """``prod_{(i,j) in delta_r} C(pi_{i,j+1}, pi_ij) C(pi_{i+1,j}, pi_ij)``."""
    out = 1
    for (i, j) in staircase_cells(r - 1) if r > 1 else []:
        out *= binom(pi[(i, j + 1)], pi[(i, j)]) * binom(pi[(i + 1, j)], pi[(i, j)])
    return out


def apery_binomial(n: int) -> int:
    return sum(comb(n, k) ** 2 * comb(n + k, k) ** 2 for k in range(n + 1))


def apery_diagonal(n: int) -> int:
    """``A_3(n, n, n)``."""
    return a_normalized(3, (n, n, n))


def apery_recurrence_holds(n: int, seq: Sequence[int]) -> bool:
    """``n^3 a_n = (34n^3 - 51n^2 + 27n - 5) a_{n-1} - (n-1)^3 a_{n-2}`` for ``n >= 2``."""
    return n ** 3 * seq[n] == (34 * n ** 3 - 51 * n ** 2 + 27 * n - 5) * seq[n - 1] - (n - 1) ** 3 * seq[n - 2]


def apery_check(max_n: int) -> dict:
    seq = [apery_diagonal(n) for n in range(max_n + 1)]
    failures = [n for n in range(2, max_n + 1) if not apery_recurrence_holds(n, seq)]
    return {"values": seq, "failures": failures, "ok": not failures and seq[:2] == [1, 5][: len(seq)]}


# ---------------------------------------------------------------------------
# general shapes


def fiber(
    lam: Shape, mu: Shape, sigma, alpha: AlphaSpec = AlphaSpec(), limit: int | None = None
) -> Iterator[PlaneArray]:
    """All ``pi`` in ``Pi^lam`` restricting to ``sigma`` on ``lam/mu``.

    Interior cells are filled in reverse row-major order, so every upper
    bound ``pi_{i,j+1} ^ (pi_{i+1,j} + beta_{i+1,j})`` is already known and
    the fiber becomes a product of nested ranges.  Lower-bound constraints
    are then implied by the upper bounds of the neighbours (plus the
    ``omega`` floor when some ``alpha_i < 0``).
    """
    fiber_cells_ok(lam, mu)
    cells = lam.cells()
    inner = [c for c in reversed(cells) if c in mu]
    vals: dict[Cell, int] = {}
    for c in cells:
        if c not in mu:
            vals[c] = int(sigma[c])
    floor = omega(cells, alpha) if not alpha.nonnegative() else None
    count = [0]

    def rec(k: int):
        if k == len(inner):
            count[0] += 1
            if limit is not None and count[0] > limit:
                raise OverflowError(f"fiber has more than {limit} elements")
            yield PlaneArray(cells, [vals[c] for c in cells])
            return
        i, j = inner[k]
        hi = min(vals[(i, j + 1)], vals[(i + 1, j)] + alpha.beta(i + 1, j))
        lo = floor[(i, j)] if floor else 0
        for v in range(lo, hi + 1):
            vals[(i, j)] = v
            yield from rec(k + 1)
        vals.pop((i, j), None)

    if not _sigma_valid(lam, mu, vals, alpha):
        return
    yield from rec(0)


def _sigma_valid(lam: Shape, mu: Shape, vals, alpha: AlphaSpec) -> bool:
    floor = omega(lam.cells(), alpha) if not alpha.nonnegative() else None
    for (i, j) in lam.cells():
        if (i, j) in mu:
            continue
        v = vals[(i, j)]
        left = vals.get((i, j - 1), 0) if (i, j - 1) not in mu else 0
        up = vals.get((i - 1, j), 0) if (i - 1, j) not in mu else 0
        if v < 0 or v < left or v < up - alpha.beta(i, j):
            return False
        if floor and v < floor[(i, j)]:
            return False
    return True


def W_general(lam: Shape, mu: Shape, alpha: AlphaSpec, pi, literal: bool = False) -> Fraction:
    """``W_{lam,mu}(pi)``: one binomial per edge ``u -> v`` with ``u`` in ``mu``, times factorial ratios on ``mu``.

    ``literal=True`` also keeps the binomials of extension cells against
    neighbours in ``lam/mu``; that variant breaks the intertwining as soon as
    ``mu`` is not a staircase and is kept only as a negative control.
    """
    out = Fraction(1)
    for (i, j) in extension(lam, mu):
        b = alpha.beta(i, j)
        if literal or (i, j - 1) in mu or (i, j) in mu:
            out *= binom(pi[(i, j)], pi[(i, j - 1)])
        if literal or (i - 1, j) in mu or (i, j) in mu:
            out *= binom(pi[(i, j)] + b, pi[(i - 1, j)])
        if not out:
            return out
    for (i, j) in mu.cells():
        b = alpha.beta(i, j)
        out *= Fraction(_fact(pi[(i, j)]), _fact(pi[(i, j)] + b))
    return out


def coeff_general_shape(lam: Shape, mu: Shape, sigma, alpha: AlphaSpec = AlphaSpec()) -> Fraction:
    """``A_{lam,mu}(sigma) = sum of W_{lam,mu}`` over the fiber of ``sigma``."""
    return sum((W_general(lam, mu, alpha, pi) for pi in fiber(lam, mu, sigma, alpha)), Fraction(0))


def boundary_cells(lam: Shape, mu: Shape) -> list[Cell]:
    return [c for c in lam.cells() if c not in mu]


def sigma_from_tuple(lam: Shape, mu: Shape, values: Sequence[int]) -> dict[Cell, int]:
    cells = boundary_cells(lam, mu)
    if len(values) != len(cells):
        raise ValueError(f"expected {len(cells)} boundary values for {lam}/{mu}, got {len(values)}")
    return dict(zip(cells, (int(v) for v in values)))


def staircase_sigma(r: int, n: Sequence[int]) -> dict[Cell, int]:
    """Boundary values ``n_i`` placed at ``(i, r - i + 1)``."""
    return {(i, r - i + 1): int(n[i - 1]) for i in range(1, r + 1)}


# ---------------------------------------------------------------------------
# type B


def _shifted_fiber(r: int, n: Sequence[int]) -> Iterator[dict[Cell, int]]:
    cells = shifted_staircase_cells(r)
    cellset = set(cells)
    vals = {(i, 2 * r - i): int(n[i - 1]) for i in range(1, r + 1)}
    free = [c for c in reversed(cells) if c not in vals]

    def rec(k):
        if k == len(free):
            yield dict(vals)
            return
        i, j = free[k]
        hi = vals[(i, j + 1)]
        if (i + 1, j) in cellset:
            hi = min(hi, vals[(i + 1, j)])
        for v in range(hi + 1):
            vals[(i, j)] = v
            yield from rec(k + 1)
        vals.pop((i, j), None)

    yield from rec(0)


def shifted_fiber(r: int, n: Sequence[int]) -> list[PlaneArray]:
    cells = shifted_staircase_cells(r)
    return [PlaneArray(cells, [d[c] for c in cells]) for d in _shifted_fiber(r, n)]


def W_B_weight(r: int, pi) -> int:
    """``prod C(pi_{i+1,i+1}, pi_ii) prod C(pi_ij, pi_{i,j-1}) C(pi_ij, pi_{i-1,j})``; absent cells read 0."""
    out = 1
    for i in range(1, r):
        out *= binom(pi[(i + 1, i + 1)], pi[(i, i)])
    for (i, j) in shifted_staircase_cells(r):
        out *= binom(pi[(i, j)], pi[(i, j - 1)]) * binom(pi[(i, j)], pi[(i - 1, j)])
    return out


def b_coeff(r: int, n: Sequence[int]) -> int:
    """``B_r(n)`` as a sum over reverse plane partitions of the shifted staircase."""
    n = tuple(int(x) for x in n)
    if any(x < 0 for x in n):
        return 0
    return _table("B", r, lambda: lambda idx: sum(W_B_weight(r, pi) for pi in shifted_fiber(r, idx)))[n]


def b_coeff_recursive(r: int, n: Sequence[int]) -> Fraction:
    """Forward solution of ``H^{B_r} B = 0`` with ``B(0) = 1``."""
    n = tuple(int(x) for x in n)
    memo: dict[tuple, Fraction] = {}
    for idx in sorted(itertools.product(*(range(x + 1) for x in n)), key=sum):
        if not any(idx):
            memo[idx] = Fraction(1)
            continue
        rates = [Fraction(x * x) for x in idx]
        rates[-1] /= 2
        diag = sum(rates) - sum(idx[i] * idx[i + 1] for i in range(r - 1))
        acc = Fraction(0)
        for i in range(r):
            if idx[i]:
                prev = list(idx)
                prev[i] -= 1
                acc += rates[i] * memo[tuple(prev)]
        memo[idx] = acc / diag
    return memo[n]


def apery_zeta2_binomial(n: int) -> int:
    return sum(comb(n, k) ** 2 * comb(n + k, k) for k in range(n + 1))


def apery_zeta2_recurrence_holds(n: int, seq: Sequence[int]) -> bool:
    """``n^2 b_n = (11n^2 - 11n + 3) b_{n-1} + (n-1)^2 b_{n-2}``."""
    return n * n * seq[n] == (11 * n * n - 11 * n + 3) * seq[n - 1] + (n - 1) ** 2 * seq[n - 2]


# ---------------------------------------------------------------------------
# type BC_2 and G_2


def bc2_coeff(n: int, m: int) -> int:
    """Delannoy numbers ``sum_k C(n,k) C(m,k) 2^k``."""
    return sum(comb(n, k) * comb(m, k) * 2 ** k for k in range(min(n, m) + 1))


def g2_coeff(n: int, m: int) -> int:
    """Binomial double sum for ``G_2(n, m)``."""
    total = 0
    for i in range(min(n, m) + 1):
        for j in range(min(n, m) + 1):
            if i + j > n + m:
                continue
            total += (
                comb(n, i) * comb(n, j) * comb(m, i) * comb(m, j)
                * binom(n + m - i - j, m) * comb(i + j, j)
            )
    return total


def g2_recursive(n: int, m: int) -> Fraction:
    """Forward solution of ``(n^2 D_n + 3 m^2 D_m + 3nm) G = 0`` with ``G(0,0) = 1``."""
    memo = {}
    for a in range(n + 1):
        for b in range(m + 1):
            if a == b == 0:
                memo[a, b] = Fraction(1)
                continue
            acc = Fraction(0)
            if a:
                acc += a * a * memo[a - 1, b]
            if b:
                acc += 3 * b * b * memo[a, b - 1]
            memo[a, b] = acc / (a * a + 3 * b * b - 3 * a * b)
    return memo[n, m]


def g2_multinomial(n: int, i: int, j: int) -> int:
    if i < 0 or j < 0 or i + j > n:
        return 0
    return _fact(n) // (_fact(i) * _fact(j) * _fact(n - i - j))


def g2_weight(n, m, i, j, k, l) -> int:
    return (
        g2_multinomial(n, i, j) * binom(n, l) * binom(m, l) * binom(l, i) * binom(l, j)
        * binom(i, k) * binom(j, k)
    )


def g2_fiber(n: int, m: int) -> Iterator[tuple[int, int, int, int, int, int]]:
    for l in range(min(n, m) + 1):
        for i in range(l + 1):
            for j in range(min(l, n - i) + 1):
                for k in range(min(i, j) + 1):
                    yield (n, m, i, j, k, l)


def g2_by_fiber(n: int, m: int) -> int:
    return sum(g2_weight(*p) for p in g2_fiber(n, m))


class LaurentPoly:
    """Finitely supported ``exponent tuple -> int`` map with exact products."""

    __slots__ = ("terms", "nvars")

    def __init__(self, terms: dict[tuple[int, ...], int], nvars: int):
        self.terms = {e: c for e, c in terms.items() if c}
        self.nvars = nvars

    @classmethod
    def one(cls, nvars: int) -> "LaurentPoly":
        return cls({(0,) * nvars: 1}, nvars)

    @classmethod
    def monomial(cls, exps: Sequence[int], coeff: int = 1) -> "LaurentPoly":
        return cls({tuple(exps): coeff}, len(exps))

    def __add__(self, other: "LaurentPoly") -> "LaurentPoly":
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return LaurentPoly(out, self.nvars)

    def __mul__(self, other: "LaurentPoly") -> "LaurentPoly":
        out: dict = defaultdict(int)
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                out[tuple(a + b for a, b in zip(e1, e2))] += c1 * c2
        return LaurentPoly(out, self.nvars)

    def __pow__(self, k: int) -> "LaurentPoly":
        out = LaurentPoly.one(self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def constant_term(self) -> int:
        return self.terms.get((0,) * self.nvars, 0)


def _g2_laurent():
    # variables (x, y, z, w)
    def mono(x=0, y=0, z=0, w=0):
        return LaurentPoly.monomial((x, y, z, w))

    first = mono() + mono(x=1) + mono(y=1) + mono(x=1, z=1)
    second = mono(x=1, w=1) + mono(y=1, z=1) + mono(y=1, w=1)
    P = first * second * mono(x=-1, y=-1, z=-1)
    Q = (mono() + mono(y=1) + mono(z=1) + mono(w=1)) * mono(w=-1)
    return P, Q


def g2_constant_term(n: int, m: int) -> int:
    """Constant term of ``P^n Q^m`` for the two Laurent polynomials attached to ``G_2``."""
    P, Q = _g2_laurent()
    return (P ** n * Q ** m).constant_term()


# ---------------------------------------------------------------------------
# shifted coordinates and permutation invariance


def shift_partial_sums(nu: Sequence[Fraction], r: int) -> list[Fraction]:
    return [sum(Fraction(x) for x in nu[:i]) for i in range(1, r + 1)]


def tilde_a(r: int, nu: Sequence, n_prime: Sequence) -> Fraction:
    """``a_{r,alpha}(n)`` read in shifted coordinates ``n'_i = n_i + nu_1 + ... + nu_i``."""
    nu = [Fraction(x) for x in nu]
    if len(nu) != r + 1 or sum(nu) != 0:
        raise ValueError("nu must have r+1 entries summing to zero")
    alpha = alpha_from_nu(nu)
    n = [Fraction(x) - s for x, s in zip(n_prime, shift_partial_sums(nu, r))]
    if any(x.denominator != 1 for x in n):
        raise ValueError(f"n'={list(n_prime)} is not on the lattice of nu={nu}")
    n = [int(x) for x in n]
    if any(x < 0 for x in n):
        return Fraction(0)
    return a_coeff(r, alpha, n)


def shifted_cone_base(nu: Sequence) -> list[Fraction]:
    """``(nu~_1, nu~_1 + nu~_2, ...)`` for the decreasing rearrangement ``nu~``."""
    srt = sorted((Fraction(x) for x in nu), reverse=True)
    return [sum(srt[:i]) for i in range(1, len(nu))]


def permutation_invariance_check(r: int, nu: Sequence, n_prime: Sequence, permutation: Sequence[int]) -> bool:
    base = tilde_a(r, nu, n_prime)
    permuted = [nu[p] for p in permutation]
    return tilde_a(r, permuted, n_prime) == base


def tilde_a2_closed_form(nu: Sequence, n_prime: Fraction, m_prime: Fraction) -> Fraction:
    """``(n'+m')! prod_i 1/[(n' - nu_i)! (m' + nu_i)!]`` for integer-valued arguments."""
    args = [Fraction(n_prime) + Fraction(m_prime)]
    out = Fraction(1)
    for x in nu:
        for y in (Fraction(n_prime) - x, Fraction(m_prime) + x):
            if y.denominator != 1:
                raise ValueError("non-integer factorial argument")
            out *= inv_factorial(int(y))
    s = args[0]
    if s.denominator != 1:
        raise ValueError("non-integer factorial argument")
    if s < 0:
        return Fraction(0)
    return out * _fact(int(s))


# ---------------------------------------------------------------------------
# tabulation


def coefficient(family: str, r: int = 1, alpha: AlphaSpec = AlphaSpec(), n: Sequence[int] = (),
                lam: Shape | None = None, mu: Shape | None = None):
    """Dispatch on a family tag: ``a``, ``A``, ``B``, ``BC2``, ``G2`` or ``shape``."""
    fam = family
    if fam == "a":
        return a_coeff(r, alpha, n)
    if fam == "A":
        if not alpha.is_zero():
            raise ValueError("family A is the alpha = 0 normalisation; use family a")
        return a_normalized(r, n)
    if fam == "B":
        return b_coeff(r, n)
    if fam == "BC2":
        return bc2_coeff(*n)
    if fam == "G2":
        return g2_coeff(*n)
    if fam == "shape":
        if lam is None or mu is None:
            raise ValueError("family shape needs lambda and mu")
        return coeff_general_shape(lam, mu, sigma_from_tuple(lam, mu, n), alpha)
    raise ValueError(f"unknown family {family!r}")


def index_dimension(family: str, r: int, lam: Shape | None = None, mu: Shape | None = None) -> int:
    if family in ("BC2", "G2"):
        return 2
    if family == "shape":
        return len(boundary_cells(lam, mu))
    return r


def interior_check(lam: Shape, mu: Shape) -> bool:
    return interior(lam).contains(mu)


def prod_fact(xs) -> int:
    return prod(_fact(x) for x in xs)
