"""Exact sparse difference operators on finite, downward-closed state spaces.

An operator is stored row-wise as ``state -> {state: coefficient}`` with the
diagonal kept in the same row.  States are plain tuples; for array-valued
chains the tuple lists the entries in the row-major order of ``space.cells``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from . import coefficients as coeffs
from .shapes import (
    EMPTY,
    INF,
    AlphaSpec,
    Cell,
    NestedPartitions,
    PlaneArray,
    Shape,
    enumerate_states,
    fiber_cells_ok,
    omega,
    staircase,
    staircase_cells,
    validate_state,
)

State = Hashable
Row = dict


@dataclass
class StateSpace:
    states: list
    cells: tuple[Cell, ...] | None = None
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {s: i for i, s in enumerate(self.states)}
        if len(self._index) != len(self.states):
            raise ValueError("duplicate states")

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, s) -> bool:
        return s in self._index

    def __iter__(self):
        return iter(self.states)

    def index(self, s) -> int:
        return self._index[s]

    def as_array(self, s) -> PlaneArray:
        if self.cells is None:
            raise TypeError("state space is not array-valued")
        return PlaneArray(self.cells, s)

    def value(self, s, cell: Cell) -> int:
        """Entry of an array state at ``cell`` (0 outside the cell set)."""
        pos = self._cellpos.get(cell)
        return 0 if pos is None else s[pos]

    @property
    def _cellpos(self) -> dict:
        cp = self.__dict__.get("_cp")
        if cp is None:
            cp = {c: k for k, c in enumerate(self.cells or ())}
            self.__dict__["_cp"] = cp
        return cp


class SparseOperator:
    """Row-sparse exact operator; also used for intertwining kernels."""

    def __init__(self, rows: Mapping[State, Mapping[State, Fraction]], space: StateSpace | None = None,
                 markov: bool = False, name: str = ""):
        self.rows: dict = {s: {t: Fraction(v) for t, v in row.items() if v} for s, row in rows.items()}
        self.space = space if space is not None else StateSpace(list(self.rows))
        self.markov = markov
        self.name = name

    @classmethod
    def from_rule(cls, space: StateSpace, rule: Callable[[State], Mapping[State, Fraction]],
                  markov: bool = False, closed: bool = True, name: str = "") -> "SparseOperator":
        rows = {}
        for s in space.states:
            row = dict(rule(s))
            if closed:
                for t, v in row.items():
                    if v and t not in space:
                        raise ValueError(f"{name or 'operator'}: move {s} -> {t} leaves the state space")
            rows[s] = row
        return cls(rows, space, markov, name)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, s) -> dict:
        return self.rows.get(s, {})

    def entry(self, s, t) -> Fraction:
        return self.rows.get(s, {}).get(t, Fraction(0))

    def diag(self, s) -> Fraction:
        return self.entry(s, s)

    def offdiag(self, s) -> dict:
        return {t: v for t, v in self.rows.get(s, {}).items() if t != s}

    def apply(self, f: Callable[[State], Fraction] | Mapping) -> dict:
        """``(Af)(s) = sum_t A(s, t) f(t)`` for every row ``s``."""
        get = f.__getitem__ if isinstance(f, Mapping) else f
        return {s: sum((v * get(t) for t, v in row.items()), Fraction(0)) for s, row in self.rows.items()}

    def compose(self, other: "SparseOperator") -> "SparseOperator":
        """``(self o other)(s, u) = sum_t self(s, t) other(t, u)``."""
        out = {}
        for s, row in self.rows.items():
            acc: dict = {}
            for t, v in row.items():
                for u, w in other.rows.get(t, {}).items():
                    acc[u] = acc.get(u, 0) + v * w
            out[s] = acc
        return SparseOperator(out, self.space)

    def restrict_rows(self, keep: Iterable[State]) -> "SparseOperator":
        keep = list(keep)
        return SparseOperator({s: self.rows.get(s, {}) for s in keep}, StateSpace(keep))

    def row_sum(self, s) -> Fraction:
        return sum(self.rows.get(s, {}).values(), Fraction(0))

    def check_markov(self):
        """``(ok, witness)``: off-diagonal rates non-negative and row sums exactly zero."""
        for s, row in self.rows.items():
            for t, v in row.items():
                if t != s and v < 0:
                    return False, (s, t, v)
            if sum(row.values(), Fraction(0)) != 0:
                return False, (s, "row sum", sum(row.values(), Fraction(0)))
        return True, None

    def equals(self, other: "SparseOperator", rows: Iterable[State] | None = None):
        """``(ok, witness)`` for exact equality on the given rows (default: all rows of both)."""
        keys = list(rows) if rows is not None else list(dict.fromkeys([*self.rows, *other.rows]))
        for s in keys:
            a, b = self.rows.get(s, {}), other.rows.get(s, {})
            for t in set(a) | set(b):
                if a.get(t, 0) != b.get(t, 0):
                    return False, (s, t, a.get(t, 0), b.get(t, 0))
        return True, None

    def to_csr(self, order: Sequence[State] | None = None) -> sparse.csr_matrix:
        order = list(order) if order is not None else self.space.states
        idx = {s: i for i, s in enumerate(order)}
        r, c, v = [], [], []
        for s, row in self.rows.items():
            if s not in idx:
                continue
            for t, val in row.items():
                if t in idx:
                    r.append(idx[s])
                    c.append(idx[t])
                    v.append(float(val))
        n = len(order)
        return sparse.csr_matrix((v, (r, c)), shape=(n, n))

    def to_dense(self, order: Sequence[State] | None = None) -> np.ndarray:
        return self.to_csr(order).toarray()

    def triplets(self) -> list[tuple]:
        return [(s, t, v) for s, row in self.rows.items() for t, v in row.items()]

    def to_json(self) -> str:
        def enc(s):
            return list(s) if isinstance(s, tuple) else s

        data = {
            "name": self.name,
            "markov": self.markov,
            "cells": [list(c) for c in self.space.cells] if self.space.cells else None,
            "states": [enc(s) for s in self.space.states],
            "entries": [[enc(s), enc(t), f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)]
                        for s, t, v in self.triplets()],
        }
        return json.dumps(data, indent=1)


# ---------------------------------------------------------------------------
# array-valued chains


def _roof_map(cells: Sequence[Cell], roof) -> dict[Cell, int]:
    if isinstance(roof, Mapping):
        return {c: int(roof[c]) for c in cells}
    return {c: int(roof) for c in cells}


def shape_space(cells: Sequence[Cell], alpha: AlphaSpec, roof) -> StateSpace:
    """All valid fillings of ``cells`` bounded by ``roof`` (int or per-cell map)."""
    cells = tuple(sorted(cells))
    states = [arr.values for arr in enumerate_states(cells, alpha, _roof_map(cells, roof))]
    return StateSpace(states, cells)


def b_rate(val: Callable[[Cell], int], cell: Cell, alpha: AlphaSpec) -> int:
    """``(p_ij - p_{i,j-1}) (p_ij - p_{i-1,j} + beta_ij)``."""
    i, j = cell
    v = val(cell)
    return (v - val((i, j - 1))) * (v - val((i - 1, j)) + alpha.beta(i, j))


def _decrement(s: tuple, pos: int) -> tuple:
    return s[:pos] + (s[pos] - 1,) + s[pos + 1:]


def generator_rule(space: StateSpace, alpha: AlphaSpec) -> Callable:
    cells = space.cells

    def rule(s):
        def val(c):
            return space.value(s, c)

        row = {}
        out = Fraction(0)
        for pos, c in enumerate(cells):
            rate = b_rate(val, c, alpha)
            if rate:
                if rate < 0:
                    raise ValueError(f"negative rate {rate} at cell {c} in state {s}")
                row[_decrement(s, pos)] = Fraction(rate)
                out += rate
        row[s] = -out
        return row

    return rule


def check_fiber_pair(lam: Shape, mu: Shape) -> None:
    fiber_cells_ok(lam, mu)


def build_G(lam: Shape, mu: Shape = EMPTY, alpha: AlphaSpec = AlphaSpec(), roof=3):
    """Generator ``sum_{v in lam/mu} b_v(sigma) D_{sigma_v}`` on states bounded by ``roof``.

    Entries outside ``lam/mu`` read as ``0`` in both the constraints and the
    rates.  Returns ``(space, operator)``.
    """
    if mu.size:
        check_fiber_pair(lam, mu)
    cells = [c for c in lam.cells() if c not in mu]
    if isinstance(roof, PlaneArray):
        if not validate_state(roof, alpha):
            raise ValueError(f"roof {roof} is not a valid state")
        roof = {c: roof[c] for c in cells}
    space = shape_space(cells, alpha, roof)
    op = SparseOperator.from_rule(space, generator_rule(space, alpha), markov=True, name=f"G^{lam},{mu}")
    return space, op


def external_corners(mu: Shape) -> list[Cell]:
    return [(i, j) for (i, j) in mu.cells() if (i, j + 1) not in mu and (i + 1, j) not in mu]


def potential_V(lam: Shape, mu: Shape, alpha: AlphaSpec, val: Callable[[Cell], int]) -> int:
    """``sum_{C(mu)} s_{i+1,j} s_{i,j+1} + sum_i beta_{i+1,mu_i} s_{i,mu_i+1}``."""
    v = sum(val((i + 1, j)) * val((i, j + 1)) for (i, j) in external_corners(mu))
    for i in range(1, len(mu) + 1):
        v += alpha.beta(i + 1, mu.part(i)) * val((i, mu.part(i) + 1))
    return v


def build_H(lam: Shape, mu: Shape, alpha: AlphaSpec = AlphaSpec(), roof=3, potential_shift=None):
    """``G^{lam,mu} + V_{lam,mu}``.  ``potential_shift(state)`` perturbs ``V`` (negative controls)."""
    space, G = build_G(lam, mu, alpha, roof)
    rows = {}
    for s in space.states:
        row = dict(G[s])
        v = potential_V(lam, mu, alpha, lambda c: space.value(s, c))
        if potential_shift is not None:
            v += potential_shift(s)
        row[s] = row.get(s, 0) + v
        rows[s] = row
    return space, SparseOperator(rows, space, markov=False, name=f"H^{lam},{mu}")


# ---------------------------------------------------------------------------
# operators on Z_+^r


def box_space(roof: Sequence[int], lower: Sequence[int] | None = None) -> StateSpace:
    lower = lower or [0] * len(roof)
    return StateSpace([tuple(p) for p in itertools.product(*(range(lo, hi + 1) for lo, hi in zip(lower, roof)))])


def build_h_r(r: int, alpha: AlphaSpec, roof: Sequence[int]) -> SparseOperator:
    """``sum_i L_{n_i} - P_r(n)`` with ``L_k f(k) = f(k-1)`` (``0`` at ``k = 0``) on ``n <= roof``."""
    space = box_space(roof)

    def rule(n):
        row = {n: Fraction(-coeffs.rec_polynomial(alpha, n))}
        for i in range(r):
            if n[i] > 0:
                m = list(n)
                m[i] -= 1
                row[tuple(m)] = row.get(tuple(m), 0) + 1
        return row

    return SparseOperator.from_rule(space, rule, name=f"h^{r}")


def doob_transform(H: SparseOperator, h: Callable[[State], Fraction] | Mapping,
                   states: Iterable[State] | None = None) -> SparseOperator:
    """``h^{-1} o H o h`` on the rows where ``h > 0``; requires ``Hh = 0`` there.

    Raises ``ValueError`` naming the first row where ``Hh != 0`` or where the
    result is not a Markov generator.
    """
    get = h.__getitem__ if isinstance(h, Mapping) else h
    keep = [s for s in (states if states is not None else H.rows) if get(s) > 0]
    rows = {}
    for s in keep:
        hs = Fraction(get(s))
        row = {}
        total = Fraction(0)
        for t, v in H[s].items():
            ht = Fraction(get(t))
            total += v * ht
            if ht:
                row[t] = v * ht / hs
        if total != 0:
            raise ValueError(f"Hh != 0 at {s}: {total}")
        rows[s] = row
    L = SparseOperator(rows, StateSpace(keep), markov=True, name=f"Doob({H.name})")
    ok, wit = L.check_markov()
    if not ok:
        raise ValueError(f"Doob transform is not a Markov generator: {wit}")
    return L


def build_L_r(r: int, alpha: AlphaSpec, roof: Sequence[int]) -> SparseOperator:
    """Doob transform of ``h^r`` by ``a_r``."""
    H = build_h_r(r, alpha, roof)
    return doob_transform(H, lambda n: coeffs.a_coeff(r, alpha, n))


def L2_rates(alpha: AlphaSpec, n: int, m: int) -> tuple[Fraction, Fraction]:
    """Closed-form ``r = 2`` jump rates from Bump's formula."""
    a, b = alpha[1], alpha[2]
    den = n + m + a + b
    return Fraction(n * (n + a) * (n + a + b), den), Fraction(m * (m + b) * (m + a + b), den)


def build_M(r: int, roof: int) -> SparseOperator:
    """``sum_{i<r} n_i (n_i - n_{i+1}) D_{n_i} + n_r^2 D_{n_r}`` on ``roof >= n_1 >= ... >= n_r >= 0``."""
    states = [tuple(sorted(p, reverse=True)) for p in itertools.combinations_with_replacement(range(roof + 1), r)]
    space = StateSpace(sorted(set(states)))

    def rule(n):
        row = {}
        out = 0
        for i in range(r):
            rate = n[i] * (n[i] - n[i + 1]) if i < r - 1 else n[i] ** 2
            if rate:
                m = list(n)
                m[i] -= 1
                row[tuple(m)] = Fraction(rate)
                out += rate
        row[n] = Fraction(-out)
        return row

    return SparseOperator.from_rule(space, rule, markov=True, name=f"M^{r}")


# ---------------------------------------------------------------------------
# delta-Bose gas


def ranks(x: Sequence[int]) -> list[int]:
    """``r_i = #{k: x_k <= x_(i)}`` for the sorted configuration ``x``."""
    return [sum(1 for y in x if y <= xi) for xi in x]


def bose_phi(x: Sequence[int]) -> int:
    return int(np.prod([i ** xi for i, xi in enumerate(sorted(x), start=1)], dtype=object))


def bose_hamiltonian_apply(f: Callable[[tuple], Fraction], x: Sequence[int]) -> Fraction:
    """``(Hf)(x) = sum_i [f(x + e_i) - f(x)] - #{i < j: x_i = x_j} f(x)`` on symmetric ``f``."""
    x = tuple(sorted(x))
    fx = Fraction(f(x))
    out = Fraction(0)
    for i in range(len(x)):
        y = list(x)
        y[i] += 1
        out += Fraction(f(tuple(sorted(y)))) - fx
    pairs = sum(1 for i in range(len(x)) for j in range(i + 1, len(x)) if x[i] == x[j])
    return out - pairs * fx


def bose_eigen_check(N: int, max_pos: int):
    """``H phi = N(N-1)/2 phi`` on all sorted configurations with entries ``<= max_pos``."""
    lam = Fraction(N * (N - 1), 2)
    for x in itertools.combinations_with_replacement(range(max_pos + 1), N):
        if bose_hamiltonian_apply(bose_phi, x) != lam * bose_phi(x):
            return False, x
    return True, None


def bose_configs(N: int, roof: int) -> list[tuple]:
    return list(itertools.combinations_with_replacement(range(roof + 1), N))


def R_rates(x: Sequence[int]) -> dict[tuple, int]:
    """Aggregated rank-dependent jump rates ``x -> x + e_(i)`` on sorted configurations."""
    x = tuple(sorted(x))
    out: dict = {}
    rk = ranks(x)
    for i in range(len(x)):
        y = list(x)
        y[i] += 1
        y = tuple(sorted(y))
        out[y] = out.get(y, 0) + rk[i]
    return out


def R_rates_by_doob(x: Sequence[int]) -> dict[tuple, Fraction]:
    """Off-diagonal rates of ``phi^{-1} (H - N(N-1)/2) phi`` computed from ``phi``."""
    x = tuple(sorted(x))
    px = bose_phi(x)
    out: dict = {}
    for i in range(len(x)):
        y = list(x)
        y[i] += 1
        y = tuple(sorted(y))
        out[y] = out.get(y, 0) + Fraction(bose_phi(y), px)
    return out


def build_R_bose(N: int, roof: int) -> SparseOperator:
    """Rank-dependent Poisson clocks on sorted configurations; moves beyond ``roof`` are dropped."""
    space = StateSpace(bose_configs(N, roof))

    def rule(x):
        row = {y: Fraction(v) for y, v in R_rates(x).items() if max(y) <= roof}
        row[x] = -Fraction(sum(R_rates(x).values()))
        return row

    return SparseOperator.from_rule(space, rule, markov=False, name=f"R^{N}")


# ---------------------------------------------------------------------------
# symmetries


def gamma(alpha: AlphaSpec, i: int, j: int) -> int:
    """``-beta_{1j} - ... - beta_{ij}``."""
    return -sum(alpha.beta(l, j) for l in range(1, i + 1))


def hat_transform(pi: PlaneArray, alpha: AlphaSpec) -> PlaneArray:
    """``hat(pi)_ij = pi_ji - gamma_ji``; the result lies in ``Pi^{r,-alpha}``."""
    cells = pi.cells
    tcells = tuple(sorted((j, i) for (i, j) in cells))
    vals = [pi[(j, i)] - gamma(alpha, j, i) for (i, j) in tcells]
    out = PlaneArray(tcells, vals)
    if not validate_state(out, alpha.negated()):
        raise ValueError(f"hat transform left Pi^(-alpha): {out}")
    return out


def cell_rates(pi: PlaneArray, alpha: AlphaSpec) -> dict[Cell, int]:
    return {c: b_rate(lambda d: pi[d], c, alpha) for c in pi.cells}


def hat_rate_check(r: int, alpha: AlphaSpec, max_entry: int):
    """Every rate of ``G^{r,alpha}`` at ``pi`` equals the transposed rate of ``G^{r,-alpha}`` at ``hat(pi)``."""
    cells = staircase_cells(r)
    w = omega(cells, alpha)
    upper = {c: max(max_entry, w[c]) for c in cells}
    count = 0
    for pi in enumerate_states(cells, alpha, upper):
        ph = hat_transform(pi, alpha)
        ra, rb = cell_rates(pi, alpha), cell_rates(ph, alpha.negated())
        for (i, j), v in ra.items():
            if rb[(j, i)] != v:
                return False, (pi, (i, j), v, rb[(j, i)]), count
        count += 1
    return True, None, count


# ---------------------------------------------------------------------------
# A_3 commuting operators


def _shift(f, p, d):
    q = tuple(a - b for a, b in zip(p, d))
    return f(q) if min(q) >= 0 else 0


def a3_operators() -> list[Callable]:
    """The three difference operators annihilating ``A_3(n, m, l)``; each maps ``(f, point) -> value``."""

    def D(f, p, d):
        return _shift(f, p, d) - f(p)

    en, em, el, enl = (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1)

    def op1(f, p):
        n, m, l = p
        return n * n * D(f, p, en) + m * m * D(f, p, em) + l * l * D(f, p, el) + (n * m + m * l) * f(p)

    def op2(f, p):
        # the sign of the D_n term is fixed by requiring op2 A_3 = 0
        n, m, l = p
        return -m * n * n * D(f, p, en) + (n - l) * m * m * D(f, p, em) + m * l * l * D(f, p, el)

    def op3(f, p):
        n, m, l = p
        return (n * n * l * l * D(f, p, enl) - l * (l - m) * n * n * D(f, p, en)
                - n * m * m * l * D(f, p, em) + n * (m - n) * l * l * D(f, p, el))

    return [op1, op2, op3]


def a3_second_operator_printed_sign(f, p):
    """``m n^2 D_n + (n-l) m^2 D_m + m l^2 D_l``: the all-plus variant, which does not annihilate ``A_3``."""
    n, m, l = p
    fp = f(p)
    return (m * n * n * (_shift(f, p, (1, 0, 0)) - fp) + (n - l) * m * m * (_shift(f, p, (0, 1, 0)) - fp)
            + m * l * l * (_shift(f, p, (0, 0, 1)) - fp))


def commuting_A3_check(max_n: int):
    """All three operators annihilate ``A_3`` and commute pairwise, on indices ``<= max_n``."""
    ops = a3_operators()

    def A3(p):
        return coeffs.a_normalized(3, p)

    pts = list(itertools.product(range(max_n + 1), repeat=3))
    for k, op in enumerate(ops):
        for p in pts:
            if op(A3, p) != 0:
                return {"ok": False, "witness": ("annihilate", k, p)}
    # operators only look backwards, so commutators on a box are exact
    rng = np.random.default_rng(0)
    table = {p: int(v) for p, v in zip(pts, rng.integers(-50, 50, len(pts)))}

    def f(p):
        return table.get(p, 0)

    for a, b in itertools.combinations(range(3), 2):
        for p in pts:
            lhs = ops[a](lambda q: ops[b](f, q) if min(q) >= 0 else 0, p)
            rhs = ops[b](lambda q: ops[a](f, q) if min(q) >= 0 else 0, p)
            if lhs != rhs:
                return {"ok": False, "witness": ("commute", a, b, p)}
    return {"ok": True, "witness": None}


# ---------------------------------------------------------------------------
# corner growth picture


def corner_growth_rates(nested: NestedPartitions) -> dict[tuple[int, int], int]:
    """Rates ``(i, k) -> rate`` of adding a box to row ``i`` of ``mu^k``.

    Allowed when ``mu^k_i < mu^k_{i-1} ^ mu^{k+1}_i``; the rate is
    ``#{j <= k: mu^j_i = mu^k_i} * #{j <= k: mu^j_{i-1} > mu^k_i}``.
    """
    out = {}
    nrows = len(nested.outer)
    for k in range(nested.N):
        for i in range(1, nrows + 1):
            x = nested.row(k, i)
            if not (x < nested.row(k, i - 1) and x < nested.row(k + 1, i)):
                continue
            same = sum(1 for j in range(k + 1) if nested.row(j, i) == x)
            above = sum(1 for j in range(k + 1) if nested.row(j, i - 1) > x)
            if same * above:
                out[(i, k)] = same * above
    return out


def corner_growth_as_cells(nested: NestedPartitions) -> dict[Cell, int]:
    """Corner-growth rates keyed by the cell whose entry drops from ``k + 1`` to ``k``."""
    return {(i, nested.row(k, i) + 1): v for (i, k), v in corner_growth_rates(nested).items()}


def first_row_multiset(row_values: Sequence[int], N: int) -> tuple[int, ...]:
    """Particle locations ``mu^k_1 = #{j: pi_1j <= k}``, ``k = 0..N-1``."""
    return tuple(sum(1 for v in row_values if v <= k) for k in range(N))
