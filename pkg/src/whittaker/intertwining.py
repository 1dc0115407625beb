"""Exact checks of intertwining relations ``H o Lambda = Lambda o G`` on finite truncations.

Every check returns a :class:`Report`.  Each verifier takes a ``perturb``
switch that breaks the kernel, weight or potential in a small way; the
perturbed check must fail, which guards against vacuous passes.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from . import coefficients as coeffs
from .operators import (
    R_rates,
    SparseOperator,
    StateSpace,
    box_space,
    build_G,
    build_H,
    build_L_r,
    doob_transform,
    first_row_multiset,
    generator_rule,
    shape_space,
)
from .shapes import EMPTY, AlphaSpec, PlaneArray, Shape, shifted_staircase_cells, staircase, interior


@dataclass
class Report:
    name: str
    ok: bool
    checked: int = 0
    witness: object = None
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" witness={self.witness}" if self.witness is not None else ""
        return f"{status} {self.name} ({self.checked} rows checked){extra}"

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "ok": self.ok, "checked": self.checked,
                           "witness": repr(self.witness) if self.witness is not None else None,
                           "details": {k: repr(v) if not isinstance(v, (int, float, str, bool)) else v
                                       for k, v in self.details.items()}})


class Intertwiner(SparseOperator):
    """Kernel ``source state -> {target state: weight}``; ``normalized()`` gives ``K`` with unit rows."""

    def normalized(self) -> "Intertwiner":
        rows = {}
        for s, row in self.rows.items():
            tot = sum(row.values(), Fraction(0))
            rows[s] = {t: v / tot for t, v in row.items()}
        return Intertwiner(rows, self.space)

    def row_totals(self) -> dict:
        return {s: sum(row.values(), Fraction(0)) for s, row in self.rows.items()}


def _compare(name: str, lhs: SparseOperator, rhs: SparseOperator, rows, **details) -> Report:
    rows = list(rows)
    ok, wit = lhs.equals(rhs, rows)
    return Report(name, ok, len(rows), wit, details)


# ---------------------------------------------------------------------------
# type A kernel q_r


def perturbed_q_kernel(r: int, alpha: AlphaSpec, n, k) -> Fraction:
    """``q_r`` with ``alpha_{ir}`` replaced by ``alpha_{ir} + 1`` in the last factor."""
    bumped = AlphaSpec(tuple(alpha[i] for i in range(1, r)) + (alpha[r] + 1,))
    return coeffs.q_kernel(r, bumped, n, k)


def verify_prop_iq(r: int, alpha: AlphaSpec, max_n: int, perturb: bool = False) -> Report:
    """``h^r o q_r = q_r o h^{r-1}`` on ``n, k <= max_n``, as a kernel identity and as an operator identity."""
    if r < 2:
        raise ValueError("r must be at least 2")
    q = perturbed_q_kernel if perturb else coeffs.q_kernel
    alpha = alpha.truncated(r)
    ns = list(itertools.product(range(max_n + 1), repeat=r))
    ks = list(itertools.product(range(max_n + 1), repeat=r - 1))
    cache: dict = {}

    def Q(n, k):
        if min(n) < 0 or min(k, default=0) < 0:
            return Fraction(0)
        key = (n, k)
        v = cache.get(key)
        if v is None:
            v = cache[key] = q(r, alpha, n, k)
        return v

    def minus(v, i):
        return v[:i] + (v[i] - 1,) + v[i + 1:]

    def plus(v, i):
        return v[:i] + (v[i] + 1,) + v[i + 1:]

    checked = 0
    # kernel identity: h^r acting on n equals the adjoint of h^{r-1} acting on k
    for n in ns:
        Pn = coeffs.rec_polynomial(alpha, n)
        for k in ks:
            lhs = sum((Q(minus(n, i), k) for i in range(r) if n[i] > 0), Fraction(0)) - Pn * Q(n, k)
            rhs = sum((Q(n, plus(k, j)) for j in range(r - 1)), Fraction(0)) - coeffs.rec_polynomial(alpha, k) * Q(n, k)
            checked += 1
            if lhs != rhs:
                return Report(f"iq r={r} alpha={alpha}", False, checked, ("kernel", n, k, lhs, rhs))
    # operator identity against a fixed integer test function
    rng = np.random.default_rng(12345)
    fvals = {k: int(v) for k, v in zip(ks, rng.integers(-20, 21, len(ks)))}

    def f(k):
        return fvals.get(k, 0) if min(k, default=0) >= 0 else 0

    def qf(n):
        if min(n) < 0:
            return Fraction(0)
        return sum((Q(n, k) * f(k) for k in itertools.product(*(range(x + 1) for x in n[:-1]))), Fraction(0))

    def h_lower(k):
        val = sum((f(minus(k, j)) for j in range(r - 1) if k[j] > 0), Fraction(0))
        return val - coeffs.rec_polynomial(alpha, k) * f(k)

    for n in ns:
        lhs = sum((qf(minus(n, i)) for i in range(r) if n[i] > 0), Fraction(0)) - coeffs.rec_polynomial(alpha, n) * qf(n)
        rhs = sum((Q(n, k) * h_lower(k) for k in itertools.product(*(range(x + 1) for x in n[:-1]))), Fraction(0))
        checked += 1
        if lhs != rhs:
            return Report(f"iq r={r} alpha={alpha}", False, checked, ("operator", n, lhs, rhs))
    return Report(f"iq r={r} alpha={alpha}", True, checked)


# ---------------------------------------------------------------------------
# general shapes


@dataclass
class RppSystem:
    lam: Shape
    mu: Shape
    alpha: AlphaSpec
    sigma_space: StateSpace
    full_space: StateSpace
    H: SparseOperator
    G: SparseOperator
    Lam: Intertwiner


def build_rpp_system(lam: Shape, mu: Shape, alpha: AlphaSpec, roof, perturb: bool = False,
                     weight: Callable | None = None) -> RppSystem:
    """Boundary operator ``H^{lam,mu}``, fine generator ``G^lam`` and kernel ``Lambda`` on a truncation.

    The fine space is the union of the fibers over the boundary space, which
    is closed under ``G^lam`` because every move lowers one entry.
    """
    shift = (lambda s: 1 if any(s) else 0) if perturb else None
    sig_space, H = build_H(lam, mu, alpha, roof, potential_shift=shift)
    cells = tuple(lam.cells())
    bcells = sig_space.cells
    weight = weight or (lambda pi: coeffs.W_general(lam, mu, alpha, pi))
    rows, fine = {}, []
    for s in sig_space.states:
        sigma = dict(zip(bcells, s))
        row = {}
        for pi in coeffs.fiber(lam, mu, sigma, alpha):
            row[pi.values] = weight(pi)
            fine.append(pi.values)
        rows[s] = row
    full_space = StateSpace(fine, cells)
    G = SparseOperator.from_rule(full_space, generator_rule(full_space, alpha), markov=True, name=f"G^{lam}")
    return RppSystem(lam, mu, alpha, sig_space, full_space, H, G, Intertwiner(rows, sig_space))


def verify_mf_rpp(lam: Shape, mu: Shape, alpha: AlphaSpec = AlphaSpec(), roof=3, perturb: bool = False,
                  literal_weight: bool = False) -> Report:
    """``H^{lam,mu} o Lambda = Lambda o G^lam`` and ``H A_{lam,mu} = 0`` on every boundary state ``<= roof``.

    ``literal_weight`` swaps in the weight with binomials against boundary
    neighbours, which fails for non-staircase ``mu`` such as ``(2)`` in ``(3, 3)``.
    """
    weight = (lambda pi: coeffs.W_general(lam, mu, alpha, pi, literal=True)) if literal_weight else None
    sysm = build_rpp_system(lam, mu, alpha, roof, perturb, weight)
    lhs = sysm.H.compose(sysm.Lam)
    rhs = sysm.Lam.compose(sysm.G)
    name = f"mf-rpp lam={lam} mu={mu or '0'} alpha={alpha}"
    rep = _compare(name, lhs, rhs, sysm.sigma_space.states, fine_states=len(sysm.full_space))
    if not rep.ok:
        return rep
    A = sysm.Lam.row_totals()
    HA = sysm.H.apply(A)
    bad = next((s for s, v in HA.items() if v != 0), None)
    if bad is not None:
        return Report(name, False, rep.checked, ("H A != 0", bad, HA[bad]))
    K = sysm.Lam.normalized()
    if any(sum(row.values()) != 1 for row in K.rows.values()):
        return Report(name, False, rep.checked, "K rows do not sum to 1")
    return rep


def verify_staircase_doob(r: int, alpha: AlphaSpec, roof: int) -> Report:
    """Doob transform of ``H^{delta_{r+1}, delta_r}`` by ``A_{lam,mu}`` equals ``L^r`` built from ``a_r``."""
    lam, mu = staircase(r), Shape(range(r - 1, 0, -1))
    sysm = build_rpp_system(lam, mu, alpha, roof)
    A = sysm.Lam.row_totals()
    L1 = doob_transform(sysm.H, A)
    L2 = build_L_r(r, alpha, [roof] * r)
    return _compare(f"staircase Doob r={r} alpha={alpha}", L1, L2, L2.rows)


def all_inner_shapes(lam: Shape) -> list[Shape]:
    return list(interior(lam).subshapes())


# ---------------------------------------------------------------------------
# other root systems


def _diff_row(x: tuple, terms, potential) -> dict:
    """Row of ``sum c (f(x - d) - f(x)) + V f(x)``; ``terms`` is a list of ``(c, d)``."""
    row = {x: Fraction(potential)}
    for c, d in terms:
        if not c:
            continue
        y = tuple(a - b for a, b in zip(x, d))
        if min(y) < 0:
            raise ValueError(f"nonzero coefficient {c} pushes {x} out of range")
        row[y] = row.get(y, 0) + Fraction(c)
        row[x] -= Fraction(c)
    return row


def _op(states, rule, name="") -> SparseOperator:
    space = StateSpace(list(states))
    return SparseOperator.from_rule(space, rule, name=name)


def _b_shifted(val, i, j) -> Fraction:
    if i != j:
        return Fraction((val(i, j) - val(i - 1, j)) * (val(i, j) - val(i, j - 1)))
    return Fraction((val(i, i) - val(i - 1, i)) * (val(i, i) - val(i - 1, i - 1)), 2)


def verify_B(r: int, max_n: int, perturb: bool = False) -> Report:
    """``H^{B_r} o Lambda_{B_r} = Lambda_{B_r} o G^{B_r}`` for boundaries ``n <= max_n``."""
    cells = shifted_staircase_cells(r)
    cellset = set(cells)
    pos = {c: k for k, c in enumerate(cells)}
    ns = list(itertools.product(range(max_n + 1), repeat=r))
    rows, fine = {}, []
    for n in ns:
        row = {}
        for pi in coeffs.shifted_fiber(r, n):
            w = coeffs.W_B_weight(r, pi)
            if perturb:
                w *= 1 + pi[(1, 1)]
            row[pi.values] = Fraction(w)
            fine.append(pi.values)
        rows[n] = row
    Lam = Intertwiner(rows, StateSpace(ns))

    def Hrule(n):
        terms = [(n[i] ** 2 if i < r - 1 else Fraction(n[i] ** 2, 2), tuple(int(j == i) for j in range(r))) for i in range(r)]
        return _diff_row(n, terms, sum(n[i] * n[i + 1] for i in range(r - 1)))

    def Grule(p):
        def val(i, j):
            return p[pos[(i, j)]] if (i, j) in cellset else 0

        terms = [(_b_shifted(val, i, j), tuple(int(k == pos[(i, j)]) for k in range(len(cells)))) for (i, j) in cells]
        return _diff_row(p, terms, 0)

    H = _op(ns, Hrule, "H^B")
    G = _op(fine, Grule, "G^B")
    ok, wit = G.check_markov()
    if not ok:
        return Report(f"B{r}", False, 0, ("G not Markov", wit))
    return _compare(f"B{r} intertwining", H.compose(Lam), Lam.compose(G), ns)


def verify_BC1(max_n: int, perturb: bool = False) -> Report:
    """``H^{B_1} Q = Q H^{BC_1}`` and the Markov-function form with ``G`` on ``{n >= k >= 0}``."""
    ns = [(n,) for n in range(max_n + 1)]

    def Q(n, k):
        base = Fraction(coeffs.binom(n, k), 2 ** n)
        return base * (1 + k) if perturb else base

    Hb1 = _op(ns, lambda x: _diff_row(x, [(Fraction(x[0] ** 2, 2), (1,))], 0), "H^B1")
    Hbc1 = _op(ns, lambda x: _diff_row(x, [(Fraction(x[0], 2), (1,)), (Fraction(x[0] * (x[0] - 1), 2), (2,))], 0), "H^BC1")
    Qop = Intertwiner({(n,): {(k,): Q(n, k) for k in range(n + 1)} for n in range(max_n + 1)}, StateSpace(ns))
    rep = _compare("BC1 kernel intertwining", Hb1.compose(Qop), Qop.compose(Hbc1), ns)
    if not rep.ok:
        return rep
    E = [(n, k) for n in range(max_n + 1) for k in range(n + 1)]

    def Grule(x):
        n, k = x
        # n(n-k), not n(n-k)/2: n must leave at total rate n^2/2 averaged over Binomial(n, 1/2)
        return _diff_row(x, [(Fraction(k, 2), (0, 1)), (Fraction(k * (k - 1), 2), (0, 2)),
                             (n * (n - k), (1, 0))], 0)

    G = _op(E, Grule, "G^BC1")
    Lam = Intertwiner({(n,): {(n, k): Q(n, k) for k in range(n + 1)} for n in range(max_n + 1)}, StateSpace(ns))
    rep2 = _compare("BC1 Markov-function intertwining", Hb1.compose(Lam), Lam.compose(G), ns)
    return Report("BC1", rep2.ok, rep.checked + rep2.checked, rep2.witness)


def bc2_hamiltonian_row(x: tuple[int, int], tilde: bool = False) -> dict:
    """Row of ``H^{BC_2}`` (or the tilde Hamiltonian) at ``(n, m)``."""
    n, m = x
    if tilde:
        terms = [(Fraction(n * n, 2), (1, 0)), (Fraction(m * m, 2), (0, 1)), (Fraction(n * m, 2), (1, 1))]
    else:
        terms = [(n * n, (1, 0)), (Fraction(m, 2), (0, 1)), (Fraction(m * (m - 1), 2), (0, 2))]
    return _diff_row(x, terms, n * m)


def bc2_annihilation(max_n: int, tilde: bool = False, f=None) -> Report:
    """``H f = 0`` on ``n, m <= max_n`` for the Delannoy numbers (or any other ``f``)."""
    f = f or coeffs.bc2_coeff
    bad, checked = None, 0
    for x in itertools.product(range(max_n + 1), repeat=2):
        total = sum(c * f(*y) for y, c in bc2_hamiltonian_row(x, tilde).items() if min(y) >= 0)
        checked += 1
        if total != 0 and bad is None:
            bad = (x, total)
    return Report(f"H{'~' if tilde else ''}^BC2 annihilates f", bad is None, checked, bad)


def verify_BC2(max_n: int, tilde: bool = False, perturb: bool = False) -> Report:
    """``H^{BC_2} Q = Q H^{B_1}`` (or the tilde Hamiltonian), plus the Markov-function form."""
    nm = list(itertools.product(range(max_n + 1), repeat=2))

    def Qw(n, m, k):
        w = Fraction(coeffs.binom(n, k) * coeffs.binom(m, k) * 2 ** k)
        return w * (1 + k) if perturb else w

    H = _op(nm, lambda x: bc2_hamiltonian_row(x, tilde), "H^BC2")
    ks = [(k,) for k in range(max_n + 1)]
    Hb1 = _op(ks, lambda x: _diff_row(x, [(Fraction(x[0] ** 2, 2), (1,))], 0), "H^B1")
    Q = Intertwiner({(n, m): {(k,): Qw(n, m, k) for k in range(min(n, m) + 1)} for n, m in nm}, StateSpace(nm))
    label = "BC2~" if tilde else "BC2"
    rep = _compare(f"{label} kernel intertwining", H.compose(Q), Q.compose(Hb1), nm)
    if not rep.ok:
        return rep
    P = [(n, m, k) for n, m in nm for k in range(min(n, m) + 1)]

    def Grule(x):
        n, m, k = x
        if tilde:
            terms = [(Fraction(n * (n - k), 2), (1, 0, 0)), (Fraction(m * (m - k), 2), (0, 1, 0)),
                     # the printed rate (n-k)(m-k) is twice what the intertwining needs
                     (Fraction((n - k) * (m - k), 2), (1, 1, 0)), (Fraction(k * k, 2), (0, 0, 1))]
        else:
            terms = [(n * (n - k), (1, 0, 0)), (Fraction(m - k, 2), (0, 1, 0)),
                     (Fraction((m - k) * (m - k - 1), 2), (0, 2, 0)), (Fraction(k * k, 2), (0, 0, 1))]
        return _diff_row(x, terms, 0)

    G = _op(P, Grule, "G^BC2")
    ok, wit = G.check_markov()
    if not ok:
        return Report(label, False, rep.checked, ("G not Markov", wit))
    Lam = Intertwiner({(n, m): {(n, m, k): Qw(n, m, k) for k in range(min(n, m) + 1)} for n, m in nm}, StateSpace(nm))
    rep2 = _compare(f"{label} Markov-function intertwining", H.compose(Lam), Lam.compose(G), nm)
    if rep2.ok:
        BC = {x: Fraction(coeffs.bc2_coeff(*x)) for x in nm}
        HB = H.apply(BC)
        bad = next((x for x, v in HB.items() if v != 0), None)
        if bad is not None:
            return Report(label, False, rep.checked + rep2.checked, ("H BC2 != 0", bad))
    return Report(label, rep2.ok, rep.checked + rep2.checked, rep2.witness)


def verify_G2(max_n: int, perturb: bool = False) -> Report:
    """``H^{G_2} o Lambda = Lambda o G`` for ``(n, m) <= max_n``."""
    nm = list(itertools.product(range(max_n + 1), repeat=2))
    rows, fine = {}, []
    for n, m in nm:
        row = {}
        for p in coeffs.g2_fiber(n, m):
            w = Fraction(coeffs.g2_weight(*p))
            row[p] = w * (1 + p[4]) if perturb else w
            fine.append(p)
        rows[(n, m)] = row
    Lam = Intertwiner(rows, StateSpace(nm))

    def Hrule(x):
        n, m = x
        return _diff_row(x, [(n * n, (1, 0)), (3 * m * m, (0, 1))], 3 * n * m)

    def e(k):
        return tuple(int(j == k) for j in range(6))

    def Grule(p):
        n, m, i, j, k, l = p
        terms = [((n - l) * (n - i - j), e(0)), (3 * m * (m - l), e(1)), (3 * (l - i) * (l - j), e(5)),
                 (i * (i - k), e(2)), (j * (j - k), e(3)), (k * k, e(4))]
        return _diff_row(p, terms, 0)

    H = _op(nm, Hrule, "H^G2")
    G = _op(fine, Grule, "G^G2")
    ok, wit = G.check_markov()
    if not ok:
        return Report("G2", False, 0, ("G not Markov", wit))
    return _compare("G2 intertwining", H.compose(Lam), Lam.compose(G), nm)


def verify_root_system(which: str, roof: int = 3, perturb: bool = False) -> Report:
    """Dispatch: ``B2``, ``B3``, ``BC1``, ``BC2`` (both Hamiltonians) or ``G2``."""
    if which in ("B2", "B3"):
        return verify_B(int(which[1]), roof, perturb)
    if which == "BC1":
        return verify_BC1(roof, perturb)
    if which == "BC2":
        a = verify_BC2(roof, False, perturb)
        b = verify_BC2(roof, True, perturb)
        return Report("BC2 (H and H~)", a.ok and b.ok, a.checked + b.checked, a.witness or b.witness)
    if which == "G2":
        return verify_G2(roof, perturb)
    raise ValueError(f"unknown root system {which!r}")


# ---------------------------------------------------------------------------
# Markov projection, checked with a matrix exponential


def verify_projection_exact(lam: Shape, mu: Shape, alpha: AlphaSpec, sigma0: Sequence[int], t: float,
                            tol: float = 1e-10, perturb: bool = False) -> Report:
    """Boundary marginal of the fine chain started from ``K_sigma0`` versus the ``L`` chain from ``sigma0``.

    ``perturb`` starts the fine chain from the uniform law on the fiber instead of ``K``.
    """
    bcells = [c for c in lam.cells() if c not in mu]
    roof = dict(zip(bcells, sigma0))
    sysm = build_rpp_system(lam, mu, alpha, roof)
    s0 = tuple(int(v) for v in sigma0)
    if s0 not in sysm.sigma_space:
        raise ValueError(f"sigma0={s0} is not a valid boundary state")
    A = sysm.Lam.row_totals()
    L = doob_transform(sysm.H, A)
    order_s = sysm.sigma_space.states
    order_f = sysm.full_space.states
    K0 = sysm.Lam.normalized()[s0]
    p0 = np.zeros(len(order_f))
    fidx = {s: i for i, s in enumerate(order_f)}
    for pi, w in K0.items():
        p0[fidx[pi]] = 1.0 / len(K0) if perturb else float(w)
    pt_full = p0 @ expm(sysm.G.to_dense(order_f) * t)
    nb = len(bcells)
    sidx = {s: i for i, s in enumerate(order_s)}
    pos = [sysm.full_space.cells.index(c) for c in bcells]
    pushed = np.zeros(len(order_s))
    for i, pi in enumerate(order_f):
        pushed[sidx[tuple(pi[k] for k in pos)]] += pt_full[i]
    e0 = np.zeros(len(order_s))
    e0[sidx[s0]] = 1.0
    pt_L = e0 @ expm(L.to_dense(order_s) * t)
    diff = float(np.max(np.abs(pushed - pt_L)))
    return Report(f"projection lam={lam} mu={mu} sigma0={s0} t={t}", diff <= tol, len(order_s),
                  None if diff <= tol else diff, {"max_abs_diff": diff, "fine_states": len(order_f), "boundary_cells": nb})


# ---------------------------------------------------------------------------
# first row versus the delta-Bose gas


def verify_first_row_bose(lam: Shape, N: int, perturb: bool = False) -> Report:
    """First-row particle dynamics of ``G^lam`` (alpha = 0) against the rank-dependent generator ``R``.

    Particles are the locations ``mu^k_1``, ``k < N``.  The finite shape caps
    locations at ``lam_1``; moves of particles sitting there are excluded.
    """
    space, G = build_G(lam, EMPTY, AlphaSpec(), N)
    L1 = lam.part(1)
    row_pos = [k for k, c in enumerate(space.cells) if c[0] == 1]
    checked = 0
    for s in space.states:
        x = first_row_multiset([s[k] for k in row_pos], N)
        agg: dict = {}
        for t, v in G.offdiag(s).items():
            y = first_row_multiset([t[k] for k in row_pos], N)
            if y != x:
                agg[y] = agg.get(y, 0) + v
        expected = R_rates(x)
        if perturb:
            expected = {y: 1 for y in expected}
        expected = {y: Fraction(v) for y, v in expected.items() if max(y) <= L1}
        checked += 1
        if agg != expected:
            return Report(f"first-row Bose lam={lam} N={N}", False, checked, (s, x, agg, expected))
    return Report(f"first-row Bose lam={lam} N={N}", True, checked)
