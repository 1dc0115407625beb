"""Young diagrams, cell arrays and the constraint sets the chains live on.

Cells are 1-indexed ``(row, column)`` pairs.  Arrays read ``0`` at the
boundary positions ``(i, 0)`` and ``(0, j)`` and, for skew arrays, at every
position outside the stored cells.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

Cell = tuple[int, int]


class _Infinity:
    """The ``+inf`` entry of an array.  Only comparisons are defined."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("whittaker.INF")

    def __lt__(self, other) -> bool:
        return False

    def __le__(self, other) -> bool:
        return other is self

    def __gt__(self, other) -> bool:
        return other is not self

    def __ge__(self, other) -> bool:
        return True

    def __sub__(self, other):
        if other is self:
            raise ArithmeticError("INF - INF is undefined")
        return self

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __rsub__(self, other):
        raise ArithmeticError("finite - INF is not an extended non-negative integer")


INF = _Infinity()


def is_finite(v) -> bool:
    return v is not INF


@dataclass(frozen=True)
class Shape:
    """An integer partition; trailing zero parts are dropped."""

    rows: tuple[int, ...]

    def __init__(self, rows: Iterable[int] = ()):
        rows = tuple(int(r) for r in rows)
        if any(r < 0 for r in rows):
            raise ValueError(f"negative part in {rows}")
        if any(rows[i] < rows[i + 1] for i in range(len(rows) - 1)):
            raise ValueError(f"parts of {rows} are not weakly decreasing")
        while rows and rows[-1] == 0:
            rows = rows[:-1]
        object.__setattr__(self, "rows", rows)

    @classmethod
    def parse(cls, text: str) -> "Shape":
        """Parse ``"3,2,1"``, ``"50x50"`` (rectangle) or ``""`` (empty)."""
        text = text.strip()
        if not text or text in ("0", "empty", "-"):
            return cls(())
        if "x" in text:
            ncols, nrows = (int(p) for p in text.split("x"))
            return cls((ncols,) * nrows)
        if "^" in text:
            part, mult = (int(p) for p in text.split("^"))
            return cls((part,) * mult)
        return cls(int(p) for p in text.split(","))

    def __str__(self) -> str:
        return ",".join(map(str, self.rows)) or "0"

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, cell) -> bool:
        i, j = cell
        return 1 <= i <= len(self.rows) and 1 <= j <= self.rows[i - 1]

    def part(self, i: int) -> int:
        if i < 1:
            raise IndexError(i)
        return self.rows[i - 1] if i <= len(self.rows) else 0

    @property
    def size(self) -> int:
        return sum(self.rows)

    def cells(self) -> list[Cell]:
        return [(i, j) for i, r in enumerate(self.rows, 1) for j in range(1, r + 1)]

    def contains(self, other: "Shape") -> bool:
        return all(other.part(i) <= self.part(i) for i in range(1, len(other) + 1))

    def transpose(self) -> "Shape":
        if not self.rows:
            return self
        return Shape(sum(1 for r in self.rows if r >= j) for j in range(1, self.rows[0] + 1))

    def corners(self) -> list[Cell]:
        """External corners: cells with neither right nor lower neighbour."""
        return [(i, r) for i, r in enumerate(self.rows, 1) if self.part(i + 1) < r]

    def subshapes(self) -> Iterator["Shape"]:
        """All partitions contained in this one, including the empty one."""

        def rec(i: int, cap: int, acc: tuple[int, ...]):
            if i > len(self.rows):
                yield Shape(acc)
                return
            for v in range(min(cap, self.rows[i - 1]), -1, -1):
                if v == 0:
                    yield Shape(acc)
                else:
                    yield from rec(i + 1, v, acc + (v,))

        yield from rec(1, self.rows[0] if self.rows else 0, ())


EMPTY = Shape(())


def staircase(r: int) -> Shape:
    """The staircase ``(r, r-1, ..., 1)``."""
    if r < 1:
        raise ValueError("r must be positive")
    return Shape(range(r, 0, -1))


def interior(shape: Shape) -> Shape:
    """Cells ``(i, j)`` whose right and lower neighbours are both in the shape."""
    return Shape(min(shape.part(i) - 1, shape.part(i + 1)) for i in range(1, len(shape) + 1))


def shifted_staircase_cells(r: int) -> list[Cell]:
    """Cells of the shifted staircase ``{(i, j): 1 <= i <= j <= 2r - i}``."""
    return [(i, j) for i in range(1, r + 1) for j in range(i, 2 * r - i + 1)]


def extension(lam: Shape, mu: Shape) -> list[Cell]:
    """``mu`` together with the cells of ``lam/mu`` directly below or right of ``mu``."""
    out = []
    for c in lam.cells():
        i, j = c
        if c in mu or (i - 1, j) in mu or (i, j - 1) in mu:
            out.append(c)
    return out


@dataclass(frozen=True)
class SkewShape:
    outer: Shape
    inner: Shape = EMPTY

    def __post_init__(self):
        if not self.outer.contains(self.inner):
            raise ValueError(f"{self.inner} is not contained in {self.outer}")

    def cells(self) -> list[Cell]:
        return [c for c in self.outer.cells() if c not in self.inner]

    def __contains__(self, cell) -> bool:
        return cell in self.outer and cell not in self.inner

    def __str__(self) -> str:
        return f"{self.outer}/{self.inner}"


@dataclass(frozen=True)
class AlphaSpec:
    """Integer parameters ``alpha_1, alpha_2, ...``; missing entries are zero."""

    alpha: tuple[int, ...] = ()

    def __init__(self, alpha: Iterable[int] = ()):
        object.__setattr__(self, "alpha", tuple(int(a) for a in alpha))

    @classmethod
    def parse(cls, text: str | None) -> "AlphaSpec":
        if text is None or not text.strip():
            return cls(())
        return cls(int(p) for p in text.split(","))

    def __getitem__(self, i: int) -> int:
        if i < 1:
            raise IndexError(i)
        return self.alpha[i - 1] if i <= len(self.alpha) else 0

    def interval(self, i: int, j: int) -> int:
        """``alpha_i + ... + alpha_j`` (zero when ``j < i``)."""
        return sum(self[k] for k in range(i, j + 1))

    def beta(self, i: int, j: int) -> int:
        """``beta_ij = alpha_i + ... + alpha_{i+j-1}``."""
        return self.interval(i, i + j - 1)

    def negated(self) -> "AlphaSpec":
        return AlphaSpec(-a for a in self.alpha)

    def is_zero(self) -> bool:
        return not any(self.alpha)

    def nonnegative(self) -> bool:
        return all(a >= 0 for a in self.alpha)

    def truncated(self, r: int) -> "AlphaSpec":
        return AlphaSpec(self[i] for i in range(1, r + 1))

    def nu(self, r: int) -> tuple[Fraction, ...]:
        """Zero-sum ``nu`` in ``Q^(r+1)`` with ``alpha_i = nu_i - nu_{i+1}``, ``i <= r``."""
        first = Fraction(sum((r + 1 - k) * self[k] for k in range(1, r + 1)), r + 1)
        out = [first]
        for i in range(1, r + 1):
            out.append(out[-1] - self[i])
        return tuple(out)

    def __str__(self) -> str:
        return ",".join(map(str, self.alpha)) or "0"


def alpha_from_nu(nu: Sequence) -> AlphaSpec:
    diffs = [Fraction(nu[i]) - Fraction(nu[i + 1]) for i in range(len(nu) - 1)]
    if any(d.denominator != 1 for d in diffs):
        raise ValueError(f"nu={nu} does not give integer alpha")
    return AlphaSpec(int(d) for d in diffs)


class PlaneArray(Mapping):
    """An immutable filling of a cell set by extended non-negative integers.

    ``arr[i, j]`` returns ``0`` for cells outside the stored set, which covers
    both the boundary conventions and the skew-shape convention.
    """

    __slots__ = ("_cells", "_values", "_index", "_hash")

    def __init__(self, cells: Sequence[Cell], values: Sequence):
        cells = tuple(tuple(c) for c in cells)
        values = tuple(v if v is INF else int(v) for v in values)
        if len(cells) != len(values):
            raise ValueError("cells and values differ in length")
        for v in values:
            if v is not INF and v < 0:
                raise ValueError(f"entry {v!r} is not an extended non-negative integer")
        self._cells = cells
        self._values = values
        self._index = {c: k for k, c in enumerate(cells)}
        self._hash = None

    @classmethod
    def from_dict(cls, d: Mapping[Cell, int]) -> "PlaneArray":
        cells = sorted(d)
        return cls(cells, [d[c] for c in cells])

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], col_offsets: Sequence[int] | None = None) -> "PlaneArray":
        """Build from row lists; ``col_offsets[i]`` skips leading (inner) cells."""
        cells, values = [], []
        for i, row in enumerate(rows, 1):
            off = col_offsets[i - 1] if col_offsets else 0
            for j, v in enumerate(row, off + 1):
                cells.append((i, j))
                values.append(v)
        return cls(cells, values)

    @classmethod
    def constant(cls, cells: Sequence[Cell], value) -> "PlaneArray":
        return cls(cells, [value] * len(cells))

    @property
    def cells(self) -> tuple[Cell, ...]:
        return self._cells

    @property
    def values(self) -> tuple:
        return self._values

    def __getitem__(self, cell):
        k = self._index.get(tuple(cell))
        return 0 if k is None else self._values[k]

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self._index

    def __iter__(self):
        return iter(self._cells)

    def __len__(self) -> int:
        return len(self._cells)

    def __eq__(self, other) -> bool:
        if isinstance(other, PlaneArray):
            return self._cells == other._cells and self._values == other._values
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._cells, self._values))
        return self._hash

    def __repr__(self) -> str:
        return f"PlaneArray({self.rows()})"

    def rows(self) -> list[list]:
        out: dict[int, list] = {}
        for (i, _), v in zip(self._cells, self._values):
            out.setdefault(i, []).append(v)
        return [out[i] for i in sorted(out)]

    def replace(self, updates: Mapping[Cell, int]) -> "PlaneArray":
        vals = list(self._values)
        for c, v in updates.items():
            vals[self._index[c]] = v
        return PlaneArray(self._cells, vals)

    def restrict(self, cells: Iterable[Cell]) -> "PlaneArray":
        cells = list(cells)
        return PlaneArray(cells, [self[c] for c in cells])

    def transpose(self) -> "PlaneArray":
        return PlaneArray.from_dict({(j, i): v for (i, j), v in zip(self._cells, self._values)})

    def max(self):
        return max(self._values) if self._values else 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "cells": [list(c) for c in self._cells],
                "values": [None if v is INF else v for v in self._values],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PlaneArray":
        d = json.loads(text)
        return cls([tuple(c) for c in d["cells"]], [INF if v is None else v for v in d["values"]])

    def to_csv(self) -> str:
        """Grid with empty fields at positions outside the cell set."""
        if not self._cells:
            return ""
        nrows = max(i for i, _ in self._cells)
        ncols = max(j for _, j in self._cells)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for i in range(1, nrows + 1):
            row = []
            for j in range(1, ncols + 1):
                if (i, j) in self._index:
                    v = self[(i, j)]
                    row.append("inf" if v is INF else str(v))
                else:
                    row.append("")
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PlaneArray":
        d = {}
        for i, row in enumerate(csv.reader(io.StringIO(text)), 1):
            for j, s in enumerate(row, 1):
                if s.strip():
                    d[(i, j)] = INF if s.strip() == "inf" else int(s)
        return cls.from_dict(d)


def omega(cells: Sequence[Cell], alpha: AlphaSpec) -> dict[Cell, int]:
    """Solve ``w_ij = w_{i,j-1} v (w_{i-1,j} - beta_ij)`` on a left/up-closed cell set."""
    w: dict[Cell, int] = {}
    for i, j in sorted(cells):
        w[(i, j)] = max(w.get((i, j - 1), 0), w.get((i - 1, j), 0) - alpha.beta(i, j))
    return w


def staircase_cells(r: int) -> list[Cell]:
    """Index set ``{(i, j): i, j >= 1, i + j <= r + 1}``."""
    return staircase(r).cells()


def omega_array(alpha: AlphaSpec, r: int) -> PlaneArray:
    """The minimal (absorbing) element of ``Pi^{r,alpha}``."""
    cells = staircase_cells(r)
    w = omega(cells, alpha)
    return PlaneArray(cells, [w[c] for c in cells])


def omega_closed_form(alpha: AlphaSpec, r: int) -> PlaneArray:
    """``omega`` via decreasing rearrangements of the nested ``nu^k`` vectors."""
    d: dict[Cell, int] = {}
    for k in range(2, r + 2):
        nu = alpha.nu(k - 1)
        srt = sorted(nu, reverse=True)
        for i in range(1, k):
            val = sum(srt[:i]) - sum(nu[:i])
            assert val.denominator == 1
            d[(i, k - i)] = int(val)
    cells = staircase_cells(r)
    return PlaneArray(cells, [d[c] for c in cells])


def cell_lower_bound(arr: Mapping[Cell, int], cell: Cell, alpha: AlphaSpec, w: Mapping[Cell, int] | None = None):
    i, j = cell
    lo = max(arr[(i, j - 1)], arr[(i - 1, j)] - alpha.beta(i, j))
    if w is not None:
        lo = max(lo, w.get(cell, 0))
    return lo


def validate_state(pi: PlaneArray, alpha: AlphaSpec, with_omega: bool = True) -> bool:
    """Check ``pi_ij >= omega_ij v pi_{i,j-1} v (pi_{i-1,j} - beta_ij)`` at every cell.

    Missing cells read as ``0``.  ``+inf`` entries are allowed; an infinite
    neighbour forces an infinite entry.
    """
    w = omega(_closure(pi.cells), alpha) if with_omega and not alpha.nonnegative() else None
    for c in pi.cells:
        v = pi[c]
        i, j = c
        left, up = pi[(i, j - 1)], pi[(i - 1, j)]
        if v is INF:
            continue
        if left is INF or up is INF:
            return False
        if v < cell_lower_bound(pi, c, alpha, w):
            return False
    return True


def _closure(cells: Iterable[Cell]) -> list[Cell]:
    """Smallest left/up-closed cell set containing ``cells``."""
    out = set()
    for i, j in cells:
        for a in range(1, i + 1):
            for b in range(1, j + 1):
                out.add((a, b))
    return sorted(out)


def check_alpha_for(pi: PlaneArray, alpha: AlphaSpec) -> None:
    if not pi.cells:
        return
    need = max(i + j - 1 for i, j in pi.cells)
    if len(alpha.alpha) > need:
        raise ValueError(f"alpha has {len(alpha.alpha)} entries but the shape uses only {need}")


def enumerate_states(
    cells: Sequence[Cell],
    alpha: AlphaSpec,
    upper: Mapping[Cell, int],
    fixed: Mapping[Cell, int] | None = None,
    with_omega: bool = True,
) -> Iterator[PlaneArray]:
    """All valid fillings of ``cells`` with ``value <= upper[cell]``.

    ``fixed`` supplies values of positions outside ``cells`` (for example the
    boundary of a fiber); any other position reads as ``0``.  Cells are filled
    in row-major order so each lower bound is known when it is needed.
    """
    cells = sorted(cells)
    fixed = dict(fixed or {})
    w = omega(_closure(list(cells) + list(fixed)), alpha) if with_omega and not alpha.nonnegative() else None
    vals: dict[Cell, int] = dict(fixed)

    class _View(dict):
        def __missing__(self, key):
            return 0

    view = _View(vals)

    def rec(k: int):
        if k == len(cells):
            # fixed cells must also satisfy their constraints given the filling
            for c in fixed:
                if c[0] >= 1 and c[1] >= 1 and view[c] < cell_lower_bound(view, c, alpha, w):
                    return
            yield PlaneArray(cells, [view[c] for c in cells])
            return
        c = cells[k]
        lo = cell_lower_bound(view, c, alpha, w)
        for v in range(lo, upper[c] + 1):
            view[c] = v
            yield from rec(k + 1)
        view.pop(c, None)

    yield from rec(0)


def rpp_states(shape: Shape, max_entry: int) -> list[PlaneArray]:
    """Reverse plane partitions of ``shape`` with entries ``<= max_entry``."""
    cells = shape.cells()
    return list(enumerate_states(cells, AlphaSpec(), {c: max_entry for c in cells}))


@dataclass(frozen=True)
class NestedPartitions:
    """``mu^0 <= mu^1 <= ... <= mu^{N-1}`` inside a finite outer shape.

    ``level(k)`` is the outer shape for ``k >= N``: every entry of a finite
    array is at most ``N``.
    """

    levels: tuple[Shape, ...]
    outer: Shape = field(default=EMPTY)

    def __post_init__(self):
        prev = EMPTY
        for mu in self.levels:
            if not mu.contains(prev):
                raise ValueError("levels are not nested")
            prev = mu
        if self.outer.rows and not self.outer.contains(prev):
            raise ValueError("levels exceed the outer shape")

    @property
    def N(self) -> int:
        return len(self.levels)

    def level(self, k: int) -> Shape:
        if k < 0:
            raise IndexError(k)
        return self.levels[k] if k < self.N else self.outer

    def row(self, k: int, i: int):
        """``mu^k_i`` with ``mu^k_0 = +inf``."""
        if i == 0:
            return INF
        return self.level(k).part(i)


def to_nested(pi: PlaneArray, shape: Shape | None = None) -> NestedPartitions:
    """``mu^k = {(i,j): pi_ij <= k}`` for ``0 <= k < max(pi)``."""
    if shape is None:
        shape = shape_of(pi.cells)
    if set(shape.cells()) != set(pi.cells):
        raise ValueError("array does not fill the given shape")
    if not validate_state(pi, AlphaSpec()):
        raise ValueError("not a reverse plane partition")
    top = pi.max()
    levels = []
    for k in range(top):
        levels.append(Shape(sum(1 for j in range(1, shape.part(i) + 1) if pi[(i, j)] <= k) for i in range(1, len(shape) + 1)))
    return NestedPartitions(tuple(levels), shape)


def from_nested(np_: NestedPartitions) -> PlaneArray:
    cells = np_.outer.cells()
    vals = []
    for c in cells:
        v = next((k for k, mu in enumerate(np_.levels) if c in mu), np_.N)
        vals.append(v)
    return PlaneArray(cells, vals)


def shape_of(cells: Iterable[Cell]) -> Shape:
    cells = set(cells)
    rows = []
    i = 1
    while (i, 1) in cells:
        j = 1
        while (i, j + 1) in cells:
            j += 1
        rows.append(j)
        i += 1
    s = Shape(rows)
    if set(s.cells()) != cells:
        raise ValueError("cell set is not a Young diagram")
    return s


def fiber_cells_ok(lam: Shape, mu: Shape) -> None:
    if not interior(lam).contains(mu):
        raise ValueError(f"mu={mu} is not contained in the interior {interior(lam)} of lambda={lam}")


def product_range(bounds: Sequence[int]) -> Iterator[tuple[int, ...]]:
    return itertools.product(*(range(b + 1) for b in bounds))
