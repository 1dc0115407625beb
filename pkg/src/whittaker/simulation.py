"""Exact continuous-time simulation of the cell-decrement chains and related samplers.

Three engines share the same rates:

* ``gillespie``: one stream, total-rate clock plus a Fenwick tree over cells.
* ``next_reaction``: one stream per cell (keyed by seed, replica and cell
  coordinates).  Rates of a cell depend only on its upper and left
  neighbours, so restricting a run on ``lam`` to a subshape ``mu`` reproduces
  the run on ``mu`` event for event.
* batch engines vectorised over replicas with numpy, for statistical tests.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import coefficients as coeffs
from .operators import SparseOperator, corner_growth_as_cells
from .shapes import EMPTY, AlphaSpec, NestedPartitions, PlaneArray, Shape, from_nested, validate_state

Cell = tuple[int, int]

FIBER_CAP = 10 ** 6


def stream(seed: int, replica: int = 0, *key: int) -> np.random.Generator:
    """Counter-based Philox stream determined by ``(seed, replica, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica), *map(int, key)))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# configuration and records


@dataclass(frozen=True)
class StopRule:
    """``time`` stops at ``T``; ``absorb`` at zero total rate; ``cell`` when ``cell`` reaches 0."""

    kind: str = "absorb"
    T: float = math.inf
    cell: Cell | None = None

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        """``time:2.5``, ``absorb`` or ``absorb:50,1`` (stop when that cell hits 0)."""
        head, _, rest = text.partition(":")
        if head == "time":
            return cls("time", float(rest))
        if head == "absorb":
            if rest:
                i, j = (int(x) for x in rest.split(","))
                return cls("cell", cell=(i, j))
            return cls("absorb")
        raise ValueError(f"unknown stop rule {text!r}")


@dataclass
class SimConfig:
    shape: Shape
    mu: Shape = EMPTY
    alpha: AlphaSpec = field(default_factory=AlphaSpec)
    init: PlaneArray | int | None = None
    sigma: Mapping[Cell, int] | None = None
    stop: StopRule = field(default_factory=StopRule)
    seed: int = 0
    replicas: int = 1
    method: str = "next_reaction"

    def initial_state(self, replica: int = 0) -> PlaneArray:
        cells = [c for c in self.shape.cells() if c not in self.mu]
        if isinstance(self.init, PlaneArray):
            return self.init
        if isinstance(self.init, int):
            return PlaneArray(cells, [self.init] * len(cells))
        if self.sigma is not None:
            if self.mu.size:
                raise ValueError("K_sigma initial law is for the full shape; leave mu empty")
            raise ValueError("pass the boundary shape via sample_K and an explicit init")
        raise ValueError("no initial condition")


@dataclass
class PathRecord:
    times: list[float]
    cells: list[Cell]
    values: list[int]
    final: PlaneArray
    stopped_by: str
    end_time: float

    @property
    def events(self) -> int:
        return len(self.times)

    def state_at(self, initial: PlaneArray, t: float) -> PlaneArray:
        vals = dict(initial.items())
        for s, c, v in zip(self.times, self.cells, self.values):
            if s > t:
                break
            vals[c] = v
        return PlaneArray(initial.cells, [vals[c] for c in initial.cells])


# ---------------------------------------------------------------------------
# cell chain


class CellChain:
    """Mutable state of ``G^{lam,mu}``; entries outside the cell set read 0."""

    def __init__(self, state: PlaneArray, alpha: AlphaSpec):
        self.cells = list(state.cells)
        self.index = {c: k for k, c in enumerate(self.cells)}
        self.alpha = alpha
        self.vals = list(state.values)
        self.beta = [alpha.beta(i, j) for (i, j) in self.cells]
        self.left = [self.index.get((i, j - 1), -1) for (i, j) in self.cells]
        self.up = [self.index.get((i - 1, j), -1) for (i, j) in self.cells]
        self.dependents = [[k] + [self.index[d] for d in ((i, j + 1), (i + 1, j)) if d in self.index]
                           for k, (i, j) in enumerate(self.cells)]

    def rate(self, k: int) -> int:
        v = self.vals[k]
        left = self.vals[self.left[k]] if self.left[k] >= 0 else 0
        up = self.vals[self.up[k]] if self.up[k] >= 0 else 0
        r = (v - left) * (v - up + self.beta[k])
        if r < 0:
            raise ValueError(f"negative rate at {self.cells[k]}: state left the state space")
        return r

    def fire(self, k: int) -> None:
        self.vals[k] -= 1

    def snapshot(self) -> PlaneArray:
        return PlaneArray(self.cells, self.vals)


class Fenwick:
    """Prefix sums of non-negative integers with point updates and search."""

    def __init__(self, values: Sequence[int]):
        self.n = len(values)
        self.tree = [0] * (self.n + 1)
        self.raw = [0] * self.n
        for k, v in enumerate(values):
            self.set(k, v)

    def set(self, k: int, v: int) -> None:
        d = v - self.raw[k]
        self.raw[k] = v
        i = k + 1
        while i <= self.n:
            self.tree[i] += d
            i += i & -i

    def total(self) -> int:
        s, i = 0, self.n
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s

    def find(self, u: int) -> int:
        """Smallest ``k`` with ``raw[0] + ... + raw[k] > u``."""
        pos, step = 0, 1 << self.n.bit_length()
        while step:
            nxt = pos + step
            if nxt <= self.n and self.tree[nxt] <= u:
                pos = nxt
                u -= self.tree[nxt]
            step >>= 1
        return pos


def _stop_hit(chain: CellChain, stop: StopRule, k: int) -> bool:
    return stop.kind == "cell" and chain.cells[k] == stop.cell and chain.vals[k] == 0


def _run_gillespie(chain: CellChain, stop: StopRule, rng: np.random.Generator, record: bool) -> PathRecord:
    fw = Fenwick([chain.rate(k) for k in range(len(chain.cells))])
    t = 0.0
    times, cells, values = [], [], []
    if stop.kind == "cell" and chain.vals[chain.index[stop.cell]] == 0:
        return PathRecord(times, cells, values, chain.snapshot(), "cell", 0.0)
    while True:
        total = fw.total()
        if total == 0:
            return PathRecord(times, cells, values, chain.snapshot(), "absorbed", t if stop.kind != "time" else stop.T)
        dt = rng.standard_exponential() / total
        if t + dt > stop.T:
            return PathRecord(times, cells, values, chain.snapshot(), "time", stop.T)
        t += dt
        k = fw.find(int(rng.integers(total)))
        chain.fire(k)
        for d in chain.dependents[k]:
            fw.set(d, chain.rate(d))
        if record:
            times.append(t)
            cells.append(chain.cells[k])
            values.append(chain.vals[k])
        if _stop_hit(chain, stop, k):
            return PathRecord(times, cells, values, chain.snapshot(), "cell", t)


def _run_next_reaction(chain: CellChain, stop: StopRule, seed: int, replica: int, record: bool,
                       rate_override: Callable[[int], int] | None = None,
                       on_fire: Callable[[int], None] | None = None) -> PathRecord:
    """Next-reaction method with one unit-rate clock per cell.

    ``rate_override`` and ``on_fire`` let another state representation drive
    the same clocks (used for the nested-partition form of the chain).
    """
    rate = rate_override or chain.rate
    fire = on_fire or chain.fire
    n = len(chain.cells)
    rngs = [stream(seed, replica, i, j) for (i, j) in chain.cells]
    internal = [0.0] * n
    nxt = [rngs[k].standard_exponential() for k in range(n)]
    rates = [rate(k) for k in range(n)]
    last = [0.0] * n
    version = [0] * n
    heap = []
    for k in range(n):
        if rates[k] > 0:
            heapq.heappush(heap, (nxt[k] / rates[k], k, 0))
    t = 0.0
    times, cells, values = [], [], []
    if stop.kind == "cell" and chain.vals[chain.index[stop.cell]] == 0:
        return PathRecord(times, cells, values, chain.snapshot(), "cell", 0.0)
    while heap:
        tk, k, ver = heapq.heappop(heap)
        if ver != version[k]:
            continue
        if tk > stop.T:
            return PathRecord(times, cells, values, chain.snapshot(), "time", stop.T)
        t = tk
        fire(k)
        internal[k] = nxt[k]
        last[k] = t
        nxt[k] += rngs[k].standard_exponential()
        if record:
            times.append(t)
            cells.append(chain.cells[k])
            values.append(chain.vals[k])
        for d in chain.dependents[k]:
            if d != k:
                internal[d] += rates[d] * (t - last[d])
                last[d] = t
            rates[d] = rate(d)
            version[d] += 1
            if rates[d] > 0:
                heapq.heappush(heap, (t + (nxt[d] - internal[d]) / rates[d], d, version[d]))
        if _stop_hit(chain, stop, k):
            return PathRecord(times, cells, values, chain.snapshot(), "cell", t)
    return PathRecord(times, cells, values, chain.snapshot(), "absorbed", t if stop.kind != "time" else stop.T)


def simulate(config: SimConfig, replica: int = 0, record: bool = True) -> PathRecord:
    """One exact path of ``G^{lam,mu}`` from the configured initial state."""
    init = config.initial_state(replica)
    if not validate_state(init, config.alpha, with_omega=False):
        raise ValueError(f"initial state {init} is not valid")
    chain = CellChain(init, config.alpha)
    if config.stop.kind == "cell" and config.stop.cell not in chain.index:
        raise ValueError(f"stop cell {config.stop.cell} is not in the shape")
    if config.method == "gillespie":
        return _run_gillespie(chain, config.stop, stream(config.seed, replica), record)
    if config.method == "next_reaction":
        return _run_next_reaction(chain, config.stop, config.seed, replica, record)
    raise ValueError(f"unknown method {config.method!r}")


def simulate_nested(nested: NestedPartitions, stop: StopRule, seed: int, replica: int = 0) -> PathRecord:
    """The same chain driven through nested partitions and corner-growth rates.

    Rates come from the corner-growth formula on ``nested``; clocks and
    bookkeeping are those of the next-reaction engine, so with equal seeds the
    event sequence matches the cell-array run exactly.
    """
    levels = [list(mu.rows) + [0] * (len(nested.outer) - len(mu)) for mu in nested.levels]
    state = {"nested": nested, "rates": corner_growth_as_cells(nested)}
    cells_arr = nested.outer.cells()
    chain = CellChain(from_nested(nested), AlphaSpec())

    def rate(k: int) -> int:
        return state["rates"].get(cells_arr[k], 0)

    def fire(k: int) -> None:
        i, j = cells_arr[k]
        # the entry at (i, j) drops from v to v - 1: row i of level v - 1 grows to j
        v = chain.vals[k]
        level = v - 1
        if levels[level][i - 1] != j - 1:
            raise AssertionError(f"corner move at {(i, j)} is not a box addition on level {level}")
        levels[level][i - 1] = j
        chain.vals[k] -= 1
        nested_new = NestedPartitions(tuple(Shape(row) for row in levels), nested.outer)
        state["nested"] = nested_new
        state["rates"] = corner_growth_as_cells(nested_new)

    return _run_next_reaction(chain, stop, seed, replica, True, rate, fire)


# ---------------------------------------------------------------------------
# batch engines


def _cell_tables(cells: Sequence[Cell], alpha: AlphaSpec):
    index = {c: k for k, c in enumerate(cells)}
    zero = len(cells)
    left = np.array([index.get((i, j - 1), zero) for (i, j) in cells])
    up = np.array([index.get((i - 1, j), zero) for (i, j) in cells])
    beta = np.array([alpha.beta(i, j) for (i, j) in cells], dtype=np.int64)
    return left, up, beta


def _batch_rates(vals: np.ndarray, left, up, beta) -> np.ndarray:
    padded = np.concatenate([vals, np.zeros((vals.shape[0], 1), dtype=vals.dtype)], axis=1)
    return (vals - padded[:, left]) * (vals - padded[:, up] + beta)


def simulate_cells_batch(cells: Sequence[Cell], alpha: AlphaSpec, init: np.ndarray, T: float,
                         rng: np.random.Generator) -> np.ndarray:
    """States at time ``T`` of independent copies of the cell chain; ``init`` has one row per replica."""
    vals = np.array(init, dtype=np.int64, copy=True)
    left, up, beta = _cell_tables(cells, alpha)
    t = np.zeros(vals.shape[0])
    active = np.arange(vals.shape[0])
    while active.size:
        rates = _batch_rates(vals[active], left, up, beta)
        total = rates.sum(axis=1)
        live = total > 0
        dt = np.full(active.size, np.inf)
        dt[live] = rng.standard_exponential(int(live.sum())) / total[live]
        t_new = t[active] + dt
        go = t_new <= T
        active, rates, total, t_new = active[go], rates[go], total[go], t_new[go]
        if not active.size:
            break
        t[active] = t_new
        u = rng.random(active.size) * total
        pick = (np.cumsum(rates, axis=1) > u[:, None]).argmax(axis=1)
        vals[active, pick] -= 1
    return vals


def simulate_operator_batch(op: SparseOperator, order: Sequence, start: np.ndarray, T: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Indices (into ``order``) at time ``T`` of copies of the finite chain ``op`` started at ``start``."""
    Q = op.to_dense(order)
    out_rate = -np.diag(Q).copy()
    jump = np.where(out_rate[:, None] > 0, np.clip(Q, 0, None) / np.where(out_rate > 0, out_rate, 1)[:, None], 0)
    np.fill_diagonal(jump, 0.0)
    cum = np.cumsum(jump, axis=1)
    state = np.array(start, dtype=np.int64, copy=True)
    t = np.zeros(state.size)
    active = np.arange(state.size)
    while active.size:
        q = out_rate[state[active]]
        live = q > 0
        dt = np.full(active.size, np.inf)
        dt[live] = rng.standard_exponential(int(live.sum())) / q[live]
        t_new = t[active] + dt
        go = t_new <= T
        active, t_new = active[go], t_new[go]
        if not active.size:
            break
        t[active] = t_new
        rows = cum[state[active]]
        u = rng.random(active.size) * rows[:, -1]
        state[active] = (rows > u[:, None]).argmax(axis=1)
    return state


def simulate_rates(rate_fn: Callable[[tuple], Mapping[tuple, float]], start: tuple, T: float,
                   rng: np.random.Generator, max_events: int | None = None) -> tuple[tuple, list]:
    """Generic jump chain from a rate function (used for ``M^r``, ``R`` and Doob chains)."""
    x, t, path = tuple(start), 0.0, []
    while max_events is None or len(path) < max_events:
        moves = [(y, float(v)) for y, v in rate_fn(x).items() if y != x and v > 0]
        total = sum(v for _, v in moves)
        if total == 0:
            break
        dt = rng.standard_exponential() / total
        if t + dt > T:
            break
        t += dt
        u = rng.random() * total
        acc = 0.0
        for y, v in moves:
            acc += v
            if u < acc:
                break
        x = y
        path.append((t, x))
    return x, path


def operator_rate_fn(op: SparseOperator) -> Callable[[tuple], dict]:
    return lambda x: op.offdiag(x)


# ---------------------------------------------------------------------------
# the kernel K


def is_staircase_pair(lam: Shape, mu: Shape) -> int | None:
    """``r`` when ``(lam, mu) = ((r, ..., 1), (r-1, ..., 1))``, else ``None``."""
    r = len(lam)
    if r and lam.rows == tuple(range(r, 0, -1)) and mu.rows == tuple(range(r - 1, 0, -1)):
        return r
    return None


def K_distribution(lam: Shape, mu: Shape, sigma: Mapping[Cell, int], alpha: AlphaSpec = AlphaSpec(),
                   cap: int = FIBER_CAP) -> dict[PlaneArray, Fraction]:
    """Exact law ``K^{lam,mu}_sigma`` by fiber enumeration."""
    try:
        weights = {pi: coeffs.W_general(lam, mu, alpha, pi) for pi in coeffs.fiber(lam, mu, sigma, alpha, limit=cap)}
    except OverflowError as exc:
        raise ValueError(f"fiber larger than {cap} states; exact sampling refused") from exc
    total = sum(weights.values(), Fraction(0))
    if total == 0:
        raise RuntimeError(f"empty fiber for sigma={dict(sigma)}")
    return {pi: w / total for pi, w in weights.items() if w}


def K_staircase_distribution(r: int, alpha: AlphaSpec, n: Sequence[int]) -> dict[PlaneArray, Fraction]:
    """``K^r_n(pi) = w_r(pi) / a_r(n)`` from the staircase weights."""
    a = coeffs.a_coeff(r, alpha, n)
    if a == 0:
        raise ValueError(f"n={tuple(n)} lies outside the cone")
    out = {}
    for pi in coeffs.staircase_fiber(r, alpha, n):
        w = coeffs.w_weight(r, alpha, pi)
        if w:
            out[pi] = w / a
    return out


def _choose(rng: np.random.Generator, items: list, probs: list[Fraction]):
    # normalise exactly first: the weights themselves can overflow a float
    total = sum(probs)
    p = np.array([float(x / total) for x in probs])
    return items[int(rng.choice(len(items), p=p / p.sum()))]


@lru_cache(maxsize=4096)
def _level_conditional(level: int, alpha: AlphaSpec, cur: tuple) -> tuple[list, np.ndarray]:
    ks = [tuple(int(v) for v in k) for k in np.ndindex(*(x + 1 for x in cur[:-1]))]
    w = [coeffs.q_kernel(level, alpha.truncated(level), cur, k) * coeffs.a_coeff(level - 1, alpha, k) for k in ks]
    pairs = [(k, x) for k, x in zip(ks, w) if x]
    if not pairs:
        raise RuntimeError(f"no admissible level below {cur}")
    total = sum(x for _, x in pairs)
    p = np.array([float(x / total) for _, x in pairs])
    return [k for k, _ in pairs], p / p.sum()


def sample_K_staircase(r: int, alpha: AlphaSpec, n: Sequence[int], rng: np.random.Generator) -> PlaneArray:
    """Sequential conditionals ``P(k | n) = q_r(n, k) a_{r-1}(k) / a_r(n)`` down the staircase."""
    vals: dict[Cell, int] = {}
    cur = tuple(int(x) for x in n)
    for level in range(r, 0, -1):
        for i in range(1, level + 1):
            vals[(i, level - i + 1)] = cur[i - 1]
        if level == 1:
            break
        ks, p = _level_conditional(level, alpha, cur)
        cur = ks[int(rng.choice(len(ks), p=p))]
    cells = [c for c in Shape(range(r, 0, -1)).cells()]
    return PlaneArray(cells, [vals[c] for c in cells])


def sample_K(lam: Shape, mu: Shape, sigma: Mapping[Cell, int], rng: np.random.Generator,
             alpha: AlphaSpec = AlphaSpec(), method: str = "auto") -> PlaneArray:
    """Exact sample from ``K^{lam,mu}_sigma``."""
    r = is_staircase_pair(lam, mu)
    if method == "sequential" or (method == "auto" and r is not None):
        if r is None:
            raise ValueError("sequential sampling needs a staircase pair")
        return sample_K_staircase(r, alpha, [sigma[(i, r - i + 1)] for i in range(1, r + 1)], rng)
    dist = K_distribution(lam, mu, sigma, alpha)
    items = list(dist)
    return _choose(rng, items, [dist[x] for x in items])


# ---------------------------------------------------------------------------
# entrance law surrogate and monotone coupling


def coupled_runs(lam: Shape, alpha: AlphaSpec, Ns: Sequence[int], T: float, rng: np.random.Generator,
                 record: bool = False):
    """Copies of ``G^lam`` started from ``pi = N`` for each ``N`` in ``Ns``, driven by shared randomness.

    Each cell rings at the largest of its current rates across copies; a
    shared uniform decides which copies move.  Every copy is exactly a
    ``G^lam`` chain, and ordered starts stay ordered because a lower entry
    whose neighbours are lower has the higher rate.
    """
    cells = lam.cells()
    init = np.array([[N] * len(cells) for N in Ns], dtype=np.int64)
    vals = init.copy()
    left, up, beta = _cell_tables(cells, alpha)
    t = 0.0
    history = [(0.0, vals.copy())] if record else None
    while True:
        rates = _batch_rates(vals, left, up, beta)
        ring = rates.max(axis=0)
        total = int(ring.sum())
        if total == 0:
            break
        dt = rng.standard_exponential() / total
        if t + dt > T:
            break
        t += dt
        k = int((np.cumsum(ring) > rng.random() * total).argmax())
        u = rng.random() * ring[k]
        vals[:, k] -= (u < rates[:, k]).astype(np.int64)
        if record:
            history.append((t, vals.copy()))
    states = [PlaneArray(cells, [int(v) for v in row]) for row in vals]
    return (states, history) if record else states


def entrance_surrogate(lam: Shape, alpha: AlphaSpec, N: int, t: float, rng: np.random.Generator) -> PlaneArray:
    """State at time ``t`` from ``pi = N``: a finite-``N`` stand-in for the start at infinity."""
    return coupled_runs(lam, alpha, [N], t, rng)[0]


def entrance_ks(lam: Shape, alpha: AlphaSpec, N1: int, N2: int, t: float, replicas: int, seed: int) -> dict:
    """Two-sample KS distance of each boundary cell at time ``t`` between starts ``N1`` and ``N2``."""
    cells = lam.cells()
    boundary = [c for c in cells if (c[0], c[1] + 1) not in lam or (c[0] + 1, c[1]) not in lam]
    out = {}
    samples = {}
    for N in (N1, N2):
        rng = stream(seed, N)
        init = np.full((replicas, len(cells)), N, dtype=np.int64)
        samples[N] = simulate_cells_batch(cells, alpha, init, t, rng)
    for c in boundary:
        k = cells.index(c)
        out[c] = float(stats.ks_2samp(samples[N1][:, k], samples[N2][:, k]).statistic)
    return out


# ---------------------------------------------------------------------------
# transition probabilities by uniformization


def transient_probs(L: SparseOperator, start, t: float, order: Sequence | None = None,
                    tol: float = 1e-12) -> tuple[np.ndarray, list, float]:
    """Row ``p_t(start, .)`` of a finite conservative generator.

    Returns ``(p, order, defect)`` where ``defect`` is the Poisson tail
    mass left out of the truncated series (an upper bound on the total
    variation error).
    """
    order = list(order if order is not None else L.space.states)
    Q = L.to_csr(order)
    diag = -Q.diagonal()
    lam = float(diag.max()) if diag.size else 0.0
    p0 = np.zeros(len(order))
    p0[order.index(start)] = 1.0
    if lam == 0 or t == 0:
        return p0, order, 0.0
    mean = lam * t
    K = int(stats.poisson.isf(tol / 2, mean)) + 1
    while stats.poisson.sf(K, mean) > tol / 2:
        K += 1
    weights = stats.poisson.pmf(np.arange(K + 1), mean)
    PT = (Q / lam).T.tocsr()
    v = p0.copy()
    out = weights[0] * v
    for k in range(1, K + 1):
        v = v + PT @ v
        out += weights[k] * v
    defect = float(stats.poisson.sf(K, mean))
    return out, order, defect


# ---------------------------------------------------------------------------
# rendering


def render_heightmap(pi: PlaneArray, path: str | Path, maxval: int | None = None, svg: str | Path | None = None) -> Path:
    """Write ``pi`` as a plain PGM (P2): row ``i`` is image row ``i``, pixel value ``pi_ij``."""
    rows = max(i for i, _ in pi.cells)
    cols = max(j for _, j in pi.cells)
    top = max(int(maxval if maxval is not None else pi.max()), 1)
    lines = ["P2", f"{cols} {rows}", str(top)]
    for i in range(1, rows + 1):
        lines.append(" ".join(str(int(pi[(i, j)]) if (i, j) in pi else 0) for j in range(1, cols + 1)))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    if svg is not None:
        render_svg(pi, svg, top)
    return path


def read_pgm(path: str | Path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines() if not line.startswith("#") for t in line.split()]
    if tokens[0] != "P2":
        raise ValueError("not a plain PGM file")
    w, h, top = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(x) for x in tokens[4:4 + w * h]]).reshape(h, w)
    if data.max(initial=0) > top:
        raise ValueError("pixel exceeds maxval")
    return data


def render_svg(pi: PlaneArray, path: str | Path, maxval: int, scale: int = 8, levels: int = 10) -> Path:
    """Grey cells plus contour segments between cells on opposite sides of each level."""
    top = max(maxval, 1)
    parts = []
    for (i, j) in pi.cells:
        g = int(255 * pi[(i, j)] / top)
        parts.append(f'<rect x="{(j - 1) * scale}" y="{(i - 1) * scale}" width="{scale}" height="{scale}" '
                     f'fill="rgb({g},{g},{g})"/>')
    step = max(top // levels, 1)
    for (i, j) in pi.cells:
        v = pi[(i, j)] // step
        if (i, j + 1) in pi and pi[(i, j + 1)] // step != v:
            x = j * scale
            parts.append(f'<line x1="{x}" y1="{(i - 1) * scale}" x2="{x}" y2="{i * scale}" stroke="red"/>')
        if (i + 1, j) in pi and pi[(i + 1, j)] // step != v:
            y = i * scale
            parts.append(f'<line x1="{(j - 1) * scale}" y1="{y}" x2="{j * scale}" y2="{y}" stroke="red"/>')
    rows = max(i for i, _ in pi.cells)
    cols = max(j for _, j in pi.cells)
    path = Path(path)
    path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * scale}" height="{rows * scale}">'
                    + "".join(parts) + "</svg>\n")
    return path


def figure_run(n: int = 50, init: int = 50, seed: int = 42, method: str = "next_reaction") -> PathRecord:
    """The ``n x n`` run started from ``init`` and stopped when ``pi_{n,1}`` first hits 0."""
    cfg = SimConfig(Shape([n] * n), init=init, stop=StopRule("cell", cell=(n, 1)), seed=seed, method=method)
    return simulate(cfg, record=True)


# ---------------------------------------------------------------------------
# statistical check of the Markov projection


def _gof(counts: np.ndarray, probs: np.ndarray) -> float:
    """Chi-square goodness-of-fit p-value, pooling cells with expected count below 5."""
    n = counts.sum()
    exp = probs * n
    keep = exp >= 5
    c = list(counts[keep]) + ([counts[~keep].sum()] if (~keep).any() else [])
    e = list(exp[keep]) + ([exp[~keep].sum()] if (~keep).any() else [])
    c, e = np.array(c, float), np.array(e, float)
    e *= c.sum() / e.sum()
    return float(stats.chisquare(c, e).pvalue) if len(c) > 1 else 1.0


def projection_chi2(lam: Shape, mu: Shape, alpha: AlphaSpec, sigma0: Sequence[int], t: float,
                    replicas: int, seed: int) -> dict:
    """Boundary at time ``t`` of the fine chain from ``K_sigma0`` versus the ``L`` chain from ``sigma0``.

    Returns chi-square p-values for both simulated samples against the exact
    law ``p_t(sigma0, .)`` and for the two samples against each other.
    """
    from .intertwining import build_rpp_system
    from .operators import doob_transform

    bcells = [c for c in lam.cells() if c not in mu]
    sysm = build_rpp_system(lam, mu, alpha, dict(zip(bcells, sigma0)))
    s0 = tuple(int(v) for v in sigma0)
    order = sysm.sigma_space.states
    L = doob_transform(sysm.H, sysm.Lam.row_totals())
    exact, _, _ = transient_probs(L, s0, t, order)
    K0 = sysm.Lam.normalized()[s0]
    fine = list(K0)
    rng = stream(seed, 0)
    pick = rng.choice(len(fine), size=replicas, p=np.array([float(K0[x]) for x in fine]))
    cells = list(sysm.full_space.cells)
    init = np.array([fine[k] for k in pick], dtype=np.int64)
    end = simulate_cells_batch(cells, alpha, init, t, stream(seed, 1))
    pos = [cells.index(c) for c in bcells]
    sidx = {s: i for i, s in enumerate(order)}
    fine_counts = np.zeros(len(order), dtype=np.int64)
    for row in end[:, pos]:
        fine_counts[sidx[tuple(int(v) for v in row)]] += 1
    L_end = simulate_operator_batch(L, order, np.full(replicas, sidx[s0]), t, stream(seed, 2))
    L_counts = np.bincount(L_end, minlength=len(order))
    both = np.vstack([fine_counts, L_counts])
    both = both[:, both.sum(axis=0) > 0]
    return {
        "p_fine_vs_exact": _gof(fine_counts, exact),
        "p_L_vs_exact": _gof(L_counts, exact),
        "p_fine_vs_L": float(stats.chi2_contingency(both).pvalue) if both.shape[1] > 1 else 1.0,
        "states": len(order),
    }
