"""Limit shapes of the kernel ``K^{lambda,mu}_sigma`` under diagonal scaling.

Scaling the boundary data as ``sigma ~ N a`` makes ``pi / N`` concentrate on the
minimiser of the strictly convex function

    F(x) = sum_{u in mu} sum_{u -> v} x_v h(x_u / x_v),  h(p) = p log p + (1 - p) log(1 - p),

where ``u -> v`` means that ``v`` is the cell below or to the right of ``u``.
Its critical points solve

    (x_{i+1,j} - x_ij)(x_{i,j+1} - x_ij) = (x_ij - x_{i-1,j})(x_ij - x_{i,j-1})

with ``x = 0`` off the positive quadrant.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor

from .shapes import AlphaSpec, Cell, Shape
from .simulation import sample_K, stream


def _shape(s) -> Shape:
    return s if isinstance(s, Shape) else Shape(s)


def h(p: float) -> float:
    """``p log p + (1-p) log(1-p)`` with ``0 log 0 = 0``."""
    out = 0.0
    if p > 0:
        out += p * math.log(p)
    if p < 1:
        out += (1 - p) * math.log1p(-p)
    return out


@dataclass
class LimitShapeProblem:
    lam: Shape
    mu: Shape
    a: dict[Cell, float]

    def __post_init__(self):
        self.lam, self.mu = _shape(self.lam), _shape(self.mu)
        if not self.lam.contains(self.mu):
            raise ValueError(f"{self.mu} is not contained in {self.lam}")
        missing = [c for c in self.boundary() if c not in self.a]
        if missing:
            raise ValueError(f"boundary values missing for {missing}")
        if any(self.a[c] <= 0 for c in self.boundary()):
            raise ValueError("boundary values must be strictly positive")
        self.a = {c: float(self.a[c]) for c in self.boundary()}

    @classmethod
    def from_values(cls, lam, mu, values: Sequence[float]) -> "LimitShapeProblem":
        """Boundary values listed in row-major order of ``lam / mu``."""
        lam, mu = _shape(lam), _shape(mu)
        cells = [c for c in lam.cells() if c not in set(mu.cells())]
        if len(values) != len(cells):
            raise ValueError(f"need {len(cells)} boundary values, got {len(values)}")
        return cls(lam, mu, dict(zip(cells, values)))

    def boundary(self) -> list[Cell]:
        inner = set(self.mu.cells())
        return [c for c in self.lam.cells() if c not in inner]

    def unknowns(self) -> list[Cell]:
        return self.mu.cells()

    def succ(self, u: Cell) -> list[Cell]:
        i, j = u
        cells = set(self.lam.cells())
        return [v for v in ((i + 1, j), (i, j + 1)) if v in cells]

    def pred(self, u: Cell) -> list[Cell]:
        """Cells ``t -> u`` in the positive quadrant (they lie in ``mu`` when ``u`` does)."""
        i, j = u
        return [t for t in ((i - 1, j), (i, j - 1)) if t[0] >= 1 and t[1] >= 1]

    def assemble(self, xs: np.ndarray) -> dict[Cell, float]:
        out = dict(self.a)
        out.update(zip(self.unknowns(), map(float, xs)))
        return out

    def initial_point(self) -> np.ndarray:
        """Half the smaller fixed successor, filled in reverse row-major order: strictly feasible."""
        x = dict(self.a)
        for u in reversed(self.unknowns()):
            succ = [x[v] for v in self.succ(u)]
            x[u] = 0.5 * min(succ)
        return np.array([x[u] for u in self.unknowns()])

    def feasible(self, xs: np.ndarray) -> bool:
        x = self.assemble(xs)
        for u in self.unknowns():
            if x[u] <= 0 or any(x[v] <= x[u] for v in self.succ(u)):
                return False
        return True

    # -- objective and derivatives --------------------------------------------------

    def F(self, xs: np.ndarray) -> float:
        x = self.assemble(xs)
        return math.fsum(x[v] * h(x[u] / x[v]) for u in self.unknowns() for v in self.succ(u))

    def gradient(self, xs: np.ndarray) -> np.ndarray:
        x = self.assemble(xs)
        g = np.empty(len(xs))
        for k, u in enumerate(self.unknowns()):
            xu = x[u]
            g[k] = (sum(math.log1p(-x[t] / xu) for t in self.pred(u))
                    - sum(math.log(x[v] / xu - 1) for v in self.succ(u)))
        return g

    def hessian(self, xs: np.ndarray) -> np.ndarray:
        x = self.assemble(xs)
        cells = self.unknowns()
        idx = {u: k for k, u in enumerate(cells)}
        H = np.zeros((len(cells), len(cells)))
        for k, u in enumerate(cells):
            xu = x[u]
            H[k, k] = (sum(x[t] / xu / (xu - x[t]) for t in self.pred(u))
                       + sum(x[v] / xu / (x[v] - xu) for v in self.succ(u)))
            for v in self.succ(u):
                if v in idx:
                    H[k, idx[v]] = H[idx[v], k] = -1.0 / (x[v] - xu)
        return H

    def residuals(self, xs: np.ndarray) -> np.ndarray:
        """Critical-point equations; a neighbour missing from the picture contributes a factor ``x_u``."""
        x = self.assemble(xs)
        out = np.empty(len(xs))
        for k, u in enumerate(self.unknowns()):
            i, j = u
            xu = x[u]
            right = 1.0
            for v in ((i + 1, j), (i, j + 1)):
                right *= x[v] - xu if v in x else xu
            left = 1.0
            for t in ((i - 1, j), (i, j - 1)):
                left *= xu - x.get(t, 0.0)
            out[k] = right - left
        return out


@dataclass
class LimitShape:
    x: dict[Cell, float]
    residual: float
    grad_norm: float
    hessian_pd: bool
    iterations: int
    method: str
    objective: float
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"x": {f"{i},{j}": v for (i, j), v in self.x.items()},
                           "residual": self.residual, "grad_norm": self.grad_norm,
                           "hessian_pd": self.hessian_pd, "iterations": self.iterations,
                           "method": self.method, "objective": self.objective, "notes": self.notes})


def _newton(prob: LimitShapeProblem, xs: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, int, bool]:
    f = prob.F(xs)
    for it in range(1, max_iter + 1):
        g = prob.gradient(xs)
        if np.abs(g).max() < tol:
            return xs, it - 1, True
        step = np.linalg.solve(prob.hessian(xs), -g)
        slope = float(g @ step)
        if slope >= 0:
            step, slope = -g, -float(g @ g)
        t = 1.0
        while True:
            trial = xs + t * step
            if prob.feasible(trial):
                ft = prob.F(trial)
                # near the optimum F stops resolving the decrease; accept feasible full steps there
                if ft <= f + 1e-4 * t * slope or (t == 1.0 and abs(slope) < 1e-20):
                    break
            t *= 0.5
            if t < 1e-30:
                return xs, it, False
        xs, f = trial, ft
    return xs, max_iter, bool(np.abs(prob.gradient(xs)).max() < tol)


def _bisection_sweeps(prob: LimitShapeProblem, xs: np.ndarray, sweeps: int = 500, tol: float = 1e-14) -> np.ndarray:
    """Gauss-Seidel: each coordinate's partial derivative is increasing, so bisect it to zero."""
    xs = xs.copy()
    cells = prob.unknowns()
    for _ in range(sweeps):
        moved = 0.0
        for k, u in enumerate(cells):
            x = prob.assemble(xs)
            lo = max([x[t] for t in prob.pred(u)] + [0.0])
            hi = min(x[v] for v in prob.succ(u))
            old = xs[k]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                xs[k] = mid
                if mid in (lo, hi):
                    break
                if prob.gradient(xs)[k] > 0:
                    hi = mid
                else:
                    lo = mid
            moved = max(moved, abs(xs[k] - old))
        if moved < tol:
            break
    return xs


def solve_limit_shape(prob: LimitShapeProblem, tol: float = 1e-13, max_iter: int = 100) -> LimitShape:
    """Damped Newton from a strictly feasible start; bisection sweeps if Newton stalls."""
    xs0 = prob.initial_point()
    xs, iters, ok = _newton(prob, xs0, tol, max_iter)
    method, notes = "newton", []
    if not ok:
        notes.append(f"newton stalled after {iters} iterations; bisection fallback")
        xs = _bisection_sweeps(prob, xs0)
        xs, more, ok = _newton(prob, xs, tol, max_iter)
        iters += more
        method = "bisection+newton"
    try:
        cho_factor(prob.hessian(xs))
        pd = True
    except LinAlgError:
        pd = False
    res = float(np.abs(prob.residuals(xs)).max()) if len(xs) else 0.0
    gn = float(np.abs(prob.gradient(xs)).max()) if len(xs) else 0.0
    if not ok:
        notes.append("gradient tolerance not reached")
    return LimitShape(prob.assemble(xs), res, gn, pd, iters, method, prob.F(xs), notes)


def minimality_spot_check(prob: LimitShapeProblem, sol: LimitShape, trials: int = 100, scale: float = 1e-2,
                          seed: int = 0) -> bool:
    """``F`` at the solution is no larger than at random feasible perturbations of it."""
    rng = stream(seed, 0, 0x1D9)
    xs = np.array([sol.x[u] for u in prob.unknowns()])
    f0 = prob.F(xs)
    done = 0
    while done < trials:
        trial = xs * (1 + scale * rng.standard_normal(len(xs)))
        if not prob.feasible(trial):
            continue
        done += 1
        if prob.F(trial) < f0 - 1e-15:
            return False
    return True


def hessian_fd_error(prob: LimitShapeProblem, xs: np.ndarray, eps: float = 1e-6) -> float:
    """Largest relative gap between the analytic Hessian and central differences of the gradient."""
    H = prob.hessian(xs)
    num = np.empty_like(H)
    for k in range(len(xs)):
        e = np.zeros(len(xs))
        e[k] = eps * xs[k]
        num[:, k] = (prob.gradient(xs + e) - prob.gradient(xs - e)) / (2 * e[k])
    return float(np.abs(num - H).max() / np.abs(H).max())


# ---------------------------------------------------------------------------
# concentration


def concentration_experiment(prob: LimitShapeProblem, N: int, reps: int, seed: int = 0,
                             alpha: AlphaSpec = AlphaSpec()) -> dict:
    """Sample ``pi ~ K`` with boundary ``round(N a)`` and compare ``pi / N`` with the limit shape.

    The limit shape is recomputed for the rounded boundary so that rounding
    does not enter the comparison.
    """
    sigma = {c: int(round(N * v)) for c, v in prob.a.items()}
    target = solve_limit_shape(LimitShapeProblem(prob.lam, prob.mu, {c: s / N for c, s in sigma.items()}))
    cells = prob.unknowns()
    rng = stream(seed, N, 0x1DB)
    samples = np.array([[sample_K(prob.lam, prob.mu, sigma, rng, alpha)[c] for c in cells] for _ in range(reps)],
                       dtype=float) / N
    xa = np.array([target.x[c] for c in cells])
    dev = np.abs(samples - xa).max(axis=1)
    return {"N": N, "reps": reps, "x_a": {f"{i},{j}": float(v) for (i, j), v in zip(cells, xa)},
            "mean": {f"{i},{j}": float(m) for (i, j), m in zip(cells, samples.mean(axis=0))},
            "mean_error": float(np.abs(samples.mean(axis=0) - xa).max()),
            "deviation_mean": float(dev.mean()),
            "deviation_quantiles": {q: float(np.quantile(dev, q)) for q in (0.5, 0.9, 0.99)}}


def deviation_slope(prob: LimitShapeProblem, Ns: Sequence[int] = (50, 100, 200, 400), reps: int = 2000,
                    seed: int = 0) -> dict:
    """Least-squares slope of ``log E max|pi/N - x^a|`` against ``log N`` (a CLT-scale heuristic, about -1/2)."""
    devs = [concentration_experiment(prob, N, reps, seed)["deviation_mean"] for N in Ns]
    slope = float(np.polyfit(np.log(Ns), np.log(devs), 1)[0])
    return {"N": list(Ns), "deviation": devs, "slope": slope}
