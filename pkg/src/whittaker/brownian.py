"""Imaginary exponential functionals of Brownian motion and their duality with the chains.

With ``Y_k(t) = exp(i(B_k(t) - B_{k+1}(t)))`` and ``Z_k(t) = int_0^t Y_k``, the
transition probabilities of ``L^r`` and ``M^r`` are moments of ``Z`` and of the
iterated integral ``U^r``.  Everything here is plain Monte Carlo on a time grid.
``Y`` is exact at grid points, and only the time integrals carry quadrature
error.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from . import coefficients as coeffs
from .operators import build_L_r, build_M
from .shapes import AlphaSpec, staircase
from .simulation import simulate_cells_batch, stream, transient_probs

CHUNK = 8192
BLOCK = 256


@dataclass
class PathSample:
    """Values of ``Y``, ``Z`` (shape ``(paths, len(times), r)``) and ``U^r`` at checkpoint times."""

    times: tuple[float, ...]
    Y: np.ndarray
    Z: np.ndarray
    U: np.ndarray | None
    modulus_drift: float


def _grid(t: float, dt: float, times: Sequence[float] | None) -> tuple[int, list[int]]:
    if dt <= 0 or dt > t:
        raise ValueError("need 0 < dt <= t")
    times = [t] if times is None else sorted(times)
    steps = [int(round(s / dt)) for s in times]
    for s, k in zip(times, steps):
        if k == 0 or abs(k * dt - s) > 1e-9 * max(1.0, s):
            raise ValueError(f"checkpoint {s} is not a positive multiple of dt={dt}")
    return steps[-1], steps


def _simulate_chunk(r: int, dt: float, n_steps: int, checkpoints: list[int], paths: int,
                    rng: np.random.Generator, drift: np.ndarray, want_U: bool):
    """Advance ``paths`` copies through ``n_steps`` grid steps in time blocks."""
    c = paths
    # B_k - B_{k+1} has increments with covariance dt (2 on the diagonal, -1 off it)
    cov = 2 * np.eye(r) - np.eye(r, k=1) - np.eye(r, k=-1)
    chol = np.linalg.cholesky(cov * dt)
    D = np.zeros((c, r))
    Y = np.ones((c, r), dtype=complex)
    Z = np.zeros((c, r), dtype=complex)
    # U[k] holds U^k; U^0 = 1
    U = [np.ones(c, dtype=complex)] + [np.zeros(c, dtype=complex) for _ in range(r)] if want_U else None
    nchk = len(checkpoints)
    outY = np.empty((c, nchk, r), dtype=complex)
    outZ = np.empty((c, nchk, r), dtype=complex)
    outU = np.empty((c, nchk), dtype=complex) if want_U else None
    drift_err = 0.0
    done, ci = 0, 0
    while done < n_steps:
        b = min(BLOCK, n_steps - done)
        dD = rng.standard_normal((c, b, r)) @ chol.T
        Dblk = D[:, None, :] + np.cumsum(dD, axis=1)
        Yblk = np.empty(Dblk.shape, dtype=complex)
        np.cos(Dblk, out=Yblk.real)
        np.sin(Dblk, out=Yblk.imag)
        if drift.any():
            s = dt * np.arange(done + 1, done + b + 1)
            Yblk *= np.exp(drift[None, None, :] * s[None, :, None])
        else:
            drift_err = max(drift_err, float(np.abs(np.abs(Yblk[:, -1]) - 1).max()))
        Ypad = np.concatenate([Y[:, None, :], Yblk], axis=1)

        def Z_at(j: int) -> np.ndarray:
            # trapezoid from the previous block end to grid point j of this block
            return Z + dt * (Ypad[:, :j + 2].sum(axis=1) - 0.5 * (Ypad[:, 0] + Ypad[:, j + 1]))

        if want_U:
            Ublks = [np.ones((c, b), dtype=complex)]
            for k in range(1, r + 1):
                gpad = np.concatenate([(U[k - 1] * Y[:, k - 1])[:, None], Ublks[k - 1] * Yblk[:, :, k - 1]], axis=1)
                Ublks.append(U[k][:, None] + dt * np.cumsum(0.5 * (gpad[:, :-1] + gpad[:, 1:]), axis=1))
            U = [u[:, -1] for u in Ublks]
            Ublk = Ublks[r]
        while ci < nchk and checkpoints[ci] <= done + b:
            j = checkpoints[ci] - done - 1
            outY[:, ci] = Yblk[:, j]
            outZ[:, ci] = Z_at(j)
            if want_U:
                outU[:, ci] = Ublk[:, j]
            ci += 1
        D, Y, Z = Dblk[:, -1], Yblk[:, -1], Z_at(b - 1)
        done += b
    return outY, outZ, outU, drift_err


def path_chunks(r: int, t: float, dt: float, paths: int, seed: int, alpha: Sequence[float] = (),
                want_U: bool = False, times: Sequence[float] | None = None,
                threads: int = 1, chunk: int = CHUNK) -> Iterator[PathSample]:
    """Yield simulated chunks; chunk ``c`` always uses the stream ``(seed, c)`` so results do not depend on ``threads``."""
    n_steps, checkpoints = _grid(t, dt, times)
    tt = tuple(k * dt for k in checkpoints)
    drift = np.array([float(alpha[k]) if k < len(alpha) else 0.0 for k in range(r)])
    sizes = [min(chunk, paths - s) for s in range(0, paths, chunk)]

    def work(ci: int) -> PathSample:
        rng = stream(seed, ci, 0xB1)
        Y, Z, U, err = _simulate_chunk(r, dt, n_steps, checkpoints, sizes[ci], rng, drift, want_U)
        return PathSample(tt, Y, Z, U, err)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            yield from pool.map(work, range(len(sizes)))
    else:
        for ci in range(len(sizes)):
            yield work(ci)


def _concat(samples: list[PathSample]) -> PathSample:
    U = np.concatenate([s.U for s in samples]) if samples[0].U is not None else None
    return PathSample(samples[0].times, np.concatenate([s.Y for s in samples]),
                      np.concatenate([s.Z for s in samples]), U,
                      max(s.modulus_drift for s in samples))


def simulate_Z(r: int, t: float, dt: float, paths: int, seed: int = 0, alpha: Sequence[float] = (),
               times: Sequence[float] | None = None) -> PathSample:
    """``Y`` and ``Z`` at time ``t`` (or at each of ``times``) for every path."""
    return _concat(list(path_chunks(r, t, dt, paths, seed, alpha, times=times)))


def simulate_U(r: int, t: float, dt: float, paths: int, seed: int = 0,
               times: Sequence[float] | None = None) -> PathSample:
    """As :func:`simulate_Z` and also ``U^r`` by the iterated trapezoid recursion."""
    return _concat(list(path_chunks(r, t, dt, paths, seed, want_U=True, times=times)))


# ---------------------------------------------------------------------------
# estimates


@dataclass
class Estimate:
    """Complex sample mean with componentwise standard errors."""

    mean: complex
    stderr: complex
    count: int
    seed: int

    def z(self, oracle: complex) -> float:
        """Largest componentwise ``|mean - oracle| / stderr``."""
        out = 0.0
        for d, se in ((self.mean.real - oracle.real, self.stderr.real),
                      (self.mean.imag - complex(oracle).imag, self.stderr.imag)):
            if se > 0:
                out = max(out, abs(d) / se)
            elif abs(d) > 1e-12:
                out = math.inf
        return out

    def to_dict(self) -> dict:
        return {"mean": [self.mean.real, self.mean.imag], "stderr": [self.stderr.real, self.stderr.imag],
                "count": self.count, "seed": self.seed}


class _Moments:
    """Running sums of real and imaginary parts and their squares, one column per statistic."""

    def __init__(self, k: int):
        self.parts: list[np.ndarray] = []
        self.k = k
        self.n = 0

    def add(self, values: np.ndarray) -> None:
        v = np.asarray(values, dtype=complex).reshape(len(values), self.k)
        # np.sum reduces pairwise
        self.parts.append(np.stack([v.real.sum(0), v.imag.sum(0),
                                    (v.real ** 2).sum(0), (v.imag ** 2).sum(0)]))
        self.n += len(v)

    def estimates(self, seed: int) -> list[Estimate]:
        stacked = np.stack(self.parts)
        S = np.array([[math.fsum(stacked[:, a, j]) for j in range(self.k)] for a in range(4)])
        n = self.n
        out = []
        for j in range(self.k):
            mr, mi = S[0, j] / n, S[1, j] / n
            vr = max(S[2, j] / n - mr * mr, 0.0) * n / max(n - 1, 1)
            vi = max(S[3, j] / n - mi * mi, 0.0) * n / max(n - 1, 1)
            out.append(Estimate(complex(mr, mi), complex(math.sqrt(vr / n), math.sqrt(vi / n)), n, seed))
        return out


def mc_expectations(r: int, t: float, dt: float, paths: int, seed: int,
                    statistics: Callable[[PathSample], np.ndarray], k: int, alpha: Sequence[float] = (),
                    want_U: bool = False, times: Sequence[float] | None = None,
                    threads: int = 1) -> list[Estimate]:
    """Means of ``k`` statistics computed chunk by chunk (``statistics`` returns ``(paths, k)``)."""
    acc = _Moments(k)
    for sample in path_chunks(r, t, dt, paths, seed, alpha, want_U, times, threads):
        acc.add(statistics(sample))
    return acc.estimates(seed)


@dataclass
class DualityReport:
    name: str
    estimate: Estimate
    oracle: complex
    z: float
    ok: bool
    details: dict = field(default_factory=dict)

    def __str__(self) -> str:
        e = self.estimate
        return (f"{'PASS' if self.ok else 'FAIL'} {self.name}: MC {e.mean.real:.6f}{e.mean.imag:+.6f}i "
                f"+- {e.stderr.real:.2e}, oracle {self.oracle.real:.6f}, z={self.z:.2f}")

    def to_json(self) -> str:
        d = {"name": self.name, "estimate": self.estimate.to_dict(),
             "stderr": [self.estimate.stderr.real, self.estimate.stderr.imag],
             "oracle": [complex(self.oracle).real, complex(self.oracle).imag],
             "z": self.z, "ok": self.ok, "details": self.details}
        return json.dumps(d)


def _report(name: str, est: Estimate, oracle: complex, zmax: float, **details) -> DualityReport:
    z = est.z(oracle)
    return DualityReport(name, est, complex(oracle), z, z < zmax, details)


def _monomial(Y: np.ndarray, Z: np.ndarray, ypow: Sequence[int], zpow: Sequence[int]) -> np.ndarray:
    out = np.ones(Y.shape[0], dtype=complex)
    for k, (a, b) in enumerate(zip(ypow, zpow)):
        if a:
            out *= Y[:, k] ** a
        if b:
            out *= Z[:, k] ** b
    return out


def transition_prob_L(r: int, n: Sequence[int], m: Sequence[int], t: float) -> float:
    """``p_t(n, m)`` for ``L^r`` with ``alpha = 0`` by uniformization."""
    L = build_L_r(r, AlphaSpec(), tuple(n))
    p, order, _ = transient_probs(L, tuple(n), t)
    return float(p[order.index(tuple(m))])


def duality_check_L(r: int, n: Sequence[int], m: Sequence[int], t: float = 1.0, paths: int = 100_000,
                    dt: float = 1e-3, seed: int = 0, threads: int = 1, zmax: float = 3.0) -> DualityReport:
    """``p_t(n, m) = a(m)/a(n) E[Y^{-n} Z^{n-m}] / (n-m)!`` against uniformization."""
    n, m = tuple(n), tuple(m)
    if len(n) != r or len(m) != r or any(b > a for a, b in zip(n, m)):
        raise ValueError("need n >= m componentwise in Z_+^r")
    alpha = AlphaSpec()
    scale = float(coeffs.a_coeff(r, alpha, m) / coeffs.a_coeff(r, alpha, n)) / coeffs.prod_fact(
        a - b for a, b in zip(n, m))
    ypow = [-a for a in n]
    zpow = [a - b for a, b in zip(n, m)]

    def stat(s: PathSample):
        return scale * _monomial(s.Y[:, -1], s.Z[:, -1], ypow, zpow)

    est = mc_expectations(r, t, dt, paths, seed, stat, 1, threads=threads)[0]
    return _report(f"L^{r} p_t({n},{m})", est, transition_prob_L(r, n, m, t), zmax, t=t, dt=dt)


def absorption_check_L(r: int, n: Sequence[int], t: float = 1.0, paths: int = 100_000, dt: float = 1e-3,
                       seed: int = 0, threads: int = 1, zmax: float = 3.0) -> DualityReport:
    """``p_t(n, 0) = E Z(t)^n / (a(n) n!)``, the form without ``Y``."""
    n = tuple(n)
    scale = 1.0 / float(coeffs.a_coeff(r, AlphaSpec(), n)) / coeffs.prod_fact(n)

    def stat(s: PathSample):
        return scale * _monomial(s.Y[:, -1], s.Z[:, -1], [0] * r, n)

    est = mc_expectations(r, t, dt, paths, seed, stat, 1, threads=threads)[0]
    return _report(f"L^{r} p_t({n},0) via E Z^n", est, transition_prob_L(r, n, (0,) * r, t), zmax)


def vanishing_moment(r: int, n: Sequence[int], l: Sequence[int], t: float = 1.0, paths: int = 100_000,
                     dt: float = 1e-3, seed: int = 0, threads: int = 1, zmax: float = 3.0) -> DualityReport:
    """``E[Y^{-n} Z^l] = 0`` when ``l`` is not below ``n``."""
    if all(b <= a for a, b in zip(n, l)):
        raise ValueError("this identity is for l not <= n")

    def stat(s: PathSample):
        return _monomial(s.Y[:, -1], s.Z[:, -1], [-a for a in n], l)

    est = mc_expectations(r, t, dt, paths, seed, stat, 1, threads=threads)[0]
    return _report(f"E[Y^-{tuple(n)} Z^{tuple(l)}] = 0", est, 0.0, zmax)


def y_inverse_z_squared_r1(t: float) -> float:
    """Exact ``E[Y(t)^{-1} Z(t)^2] = 2(1 - e^{-t} - t e^{-t})`` for ``r = 1``.

    From ``E[Y(t)^{-1} Y(u) Y(v)] = e^{-u} e^{-(t-v)}`` for ``u < v < t``.
    """
    return 2.0 * (1.0 - math.exp(-t) - t * math.exp(-t))


def hitting_prob_M(r: int, p: int, t: float) -> float:
    """``q_t(p^r, 0)`` for ``M^r`` by uniformization."""
    M = build_M(r, p)
    q, order, _ = transient_probs(M, (p,) * r, t)
    return float(q[order.index((0,) * r)])


def duality_check_M(r: int, p: int, t: float = 1.0, paths: int = 100_000, dt: float = 1e-3,
                    seed: int = 0, threads: int = 1, zmax: float = 3.0) -> DualityReport:
    """``q_t(p^r, 0) = p!^r E U^r(t)^p`` against uniformization."""
    scale = float(math.factorial(p) ** r)

    def stat(s: PathSample):
        return scale * s.U[:, -1] ** p

    est = mc_expectations(r, t, dt, paths, seed, stat, 1, want_U=True, threads=threads)[0]
    return _report(f"M^{r} q_t({p}^{r},0)", est, hitting_prob_M(r, p, t), zmax, t=t, dt=dt)


def duality_suite(r: int, t: float = 1.0, paths: int = 100_000, dt: float = 1e-3, seed: int = 0,
                  L_pairs: Sequence[tuple] = (), M_ps: Sequence[int] = (1, 2), threads: int = 1,
                  zmax: float = 3.0) -> list[DualityReport]:
    """Several ``L^r`` and ``M^r`` checks from one set of paths (common random numbers)."""
    alpha = AlphaSpec()
    stats = []
    for n, m in L_pairs:
        scale = float(coeffs.a_coeff(r, alpha, m) / coeffs.a_coeff(r, alpha, n)) / coeffs.prod_fact(
            a - b for a, b in zip(n, m))
        stats.append((scale, [-a for a in n], [a - b for a, b in zip(n, m)]))

    def stat(s: PathSample):
        cols = [sc * _monomial(s.Y[:, -1], s.Z[:, -1], yp, zp) for sc, yp, zp in stats]
        cols += [float(math.factorial(p) ** r) * s.U[:, -1] ** p for p in M_ps]
        return np.stack(cols, axis=1)

    ests = mc_expectations(r, t, dt, paths, seed, stat, len(stats) + len(M_ps), want_U=bool(M_ps), threads=threads)
    out = []
    for (n, m), est in zip(L_pairs, ests):
        out.append(_report(f"L^{r} p_t({tuple(n)},{tuple(m)})", est, transition_prob_L(r, n, m, t), zmax, t=t, dt=dt))
    for p, est in zip(M_ps, ests[len(stats):]):
        out.append(_report(f"M^{r} q_t({p}^{r},0)", est, hitting_prob_M(r, p, t), zmax, t=t, dt=dt))
    return out


# ---------------------------------------------------------------------------
# the limit functional


def phi_series(r: int, y: Sequence[complex], max_total: int = 30) -> complex:
    """``sum_n a_r(n) y^n`` over ``|n| <= max_total``."""
    alpha = AlphaSpec()
    total = 0j
    for s in range(max_total + 1):
        for n in _compositions(s, r):
            term = complex(float(coeffs.a_coeff(r, alpha, n)))
            for yk, nk in zip(y, n):
                term *= complex(yk) ** nk
            total += term
    return total


def _compositions(s: int, r: int) -> Iterator[tuple[int, ...]]:
    if r == 1:
        yield (s,)
        return
    for first in range(s + 1):
        for rest in _compositions(s - first, r - 1):
            yield (first, *rest)


def phi_estimate(r: int, y: Sequence[complex], t: float = 10.0, paths: int = 100_000, dt: float = 1e-2,
                 seed: int = 0, threads: int = 1) -> Estimate:
    """Monte Carlo of ``E exp(sum_k y_k Z_k(t))``."""
    yv = np.array([complex(v) for v in y])

    def stat(s: PathSample):
        return np.exp(s.Z[:, -1] @ yv)

    return mc_expectations(r, t, dt, paths, seed, stat, 1, threads=threads)[0]


def phi_finite_t(r: int, y: Sequence[complex], t: float, max_total: int = 20) -> complex:
    """``E exp(sum_k y_k Z_k(t)) = sum_n a_r(n) y^n P_n(T_0 <= t)``, the exact value before the limit."""
    alpha = AlphaSpec()
    total = 0j
    for s in range(max_total + 1):
        for n in _compositions(s, r):
            term = complex(float(coeffs.a_coeff(r, alpha, n))) * (transition_prob_L(r, n, (0,) * r, t) if s else 1.0)
            for yk, nk in zip(y, n):
                term *= complex(yk) ** nk
            total += term
    return total


def phi_check(r: int, y: Sequence[complex], t: float = 10.0, paths: int = 100_000, dt: float = 1e-2,
              seed: int = 0, threads: int = 1, zmax: float = 3.0) -> DualityReport:
    """MC against the limit series; the gap to the exact finite-``t`` value is reported as ``truncation``."""
    est = phi_estimate(r, y, t, paths, dt, seed, threads)
    limit = phi_series(r, y)
    finite = phi_finite_t(r, y, t)
    return _report(f"Phi_{r}({tuple(y)})", est, limit, zmax, t=t, dt=dt,
                   finite_t=[finite.real, finite.imag], truncation=abs(limit - finite),
                   z_finite_t=est.z(finite))


# ---------------------------------------------------------------------------
# drift and the hitting-time limit


def stabilization_diagnostic(r: int, alpha: Sequence[float], t0: float = 1.0, doublings: int = 4,
                             dt: float = 1e-2, paths: int = 20_000, seed: int = 0) -> dict:
    """Mean ``|Z(2t) - Z(t)|`` along ``t = t0, 2 t0, ...`` for the drift ``-alpha``.

    With ``alpha > 0`` every ``Y_k`` decays like ``exp(-alpha_k t)``, so the
    increments should shrink at least geometrically.
    """
    times = [t0 * 2 ** k for k in range(doublings + 1)]
    sample = simulate_Z(r, times[-1], dt, paths, seed, alpha=[-float(a) for a in alpha], times=times)
    gaps = [float(np.abs(sample.Z[:, k + 1] - sample.Z[:, k]).max(axis=1).mean()) for k in range(doublings)]
    bounds = [float(sum(math.exp(-a * s) / a if a > 0 else math.inf for a in alpha)) for s in times[:-1]]
    return {"times": times, "mean_increment": gaps, "bound": bounds,
            "decreasing": all(b < a for a, b in zip(gaps, gaps[1:]))}


def zeta_surrogate(r: int, t: float, N: int, replicas: int, seed: int = 0) -> tuple[float, float]:
    """``P(N_1(t) = 0)`` for ``L^r`` started from ``N`` everywhere; a finite stand-in for the start at infinity.

    ``L^r`` is the boundary of the cell process on the staircase with ``r``
    rows, and ``N_1`` is the last cell of its first row.
    """
    lam = staircase(r)
    cells = lam.cells()
    init = np.full((replicas, len(cells)), N, dtype=np.int64)
    vals = simulate_cells_batch(cells, AlphaSpec(), init, t, stream(seed, 0, 0x2E7A))
    hit = vals[:, cells.index((1, r))] == 0
    p = float(hit.mean())
    return p, math.sqrt(max(p * (1 - p), 1e-300) / replicas)


def hitting_limit_trend(r: int, t: float, ps: Sequence[int] = (1, 2, 3, 4, 6, 8, 12), mc_ps: Sequence[int] = (),
                        paths: int = 50_000, dt: float = 1e-3, seed: int = 0, N: int = 200,
                        replicas: int = 20_000) -> dict:
    """``q_t(p^r, 0) = p!^r E U^r(t)^p`` decreases in ``p`` toward ``P(zeta <= t)``.

    The exact values come from uniformization. Monte Carlo values are added
    for ``mc_ps`` on common paths, and a finite-``N`` estimate of the limit
    is attached. Only the monotone trend is asserted.
    """
    exact = {p: hitting_prob_M(r, p, t) for p in ps}
    mono = all(exact[b] <= exact[a] + 1e-12 for a, b in zip(ps, ps[1:]))
    mc = {}
    if mc_ps:
        def stat(s: PathSample):
            return np.stack([math.factorial(p) ** r * s.U[:, -1] ** p for p in mc_ps], axis=1)

        for p, est in zip(mc_ps, mc_expectations(r, t, dt, paths, seed, stat, len(mc_ps), want_U=True)):
            mc[p] = {"mean": est.mean.real, "stderr": est.stderr.real, "z": est.z(exact.get(p, hitting_prob_M(r, p, t)))}
    limit, limit_se = zeta_surrogate(r, t, N, replicas, seed)
    above = exact[ps[-1]] >= limit - 3 * limit_se
    return {"exact": exact, "monotone": mono, "mc": mc, "limit_estimate": limit, "limit_stderr": limit_se,
            "above_limit": above, "ok": mono and above}
