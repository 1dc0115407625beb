from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg, stats

from whittaker.coefficients import staircase_sigma
from whittaker.operators import build_G, build_L_r
from whittaker.shapes import EMPTY, AlphaSpec, PlaneArray, Shape, staircase, to_nested
from whittaker.simulation import (
    CellChain, Fenwick, coupled_runs, entrance_ks, K_distribution, K_staircase_distribution, SimConfig, StopRule, read_pgm,
    render_heightmap, sample_K, sample_K_staircase, simulate, simulate_cells_batch, simulate_nested, stream,
    transient_probs,
)

SEED = 20261015


def test_stream_is_reproducible_and_keyed():
    a = stream(5, 1, 7).random(4)
    assert np.array_equal(a, stream(5, 1, 7).random(4))
    assert not np.array_equal(a, stream(5, 2, 7).random(4))
    assert not np.array_equal(a, stream(5, 1, 8).random(4))


@given(st.lists(st.integers(0, 9), min_size=1, max_size=40), st.data())
def test_fenwick_against_prefix_sums(values, data):
    fw = Fenwick(values)
    k = data.draw(st.integers(0, len(values) - 1))
    v = data.draw(st.integers(0, 9))
    fw.set(k, v)
    values[k] = v
    assert fw.total() == sum(values)
    if sum(values):
        u = data.draw(st.integers(0, sum(values) - 1))
        expected = int(np.argmax(np.cumsum(values) > u))
        assert fw.find(u) == expected


def test_stop_rule_parse():
    assert StopRule.parse("time:2.5") == StopRule("time", 2.5)
    assert StopRule.parse("absorb") == StopRule("absorb")
    assert StopRule.parse("absorb:3,1") == StopRule("cell", cell=(3, 1))
    with pytest.raises(ValueError):
        StopRule.parse("never")


@pytest.mark.parametrize("method", ["gillespie", "next_reaction"])
def test_simulate_reproducible_and_absorbed(method):
    cfg = SimConfig(Shape((3, 2, 1)), init=4, seed=SEED, method=method)
    a, b = simulate(cfg), simulate(cfg)
    assert a.times == b.times and a.final == b.final
    chain = CellChain(a.final, AlphaSpec())
    assert all(chain.rate(k) == 0 for k in range(len(chain.cells)))
    assert a.stopped_by == "absorbed"
    assert simulate(cfg, replica=1).times != a.times


def test_time_stop_and_state_at():
    cfg = SimConfig(Shape((3, 3)), init=5, stop=StopRule("time", 0.05), seed=SEED)
    rec = simulate(cfg)
    assert rec.end_time <= 0.05 and all(t <= 0.05 for t in rec.times)
    init = cfg.initial_state()
    assert rec.state_at(init, 1.0) == rec.final
    assert rec.state_at(init, -1.0) == init


def test_invalid_initial_state():
    bad = PlaneArray.from_rows([[2, 1]])
    with pytest.raises(ValueError):
        simulate(SimConfig(Shape((2,)), init=bad))


def test_nested_engine_replays_cell_engine():
    init = PlaneArray.from_rows([[2, 3, 3], [3, 3]])
    cfg = SimConfig(Shape((3, 2)), init=init, seed=SEED)
    a = simulate(cfg)
    b = simulate_nested(to_nested(init), StopRule(), SEED)
    assert a.times == b.times and a.cells == b.cells and a.final == b.final


def _mean_absorption_time(lam, init_value):
    space, G = build_G(lam, EMPTY, AlphaSpec(), init_value)
    order = space.states
    Q = G.to_dense(order)
    transient = [k for k in range(len(order)) if Q[k, k] != 0]
    sub = Q[np.ix_(transient, transient)]
    times = np.linalg.solve(-sub, np.ones(len(transient)))
    start = order.index(tuple([init_value] * len(lam.cells())))
    return float(times[transient.index(start)])


@pytest.mark.parametrize("method", ["gillespie", "next_reaction"])
def test_absorption_time_matches_linear_solve(method):
    lam = Shape((2, 1))
    exact = _mean_absorption_time(lam, 3)
    runs = [simulate(SimConfig(lam, init=3, seed=SEED, method=method), replica=k, record=False).end_time
            for k in range(4000)]
    z = (np.mean(runs) - exact) / (np.std(runs, ddof=1) / np.sqrt(len(runs)))
    assert abs(z) < 4, (np.mean(runs), exact)


def test_transient_probs_against_expm():
    L = build_L_r(2, AlphaSpec((1, 0)), (3, 3))
    order = L.space.states
    p, _, defect = transient_probs(L, (3, 2), 0.4, order)
    ref = linalg.expm(0.4 * L.to_dense(order))[order.index((3, 2))]
    assert defect < 1e-11
    assert np.max(np.abs(p - ref)) < 1e-10


def test_batch_simulator_law():
    lam = Shape((2, 1))
    space, G = build_G(lam, EMPTY, AlphaSpec(), 2)
    order = space.states
    start = (2, 2, 2)
    exact, _, _ = transient_probs(G, start, 0.3, order)
    out = simulate_cells_batch(lam.cells(), AlphaSpec(), np.full((20000, 3), 2), 0.3, stream(SEED))
    counts = Counter(tuple(int(v) for v in row) for row in out)
    obs = np.array([counts.get(s, 0) for s in order])
    keep = exact * 20000 >= 5
    assert sum(counts[s] for s in counts if s not in order) == 0
    f_exp = exact[keep] * 20000
    f_obs = obs[keep] * f_exp.sum() / obs[keep].sum()
    assert stats.chisquare(f_obs, f_exp).pvalue > 1e-3


def test_K_distributions_normalized():
    dist = K_staircase_distribution(3, AlphaSpec(), (2, 1, 2))
    assert sum(dist.values()) == 1
    general = K_distribution(staircase(3), staircase(2), staircase_sigma(3, (2, 1, 2)))
    assert sum(general.values()) == 1
    assert {pi[(1, 1)] for pi in general} <= {0, 1, 2}


def test_sequential_sampler_law():
    n = (2, 2, 1)
    dist = K_staircase_distribution(3, AlphaSpec(), n)
    items = list(dist)
    rng = stream(SEED, 0, 3)
    draws = Counter(sample_K_staircase(3, AlphaSpec(), n, rng) for _ in range(6000))
    assert set(draws) <= set(items)
    obs = np.array([draws.get(x, 0) for x in items], float)
    exp = np.array([float(dist[x]) for x in items]) * 6000
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_sample_K_dispatch():
    rng = stream(SEED)
    sigma = staircase_sigma(2, (1, 1))
    pi = sample_K(staircase(2), staircase(1), sigma, rng)
    assert pi[(1, 2)] == 1 and pi[(2, 1)] == 1
    with pytest.raises(ValueError):
        sample_K(Shape((2, 2)), Shape((1,)), {(1, 2): 1, (2, 1): 1, (2, 2): 1}, rng, method="sequential")


def test_pgm_roundtrip(tmp_path):
    pi = PlaneArray.from_rows([[0, 1, 2], [1, 2, 3]])
    path = render_heightmap(pi, tmp_path / "a.pgm", svg=tmp_path / "a.svg")
    assert path.read_text().splitlines()[:3] == ["P2", "3 2", "3"]
    assert read_pgm(path).tolist() == [[0, 1, 2], [1, 2, 3]]
    assert (tmp_path / "a.svg").read_text().startswith("<svg")


def test_restriction_to_subshape_replays_exactly():
    big = simulate(SimConfig(Shape((4, 3, 3)), init=4, stop=StopRule("time", 0.2), seed=SEED))
    small = simulate(SimConfig(Shape((2, 1)), init=4, stop=StopRule("time", 0.2), seed=SEED))
    mu = set(Shape((2, 1)).cells())
    kept = [(t, c, v) for t, c, v in zip(big.times, big.cells, big.values) if c in mu]
    assert kept == list(zip(small.times, small.cells, small.values))
    assert len(kept) > 0


def test_coupling_keeps_starts_ordered():
    for rep in range(20):
        _, history = coupled_runs(Shape((2, 2)), AlphaSpec(), [10, 20], 5.0, stream(SEED, rep, 7), record=True)
        assert all((v[0] <= v[1]).all() for _, v in history)


def test_coupled_copy_has_the_right_law():
    lam = Shape((2, 1))
    space, G = build_G(lam, EMPTY, AlphaSpec(), 3)
    order = space.states
    exact, _, _ = transient_probs(G, (2, 2, 2), 0.2, order)
    reps = 4000
    counts = Counter(tuple(coupled_runs(lam, AlphaSpec(), [2, 3], 0.2, stream(SEED, k, 9))[0].values)
                     for k in range(reps))
    obs = np.array([counts.get(s, 0) for s in order], float)
    keep = exact * reps >= 5
    f_exp = exact[keep] * reps
    f_obs = obs[keep] * f_exp.sum() / obs[keep].sum()
    assert stats.chisquare(f_obs, f_exp).pvalue > 1e-3


def test_entrance_law_stabilizes_in_N():
    ks = entrance_ks(Shape((2, 1)), AlphaSpec(), 30, 60, 2.0, 100_000, SEED)
    assert max(ks.values()) < 0.01, ks
