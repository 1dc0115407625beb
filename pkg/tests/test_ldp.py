import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whittaker import ldp

SEED = 20261015
positive = st.floats(0.05, 20.0)


def _problem(values):
    return ldp.LimitShapeProblem.from_values((3, 3, 3), (2, 2), values)


def test_h_values():
    assert ldp.h(0.5) == pytest.approx(-np.log(2), abs=1e-15)
    assert ldp.h(1e-300) == pytest.approx(0.0, abs=1e-280)


def test_problem_validation():
    with pytest.raises(ValueError):
        ldp.LimitShapeProblem.from_values((2, 1), (1,), [1.0])
    with pytest.raises(ValueError):
        ldp.LimitShapeProblem.from_values((2, 1), (1,), [1.0, 0.0])
    with pytest.raises(ValueError):
        ldp.LimitShapeProblem.from_values((2, 1), (3,), [1.0, 1.0])


def test_initial_point_feasible():
    prob = _problem([1, 2, 3, 0.5, 4])
    assert prob.feasible(prob.initial_point())
    assert not prob.feasible(np.full(4, 10.0))


@settings(max_examples=30, deadline=None)
@given(st.lists(positive, min_size=5, max_size=5))
def test_gradient_matches_finite_differences(values):
    prob = _problem(values)
    xs = prob.initial_point()
    g = prob.gradient(xs)
    for k in range(len(xs)):
        e = np.zeros(len(xs))
        e[k] = 1e-6 * xs[k]
        num = (prob.F(xs + e) - prob.F(xs - e)) / (2 * e[k])
        assert num == pytest.approx(g[k], rel=1e-4, abs=1e-6)


def test_hessian_matches_finite_differences():
    prob = _problem([1, 2, 3, 0.5, 4])
    assert ldp.hessian_fd_error(prob, prob.initial_point()) < 1e-6
    sol = ldp.solve_limit_shape(prob)
    assert ldp.hessian_fd_error(prob, np.array([sol.x[u] for u in prob.unknowns()])) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.lists(positive, min_size=5, max_size=5))
def test_solution_is_certified_minimum(values):
    prob = _problem(values)
    sol = ldp.solve_limit_shape(prob)
    assert sol.residual < 1e-10 * max(values) ** 2
    assert sol.hessian_pd
    assert ldp.minimality_spot_check(prob, sol, trials=40, seed=SEED)


@given(positive, positive)
def test_two_by_one_closed_form(an, am):
    sol = ldp.solve_limit_shape(ldp.LimitShapeProblem.from_values((2, 1), (1,), [an, am]))
    assert sol.x[(1, 1)] == pytest.approx(an * am / (an + am), rel=1e-12)


def test_homogeneity_and_transpose():
    values = [1, 2, 3, 0.5, 4]
    base = ldp.solve_limit_shape(_problem(values))
    scaled = ldp.solve_limit_shape(_problem([3 * v for v in values]))
    for u in base.x:
        assert scaled.x[u] == pytest.approx(3 * base.x[u], rel=1e-11)
    prob = _problem(values)
    tprob = ldp.LimitShapeProblem((3, 3, 3), (2, 2), {(j, i): v for (i, j), v in prob.a.items()})
    tsol = ldp.solve_limit_shape(tprob)
    for (i, j), v in base.x.items():
        assert tsol.x[(j, i)] == pytest.approx(v, rel=1e-11)


def test_bisection_fallback_agrees_with_newton():
    prob = _problem([1, 2, 3, 0.5, 4])
    sol = ldp.solve_limit_shape(prob)
    xs = ldp._bisection_sweeps(prob, prob.initial_point())
    for u, v in zip(prob.unknowns(), xs):
        assert v == pytest.approx(sol.x[u], rel=1e-9)


def test_solution_json():
    sol = ldp.solve_limit_shape(ldp.LimitShapeProblem.from_values((2, 1), (1,), [1, 1]))
    data = json.loads(sol.to_json())
    assert data["x"]["1,1"] == pytest.approx(0.5)
    assert data["method"] == "newton"


def test_concentration_and_rate():
    prob = ldp.LimitShapeProblem.from_values((2, 1), (1,), [1, 1])
    res = ldp.concentration_experiment(prob, 100, 1000, SEED)
    assert res["mean_error"] < 0.02
    out = ldp.deviation_slope(prob, Ns=(50, 100, 200, 400), reps=1000, seed=SEED)
    assert out["slope"] == pytest.approx(-0.5, abs=0.15)
