"""Property-based invariants shared by every solver."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from projnewton import (
    BoundSpec,
    NmfProblem,
    ScalingStrategy,
    SolverConfig,
    finite_diff_check,
    nmf_oracle,
    pgrad_solve,
    pncg_solve,
    random_feasible_point,
    random_quadratic,
    two_metric_solve,
)
from projnewton import geometry as geo
from projnewton.two_metric import CLIPPED_DIAGONAL_HESSIAN

from conftest import inf_upper_twin, same_bits, trace_invariants

finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def bounds_and_points(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    mask = draw(arrays(bool, n))
    two_sided = draw(st.booleans())
    upper = None
    if two_sided:
        u = draw(arrays(float, n, elements=st.floats(0.01, 50.0)))
        upper = np.where(mask, u, np.inf)
    b = BoundSpec(n, mask, upper)
    x = draw(arrays(float, n, elements=finite))
    y = draw(arrays(float, n, elements=finite))
    return b, x, y


@settings(max_examples=300, deadline=None)
@given(bounds_and_points())
def test_projection_idempotent_and_nonexpansive(data):
    b, x, y = data
    px, py = geo.project(x, b), geo.project(y, b)
    assert b.is_feasible(px)
    assert same_bits(geo.project(px, b), px)
    assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) * (1 + 1e-12)


@st.composite
def feasible_state(draw, max_n=10):
    n = draw(st.integers(1, max_n))
    mask = draw(arrays(bool, n))
    # exact zeros hit the equality branches
    x = draw(arrays(float, n, elements=st.one_of(st.just(0.0), st.floats(0.0, 5.0))))
    g = draw(arrays(float, n, elements=st.floats(-5.0, 5.0)))
    x = np.where(mask, np.abs(x), x - 1.0)
    return BoundSpec(n, mask), x, g


@settings(max_examples=200, deadline=None)
@given(feasible_state(), st.sampled_from([1e-3, 1e-1, 1.0]))
def test_infinite_upper_bounds_are_bit_identical(state, eps):
    one, x, g = state
    two = inf_upper_twin(one)
    assert two.two_sided and not one.two_sided
    assert same_bits(geo.project(x - g, one), geo.project(x - g, two))
    assert same_bits(geo.projected_gradient(x, g, one), geo.projected_gradient(x, g, two))
    p1, p2 = geo.two_metric_partition(x, g, one), geo.two_metric_partition(x, g, two)
    assert same_bits(p1.plus, p2.plus) and same_bits(p1.minus, p2.minus)
    assert same_bits(geo.z_scaling(x, g, one).diag, geo.z_scaling(x, g, two).diag)
    q1, q2 = geo.pncg_partition(x, one, eps), geo.pncg_partition(x, two, eps)
    assert same_bits(q1.plus, q2.plus)
    assert same_bits(geo.s_scaling(x, q1, one).diag, geo.s_scaling(x, q2, two).diag)
    assert geo.residual(x, g, one) == geo.residual(x, g, two)
    assert geo.projnorm(x, g, one) == geo.projnorm(x, g, two)
    c1, c2 = geo.check_eps1o(x, g, one, eps), geo.check_eps1o(x, g, two, eps)
    assert c1.ok == c2.ok and c1.details == c2.details


def solver_runs(q, x0, bounds):
    cfgs = SolverConfig(eps_g=1e-4, eps_H=1e-2, meo_enabled=True, max_outer_iters=400)
    yield "pncg", pncg_solve(q.oracle(), bounds, x0, cfgs)
    yield "two-metric", two_metric_solve(q.oracle(), bounds, x0, cfgs.replace(max_outer_iters=400))
    yield "two-metric-diag", two_metric_solve(
        q.oracle(), bounds, x0, cfgs, ScalingStrategy(CLIPPED_DIAGONAL_HESSIAN, 0.2, 5.0))
    yield "pgrad", pgrad_solve(q.oracle(), bounds, x0, tol=1e-5, max_iters=400)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10_000), st.booleans())
def test_solver_runs_on_one_sided_match_infinite_box(n, seed, partial):
    q = random_quadratic(n, seed, convex=True, two_sided=False)
    if partial:
        q.bounds = BoundSpec(n, np.arange(n) % 2 == 0)
    x0 = random_feasible_point(q, seed)
    for (name, a), (_, b) in zip(solver_runs(q, x0, q.bounds), solver_runs(q, x0, inf_upper_twin(q.bounds))):
        assert same_bits(a.x_final, b.x_final), name
        assert a.outer_iters == b.outer_iters and a.status == b.status, name
        assert [r.f for r in a.trace] == [r.f for r in b.trace], name


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10_000), st.booleans())
def test_every_solver_keeps_feasibility_and_decreases(n, seed, convex):
    q = random_quadratic(n, seed, convex=convex)
    x0 = random_feasible_point(q, seed)
    f0 = q.f(x0)
    for name, rep in solver_runs(q, x0, q.bounds):
        assert trace_invariants(rep, q.bounds, q.oracle(), f0) == [], name


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 4), st.integers(0, 10_000))
def test_nmf_oracle_derivatives(m, n, r, seed):
    rng = np.random.default_rng(seed)
    prob = NmfProblem(rng.random((m, n)), r)
    o = nmf_oracle(prob)
    x = rng.random(prob.dim) + 0.1
    assert finite_diff_check(o, x, n_dirs=3, h=1e-5, seed=seed) <= 1e-6
    a, b = rng.standard_normal(prob.dim), rng.standard_normal(prob.dim)
    lhs, rhs = a @ o.eval_hvp(x, b), b @ o.eval_hvp(x, a)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 15), st.integers(0, 10_000))
def test_quadratic_oracle_derivatives(n, seed):
    q = random_quadratic(n, seed, convex=False) if n > 1 else random_quadratic(n, seed)
    o = q.oracle()
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    assert finite_diff_check(o, x, n_dirs=3, h=1e-4, seed=seed) <= 1e-6
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    assert a @ o.eval_hvp(x, b) == pytest.approx(b @ o.eval_hvp(x, a), rel=1e-10, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_oracle_counts_are_conserved(seed):
    q = random_quadratic(8, seed, convex=False)
    o = q.oracle()
    rep = pncg_solve(o, q.bounds, random_feasible_point(q, seed),
                     SolverConfig(eps_g=1e-4, eps_H=1e-2, meo_enabled=True, max_outer_iters=200))
    assert tuple(rep.oracle_counts) == (o.f_evals, o.grad_evals, o.hvp_evals)
    assert rep.oracle_counts.grad == rep.outer_iters + 1
