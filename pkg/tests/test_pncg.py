import numpy as np
import pytest

from projnewton import (
    BoundSpec,
    SolverConfig,
    Status,
    StepKind,
    adapt_zeta_hat,
    decrease_constants,
    kpncg_budget,
    pncg_solve,
    random_feasible_point,
    random_quadratic,
)
from projnewton import geometry as geo

from conftest import quad_oracle


def test_newton_step_then_certificate():
    c = np.array([5.0, 5.0])
    x0 = np.array([3.0, 3.0])
    o = quad_oracle(np.eye(2), -c)
    cfg = SolverConfig(eps_g=1e-6, eps_H=1e-3, meo_enabled=True)
    rep = pncg_solve(o, BoundSpec(2), x0, cfg)
    first = rep.trace[0]
    assert first.step_type == StepKind.NEWTON_CG_SOL and first.alpha == 1.0
    # oracle: damped Newton step (1 + 2 eps_H)^-1 (c - x0)
    o2 = quad_oracle(np.eye(2), -c)
    rep1 = pncg_solve(o2, BoundSpec(2), x0, cfg.replace(max_outer_iters=1))
    assert np.allclose(rep1.x_final, x0 + (c - x0) / (1 + 2e-3), rtol=0, atol=1e-14)
    assert rep.status == Status.CONVERGED_EPS2O
    assert rep.step_counts[StepKind.GRAD_PROJ] == 0
    assert np.linalg.norm(rep.x_final - c) <= 1e-6


def test_saddle_escape_through_eigen_oracle():
    o = quad_oracle(np.diag([2.0, -2.0]))
    cfg = SolverConfig(meo_enabled=True, max_outer_iters=1)
    rep = pncg_solve(o, BoundSpec(2, []), np.zeros(2), cfg)
    assert rep.trace[0].step_type == StepKind.MEO_NC
    assert rep.f_final < 0.0
    assert rep.meo_calls == 1


def test_minimizer_is_certified_immediately():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    c = np.array([1.0, 2.0])
    rep = pncg_solve(quad_oracle(A, -A @ c), BoundSpec(2), c, SolverConfig(meo_enabled=True))
    assert rep.status == Status.CONVERGED_EPS2O and rep.outer_iters == 0


def test_first_order_mode_reports_eps1o():
    rep = pncg_solve(quad_oracle(np.eye(2)), BoundSpec(2), np.zeros(2))
    assert rep.status == Status.CONVERGED_EPS1O and rep.meo_calls == 0


def test_decrease_constants_example():
    c_nc, _ = decrease_constants(0.5, 0.5, 0.2, 1.0)
    assert c_nc == pytest.approx(0.05)


def test_budget_scaling():
    eps = 1e-4
    b = kpncg_budget(1.0, 0.0, 1.0, 1.0, 0.5, 0.5, 0.2, eps, eps ** 0.5)
    b2 = kpncg_budget(2.0, 0.0, 1.0, 1.0, 0.5, 0.5, 0.2, eps, eps ** 0.5)
    # both scale terms equal eps^-1.5, so the budget is linear in f0 - f_low
    assert abs((b2 - 2) - 2 * (b - 2)) <= 1
    assert b > 16 * eps ** -1.5


def test_adapt_zeta_hat_examples():
    assert adapt_zeta_hat(0.1, 100.0, 0.5) == pytest.approx(0.01)
    floor = 0.5 / 300
    assert adapt_zeta_hat(0.002, 100.0, 0.5) == floor
    assert adapt_zeta_hat(floor, 100.0, 0.5) == floor


def test_gradient_projection_branch_fires_near_bound():
    # the minimiser sits at the lower bound with a positive gradient
    o = quad_oracle(np.eye(2), [1.0, -1.0])
    rep = pncg_solve(o, BoundSpec(2), np.array([1e-4, 3.0]), SolverConfig(meo_enabled=True))
    assert rep.trace[0].step_type == StepKind.GRAD_PROJ
    assert rep.converged
    assert np.allclose(rep.x_final, [0.0, 1.0], atol=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_quadratics_reach_second_order(seed):
    q = random_quadratic(10, seed, convex=seed % 2 == 0)
    cfg = SolverConfig(eps_g=1e-4, eps_H=1e-2, meo_enabled=True, rng_seed=seed)
    rep = pncg_solve(q.oracle(), q.bounds, random_feasible_point(q, seed), cfg)
    assert rep.status == Status.CONVERGED_EPS2O
    assert geo.check_eps2o(rep.x_final, q.oracle(), q.bounds, 1e-4)
    fs = [r.f for r in rep.trace]
    assert all(b < a for a, b in zip(fs, fs[1:]))


def test_time_limit():
    q = random_quadratic(10, 1, convex=False)
    cfg = SolverConfig(max_wall_seconds=1e-9)
    rep = pncg_solve(q.oracle(), q.bounds, random_feasible_point(q, 1), cfg)
    assert rep.status == Status.TIME_LIMIT


def test_counts_match_oracle():
    q = random_quadratic(6, 2, convex=True)
    o = q.oracle()
    o.eval_f(np.zeros(6))
    rep = pncg_solve(o, q.bounds, random_feasible_point(q, 2), SolverConfig(meo_enabled=True))
    assert rep.oracle_counts.f == o.f_evals - 1
    assert sum(rep.step_counts.values()) == rep.outer_iters == len(rep.trace)


def test_deterministic_given_seed():
    q = random_quadratic(12, 5, convex=False)
    cfg = SolverConfig(eps_g=1e-4, eps_H=1e-2, meo_enabled=True, rng_seed=9)
    a = pncg_solve(q.oracle(), q.bounds, random_feasible_point(q, 5), cfg)
    b = pncg_solve(q.oracle(), q.bounds, random_feasible_point(q, 5), cfg)
    assert np.array_equal(a.x_final, b.x_final) and a.outer_iters == b.outer_iters
