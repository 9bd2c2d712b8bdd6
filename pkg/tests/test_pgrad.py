import numpy as np
import pytest

from projnewton import BoundSpec, ParameterOutOfRange, Status, pgrad_solve, random_feasible_point, random_quadratic

from conftest import quad_oracle


def test_upper_bound_one_dimensional():
    rep = pgrad_solve(quad_oracle(np.eye(1), [-2.0]), BoundSpec.box([1.0]), np.zeros(1), tol=1e-10)
    assert rep.converged and rep.x_final[0] == 1.0


def test_parameter_checks():
    with pytest.raises(ParameterOutOfRange):
        pgrad_solve(quad_oracle(np.eye(1)), BoundSpec(1), np.ones(1), beta=1.0)
    with pytest.raises(ParameterOutOfRange):
        pgrad_solve(quad_oracle(np.eye(1)), BoundSpec(1), np.ones(1), tol=-1.0)


def test_stops_on_projected_gradient_norm():
    q = random_quadratic(8, 4)
    rep = pgrad_solve(q.oracle(), q.bounds, random_feasible_point(q, 4), tol=1e-6)
    assert rep.status == Status.CONVERGED_EPS1O and rep.projnorm <= 1e-6
    assert rep.trace[-1].projnorm == rep.projnorm


def test_limits():
    q = random_quadratic(8, 4)
    x0 = random_feasible_point(q, 4)
    assert pgrad_solve(q.oracle(), q.bounds, x0, tol=0.0, max_iters=2).status == Status.ITER_LIMIT
    assert pgrad_solve(q.oracle(), q.bounds, x0, tol=0.0, max_seconds=-1.0).status == Status.TIME_LIMIT


def test_armijo_along_projection_arc():
    q = random_quadratic(6, 1, convex=False)
    o = q.oracle()
    x = random_feasible_point(q, 1)
    rep = pgrad_solve(o, q.bounds, x, max_iters=1, tol=0.0)
    xn = rep.x_final
    g = q.grad(x)
    assert q.f(x) - q.f(xn) > 0.5 * (x - xn) @ g
