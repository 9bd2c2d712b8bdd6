"""Projected gradient with the Armijo rule along the projection arc."""

from __future__ import annotations

import math
import time

import numpy as np

from . import geometry as geo
from .problem import (
    BoundSpec,
    IterationRecord,
    ObjectiveOracle,
    ParameterOutOfRange,
    SolverReport,
    Status,
    StepKind,
    Vector,
    empty_step_counts,
)


def pgrad_solve(
    oracle: ObjectiveOracle,
    bounds: BoundSpec,
    x0: Vector,
    beta: float = 0.5,
    sigma: float = 0.5,
    tol: float = 1e-4,
    max_iters: int = 5000,
    max_seconds: float = 100.0,
    max_backtracks: int = 100,
    eps_r: float = 1e-6,
    record_trace: bool = True,
) -> SolverReport:
    """Iterate ``x(a) = P(x - a g)`` with ``a = beta**m`` for the smallest m such that
    ``f(x) - f(x(a)) > sigma <x - x(a), g>``. Stops when the projected gradient
    norm is at most ``tol``.
    """
    for name, v in (("beta", beta), ("sigma", sigma)):
        if not 0.0 < v < 1.0:
            raise ParameterOutOfRange(name, v, "must lie in (0, 1)")
    if tol < 0:
        raise ParameterOutOfRange("tol", tol, "must be nonnegative")
    x = np.asarray(x0, dtype=float).copy()
    warnings = []
    if not bounds.is_feasible(x):
        warnings.append("initial point infeasible; projected onto the feasible set")
        x = geo.project(x, bounds)

    start = time.perf_counter()
    counts0 = oracle.counts()
    steps = empty_step_counts()
    trace = []
    f = oracle.eval_f(x)
    g = oracle.eval_grad(x)
    status = None
    message = ""
    k = 0
    while True:
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            status, message = Status.LINE_SEARCH_FAILURE, "non-finite objective or gradient"
            break
        pn = geo.projnorm(x, g, bounds)
        if pn <= tol:
            status = Status.CONVERGED_EPS1O
            break
        if k >= max_iters:
            status = Status.ITER_LIMIT
            break
        if time.perf_counter() - start > max_seconds:
            status = Status.TIME_LIMIT
            break
        alpha = 1.0
        for _ in range(max_backtracks + 1):
            xt = geo.project(x - alpha * g, bounds)
            ft = oracle.eval_f(xt)
            if np.isfinite(ft) and f - ft > sigma * float((x - xt) @ g):
                break
            alpha *= beta
        else:
            status, message = Status.LINE_SEARCH_FAILURE, f"no acceptable step after {max_backtracks} backtracks"
            break
        dir_norm = float(np.linalg.norm(g))
        x, f = xt, ft
        g = oracle.eval_grad(x)
        k += 1
        steps[StepKind.GRAD_PROJ] += 1
        if record_trace:
            trace.append(IterationRecord(
                k, f, StepKind.GRAD_PROJ, alpha, dir_norm,
                time.perf_counter() - start,
                geo.residual(x, g, bounds, eps_r), geo.projnorm(x, g, bounds),
            ))

    finite = np.all(np.isfinite(g))
    return SolverReport(
        status=status,
        x_final=x,
        f_final=f,
        residual=geo.residual(x, g, bounds, eps_r) if finite else math.nan,
        projnorm=geo.projnorm(x, g, bounds) if finite else math.nan,
        outer_iters=k,
        step_counts=steps,
        oracle_counts=oracle.counts() - counts0,
        trace=trace,
        elapsed=time.perf_counter() - start,
        message=message,
        warnings=warnings,
    )
