"""Scaled two-metric projection method for bound-constrained problems."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import geometry as geo
from .problem import (
    BoundSpec,
    IterationRecord,
    ObjectiveOracle,
    SolverConfig,
    SolverReport,
    Status,
    StepKind,
    Vector,
    empty_step_counts,
    validate_config,
    ParameterOutOfRange,
)

log = logging.getLogger(__name__)

IDENTITY = "Identity"
CLIPPED_DIAGONAL_HESSIAN = "ClippedDiagonalHessian"


@dataclass
class ScalingStrategy:
    """Diagonal scaling D_k with spectrum inside ``[lambda_min, lambda_max]``.

    ``ClippedDiagonalHessian`` probes ``H[i, i]`` with basis-vector Hvps on at
    most ``probe_limit`` indices per iteration (the first ones in index order);
    unprobed entries use 1 clipped into the spectral interval.
    """

    kind: str = IDENTITY
    lambda_min: float = 1.0
    lambda_max: float = 1.0
    probe_limit: int = 64
    delta_c: float = 1e-8

    def __post_init__(self):
        if self.kind not in (IDENTITY, CLIPPED_DIAGONAL_HESSIAN):
            raise ParameterOutOfRange("kind", self.kind, "unknown scaling strategy")
        if not (0 < self.lambda_min <= self.lambda_max):
            raise ParameterOutOfRange("lambda_min", self.lambda_min, "need 0 < lambda_min <= lambda_max")
        self._unit = min(max(1.0, self.lambda_min), self.lambda_max)

    def diagonal(self, oracle: ObjectiveOracle, x: Vector) -> Vector | float:
        """Diagonal of D_k (a scalar for Identity, broadcast by the caller)."""
        n = x.size
        if self.kind == IDENTITY:
            return self._unit
        d = np.full(n, self._unit)
        e = np.zeros(n)
        for i in range(min(n, self.probe_limit)):
            e[i] = 1.0
            hii = float(oracle.eval_hvp(x, e)[i])
            e[i] = 0.0
            d[i] = np.clip(1.0 / max(hii, self.delta_c), self.lambda_min, self.lambda_max)
        return d


def theorem31_budget(
    f0: float,
    f_low: float,
    L_g: float,
    U_g: float,
    lambda_min: float,
    lambda_max: float,
    sigma: float,
    beta: float,
    eps: float,
    bounds: Optional[BoundSpec] = None,
) -> int:
    """Worst-case iteration count of the two-metric method."""
    u_factor = 1.0
    if bounds is not None and bounds.two_sided and bounds.mask.any():
        u_factor = min(1.0, bounds.min_upper() / 2.0)
    top = (f0 - f_low) * lambda_max * max(U_g / u_factor, L_g / (2.0 * (1.0 - sigma)), 1.0 / lambda_max)
    return int(math.ceil(top / (sigma * beta * lambda_min * eps ** 2)))


def two_metric_solve(
    oracle: ObjectiveOracle,
    bounds: BoundSpec,
    x0: Vector,
    cfg: Optional[SolverConfig] = None,
    scaling: Optional[ScalingStrategy] = None,
) -> SolverReport:
    """Minimise with scaled two-metric projection steps ``P(x - a Z D Z g)``.

    Stops once ``||Z^- g^-|| <= cfg.eps_g``. Uses ``cfg.sigma``/``cfg.beta``
    for the Armijo-type backtracking.
    """
    cfg = cfg or SolverConfig()
    scaling = scaling or ScalingStrategy()
    validate_config(cfg, bounds)
    eps = cfg.eps_g
    warnings = []
    x = np.asarray(x0, dtype=float).copy()
    if not bounds.is_feasible(x):
        warnings.append("initial point infeasible; projected onto the feasible set")
        x = geo.project(x, bounds)

    identity = scaling.kind == IDENTITY
    start = time.perf_counter()
    counts0 = oracle.counts()
    steps = empty_step_counts()
    trace = []
    f = oracle.eval_f(x)
    g = oracle.eval_grad(x)
    status = None
    message = ""
    k = 0
    sigma, beta = cfg.sigma, cfg.beta
    eval_f, eval_grad = oracle.eval_f, oracle.eval_grad
    clock = time.perf_counter
    deadline = start + cfg.max_wall_seconds
    terms = geo._two_metric_terms
    project = geo.project
    while True:
        if not (math.isfinite(f) and math.isfinite(float(g @ g))):
            status, message = Status.LINE_SEARCH_FAILURE, "non-finite objective or gradient"
            break
        plus, z = terms(x, g, bounds)
        zg_all = z * g
        zg = np.where(plus, 0.0, zg_all)
        zgzg = float(zg @ zg)
        if math.sqrt(zgzg) <= eps:
            status = Status.CONVERGED_EPS1O
            break
        if k >= cfg.max_outer_iters:
            status = Status.ITER_LIMIT
            break
        if clock() > deadline:
            status = Status.TIME_LIMIT
            break

        D = scaling.diagonal(oracle, x)
        if identity:
            # p = D Z g, and (g^-)^T Z^- p^- = D ||Z^- g^-||^2
            p = D * zg_all
            decrease_unit = D * zgzg
        else:
            p = D * z * g
            decrease_unit = float(zg @ p)
        step = z * p
        alpha = 1.0
        for _ in range(cfg.max_backtracks + 1):
            x_trial = project(x - step if alpha == 1.0 else x - alpha * step, bounds)
            f_trial = eval_f(x_trial)
            if f - f_trial >= sigma * alpha * decrease_unit:
                break
            alpha *= beta
        else:
            status, message = Status.LINE_SEARCH_FAILURE, f"no acceptable step after {cfg.max_backtracks} backtracks"
            break
        dir_norm = math.sqrt(float(step @ step))
        x, f = x_trial, f_trial
        g = eval_grad(x)
        k += 1
        trace.append(IterationRecord(k, f, StepKind.GRAD_PROJ, alpha, dir_norm, clock() - start))
    steps[StepKind.GRAD_PROJ] = k

    elapsed = time.perf_counter() - start
    return SolverReport(
        status=status,
        x_final=x,
        f_final=f,
        residual=geo.residual(x, g, bounds, cfg.eps_r),
        projnorm=geo.projnorm(x, g, bounds),
        outer_iters=k,
        step_counts=steps,
        oracle_counts=oracle.counts() - counts0,
        trace=trace,
        elapsed=elapsed,
        message=message,
        warnings=warnings,
    )
