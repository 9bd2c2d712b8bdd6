"""Projected Newton-CG for bound-constrained nonconvex problems.

Each iteration takes exactly one of three steps: a projected gradient step
when the near-bound components look non-stationary, a Capped-CG step on the
free components, or a negative-curvature step from the minimum eigenvalue
oracle on the scaled Hessian ``S H S``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import geometry as geo
from .capped_cg import CappedCGError, MaskedHvp, capped_cg, rescale_nc
from .meo import MeoTimeout, meo
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
)

log = logging.getLogger(__name__)


@dataclass
class PncgState:
    x: Vector
    g: Vector
    partition: geo.IndexPartition
    s: geo.DiagScaling
    zeta_hat_current: float
    k: int = 0


def adapt_zeta_hat(zeta_hat: float, kappa: float, zeta: float, shrink: float = 10.0) -> float:
    """Shrink the Capped-CG accuracy by ``shrink``, never below ``zeta / (3 kappa)``."""
    return max(zeta_hat / shrink, zeta / (3.0 * kappa))


def _c_nc(theta: float, eta: float, L_H: float) -> float:
    lh = (3.0 - 6.0 * eta) ** 2 * theta ** 2 / L_H ** 2 if L_H > 0 else math.inf
    return eta * min(lh, theta ** 2)


def _c_sol(theta: float, zeta: float, eta: float, L_H: float) -> float:
    first = (4.0 / (4.0 + zeta + math.sqrt((4.0 + zeta) ** 2 + 8.0 * L_H))) ** 2
    third = 9.0 * (1.0 - zeta - 2.0 * eta) ** 2 * theta ** 2 / L_H ** 2 if L_H > 0 else math.inf
    fourth = (1.0 - zeta) ** 2 * theta ** 2 / (L_H / 3.0 + 2.0 * eta) ** 2
    return eta * min(first, theta ** 2, third, fourth)


def decrease_constants(theta: float, zeta: float, eta: float, L_H: float) -> tuple[float, float]:
    """``(c_nc, c_sol)`` from the per-step decrease guarantees."""
    return _c_nc(theta, eta, L_H), _c_sol(theta, zeta, eta, L_H)


def kpncg_budget(
    f0: float,
    f_low: float,
    L_g: float,
    L_H: float,
    theta: float,
    zeta: float,
    eta: float,
    eps_g: float,
    eps_H: float,
) -> int:
    """Worst-case outer iteration count of projected Newton-CG."""
    c_nc, c_sol = decrease_constants(theta, zeta, eta, L_H)
    denom = min(c_nc, 8.0 * c_sol, 2.0 * theta / L_g, eta)
    scale = max(eps_H / eps_g ** 2, eps_H ** -3)
    return int(math.floor(16.0 * (f0 - f_low) / denom * scale)) + 2


class _Budget:
    def __init__(self, cfg: SolverConfig):
        self.start = time.perf_counter()
        self.deadline = self.start + cfg.max_wall_seconds

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def expired(self) -> bool:
        return time.perf_counter() > self.deadline


def _backtrack(
    trial: Callable[[float], Vector],
    oracle: ObjectiveOracle,
    accept: Callable[[float, float, Vector], bool],
    theta: float,
    max_backtracks: int,
):
    """Smallest ``m`` with ``accept(f_trial, theta**m, x_trial)``; None on cap hit."""
    alpha = 1.0
    for _ in range(max_backtracks + 1):
        xt = trial(alpha)
        ft = oracle.eval_f(xt)
        if np.isfinite(ft) and accept(ft, alpha, xt):
            return alpha, xt, ft
        alpha *= theta
    return None


def _gradient_trigger(g, lower, upper, s, eps_H) -> bool:
    plus = lower | upper
    if not plus.any():
        return False
    thr = eps_H ** 1.5
    if lower.any() and g[lower].min() < -thr:
        return True
    if upper.any() and g[upper].max() > thr:
        return True
    return float(np.linalg.norm(s[plus] * g[plus])) > eps_H ** 2


def pncg_solve(
    oracle: ObjectiveOracle,
    bounds: BoundSpec,
    x0: Vector,
    cfg: Optional[SolverConfig] = None,
    record_trace: bool = True,
) -> SolverReport:
    """Run projected Newton-CG from ``x0``.

    With ``cfg.meo_enabled`` False the solve stops (ConvergedEps1o) as soon as
    neither the gradient-projection nor the Newton-CG branch is triggered.
    With it True the oracle decides: a certificate gives ConvergedEps2o, a
    negative-curvature vector gives an MeoNc step.

    ``cfg.adaptive_zeta_hat`` selects the Capped-CG accuracy: True keeps a
    persistent value starting at ``zeta_hat_init`` and shrinks it after a
    failed Newton-CG line search; False lets Capped CG use ``zeta/(3 kappa)``.
    """
    cfg = cfg or SolverConfig()
    validate_config(cfg, bounds)
    n = oracle.dim
    eps_H = cfg.eps_H
    warnings = []
    x = np.asarray(x0, dtype=float).copy()
    if x.size != n:
        raise ValueError(f"x0 has length {x.size}, oracle expects {n}")
    if not bounds.is_feasible(x):
        warnings.append("initial point infeasible; projected onto the feasible set")
        x = geo.project(x, bounds)

    clock = _Budget(cfg)
    rng = np.random.default_rng(cfg.rng_seed)
    counts0 = oracle.counts()
    steps = empty_step_counts()
    trace = []
    zeta_hat = cfg.zeta_hat_init
    M = float(cfg.M_hint) if cfg.M_hint is not None else 0.0
    meo_calls = 0
    status: Optional[Status] = None
    message = ""

    f = oracle.eval_f(x)
    g = oracle.eval_grad(x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the initial point")
    k = 0

    while status is None:
        if not np.all(np.isfinite(g)):
            status, message = Status.LINE_SEARCH_FAILURE, "non-finite gradient"
            break
        if k >= cfg.max_outer_iters:
            status = Status.ITER_LIMIT
            break
        if clock.expired():
            status = Status.TIME_LIMIT
            break

        lower, upper = geo.near_bound_masks(x, bounds, eps_H)
        plus = lower | upper
        minus = ~plus
        part = geo.IndexPartition.from_mask(plus)
        s = geo.s_scaling(x, part, bounds).diag

        kind = None
        result = None

        # (a) projected gradient step
        if _gradient_trigger(g, lower, upper, s, eps_H):
            xk, fk, gk = x, f, g
            result = _backtrack(
                lambda a: geo.project(xk - a * gk, bounds),
                oracle,
                lambda ft, a, xt: ft < fk - 0.5 * float((xk - xt) @ gk),
                cfg.theta,
                cfg.max_backtracks,
            )
            if result is None:
                status, message = Status.LINE_SEARCH_FAILURE, "gradient projection line search failed"
                break
            kind = StepKind.GRAD_PROJ
            dir_norm = float(np.linalg.norm(g))

        # (b) Newton-CG step on the free components
        fell_through = False
        if kind is None and minus.any() and float(np.linalg.norm(g[minus])) > cfg.eps_g:
            idx = np.flatnonzero(minus)
            xk, fk = x, f
            H_minus = MaskedHvp(lambda v, xk=xk: oracle.eval_hvp(xk, v), idx, n)
            while True:
                zh = zeta_hat if cfg.adaptive_zeta_hat else None
                try:
                    out = capped_cg(H_minus, g[idx], eps_H, zeta=cfg.zeta, zeta_hat=zh, M=M)
                except CappedCGError as err:
                    log.debug("capped CG failed: %s", err)
                    out, kappa = None, err.kappa
                    if np.isfinite(err.M_final):
                        M = max(M, err.M_final)
                else:
                    M = out.M_final
                    kappa = out.kappa
                    if out.is_nc:
                        d_red = rescale_nc(out.d, g[idx], out.curvature)
                    else:
                        d_red = out.d
                    d = np.zeros(n)
                    d[idx] = d_red
                    dd = float(d @ d)
                    result = _backtrack(
                        lambda a: geo.project(xk + a * d, bounds),
                        oracle,
                        lambda ft, a, xt: ft < fk - cfg.eta * a * a * eps_H * dd,
                        cfg.theta,
                        cfg.max_backtracks,
                    )
                    if result is not None:
                        kind = StepKind.NEWTON_CG_NC if out.is_nc else StepKind.NEWTON_CG_SOL
                        dir_norm = math.sqrt(dd)
                        break
                if not cfg.adaptive_zeta_hat or not np.isfinite(kappa):
                    fell_through = True
                    break
                new = adapt_zeta_hat(zeta_hat, kappa, cfg.zeta, cfg.zeta_hat_shrink)
                if new >= zeta_hat:
                    fell_through = True
                    break
                log.debug("shrinking zeta_hat %.3g -> %.3g", zeta_hat, new)
                zeta_hat = new

        # (c) minimum eigenvalue oracle on S H S
        if kind is None:
            if not cfg.meo_enabled:
                if fell_through:
                    status = Status.LINE_SEARCH_FAILURE
                    message = "Newton-CG step failed at the smallest CG accuracy and the eigenvalue oracle is off"
                else:
                    status = Status.CONVERGED_EPS1O
                break
            xk, fk, gk = x, f, g

            def shs(v, xk=xk, s=s):
                return s * oracle.eval_hvp(xk, s * v)

            meo_calls += 1
            try:
                res = meo(shs, n, eps_H, cfg.delta, rng, M=cfg.M_hint, deadline=clock.deadline)
            except MeoTimeout:
                status = Status.TIME_LIMIT
                break
            if res.certified:
                if fell_through:
                    status = Status.LINE_SEARCH_FAILURE
                    message = "Newton-CG step failed and the eigenvalue oracle certified the scaled Hessian"
                else:
                    status = Status.CONVERGED_EPS2O
                break
            v = res.v
            sgn = 1.0 if float(gk @ (s * v)) >= 0.0 else -1.0
            dk = -sgn * abs(res.lambda_) * v
            step = s * dk
            dk3 = float(np.linalg.norm(dk)) ** 3
            result = _backtrack(
                lambda a: geo.project(xk + a * step, bounds),
                oracle,
                lambda ft, a, xt: ft < fk - cfg.eta * a * a * dk3,
                cfg.theta,
                cfg.max_backtracks,
            )
            if result is None:
                status, message = Status.LINE_SEARCH_FAILURE, "negative curvature line search failed"
                break
            kind = StepKind.MEO_NC
            dir_norm = float(np.linalg.norm(dk))

        alpha, x, f = result
        g = oracle.eval_grad(x)
        k += 1
        steps[kind] += 1
        if record_trace:
            trace.append(
                IterationRecord(
                    k, f, kind, alpha, dir_norm, clock.elapsed(),
                    geo.residual(x, g, bounds, cfg.eps_r) if np.all(np.isfinite(g)) else math.nan,
                    geo.projnorm(x, g, bounds) if np.all(np.isfinite(g)) else math.nan,
                )
            )

    finite = np.all(np.isfinite(g))
    return SolverReport(
        status=status,
        x_final=x,
        f_final=f,
        residual=geo.residual(x, g, bounds, cfg.eps_r) if finite else math.nan,
        projnorm=geo.projnorm(x, g, bounds) if finite else math.nan,
        outer_iters=k,
        step_counts=steps,
        oracle_counts=oracle.counts() - counts0,
        trace=trace,
        elapsed=clock.elapsed(),
        meo_calls=meo_calls,
        message=message,
        warnings=warnings,
    )
