"""Projections, index partitions, diagonal scalings and stationarity measures.

Every function here has a one-sided branch (``bounds.two_sided`` False) and a
general box branch. With all upper bounds at ``+inf`` the box branch must give
bit-identical results to the one-sided branch; tests rely on that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .problem import BoundSpec, DimensionTooLarge, InfeasiblePoint, ObjectiveOracle, Vector


@dataclass
class IndexPartition:
    plus: np.ndarray
    minus: np.ndarray

    @classmethod
    def from_mask(cls, plus_mask: np.ndarray) -> "IndexPartition":
        return cls(np.flatnonzero(plus_mask), np.flatnonzero(~plus_mask))

    def plus_mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.plus] = True
        return m


@dataclass
class DiagScaling:
    diag: np.ndarray

    def apply(self, v: Vector) -> Vector:
        return self.diag * v


@dataclass
class CheckResult:
    ok: bool
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def _require_feasible(x: Vector, bounds: BoundSpec) -> None:
    if not bounds.is_feasible(x):
        raise InfeasiblePoint("point violates the bound constraints")


def project(x: Vector, bounds: BoundSpec) -> Vector:
    x = np.asarray(x, dtype=float)
    if bounds.two_sided:
        # mid(0, x, u)
        clipped = np.minimum(np.maximum(x, 0.0), bounds.upper)
    else:
        clipped = np.maximum(x, 0.0)
    if bounds.all_constrained:
        return clipped
    return np.where(bounds.mask, clipped, x)


def projected_gradient(x: Vector, g: Vector, bounds: BoundSpec) -> Vector:
    _require_feasible(x, bounds)
    out = np.array(g, dtype=float, copy=True)
    at_lower = bounds.mask & (x == 0.0)
    out[at_lower] = np.minimum(0.0, out[at_lower])
    if bounds.two_sided:
        at_upper = bounds.mask & (x == bounds.upper)
        out[at_upper] = np.maximum(0.0, out[at_upper])
    return out


def _two_metric_terms(x: Vector, g: Vector, bounds: BoundSpec) -> tuple[np.ndarray, np.ndarray]:
    """``(plus_mask, z)`` for a point known to be feasible (no checks).

    Two-sided: work with the distance to the nearer bound and the gradient
    sign that pushes towards it. With ``u = inf`` this reduces exactly to the
    one-sided rule.
    """
    if bounds.two_sided:
        near_low = x <= bounds.half_upper
        dist = np.where(near_low, x, bounds.upper - x)
        push = np.where(near_low, g, -g) > 0.0
    else:
        dist = x
        push = g > 0.0
    if not bounds.all_constrained:
        push &= bounds.mask
    # feasibility gives dist >= 0, so the pushing indices split into dist == 0 and dist > 0
    plus = push & (dist == 0.0)
    return plus, np.where(push ^ plus, np.minimum(dist, 1.0), 1.0)


def two_metric_partition(x: Vector, g: Vector, bounds: BoundSpec) -> IndexPartition:
    """Exactly-active indices whose gradient pushes into the bound."""
    _require_feasible(x, bounds)
    return IndexPartition.from_mask(_two_metric_terms(x, g, bounds)[0])


def z_scaling(x: Vector, g: Vector, bounds: BoundSpec) -> DiagScaling:
    _require_feasible(x, bounds)
    return DiagScaling(_two_metric_terms(x, g, bounds)[1])


def near_bound_masks(x: Vector, bounds: BoundSpec, eps_k: float) -> tuple[np.ndarray, np.ndarray]:
    """Masks of constrained indices within ``eps_k`` of the lower / upper bound."""
    m = bounds.mask
    lower = m & (x >= 0.0) & (x <= eps_k)
    if bounds.two_sided:
        u = bounds.upper
        upper = m & (x >= u - eps_k) & (x <= u)
    else:
        upper = np.zeros(x.size, dtype=bool)
    return lower, upper


def pncg_partition(x: Vector, bounds: BoundSpec, eps_k: float) -> IndexPartition:
    _require_feasible(x, bounds)
    lower, upper = near_bound_masks(x, bounds, eps_k)
    return IndexPartition.from_mask(lower | upper)


def s_scaling(x: Vector, partition: IndexPartition, bounds: BoundSpec) -> DiagScaling:
    s = np.ones(x.size)
    p = partition.plus
    if bounds.two_sided:
        s[p] = np.minimum(x[p], bounds.upper[p] - x[p])
    else:
        s[p] = x[p]
    return DiagScaling(s)


def residual(x: Vector, g: Vector, bounds: BoundSpec, eps_r: float = 1e-6) -> float:
    """Scaled stationarity residual used in the NMF experiments.

    ``max(||S g||, worst sign violation on the near-bound set)`` with the
    near-bound threshold ``sqrt(eps_r)``. At near-lower indices the violation is
    ``-g``; at near-upper indices it is ``+g``.
    """
    thr = math.sqrt(eps_r)
    lower, upper = near_bound_masks(x, bounds, thr)
    part = IndexPartition.from_mask(lower | upper)
    s = s_scaling(x, part, bounds).diag
    res = float(np.linalg.norm(s * g))
    if lower.any():
        res = max(res, float(-g[lower].min()))
    if upper.any():
        res = max(res, float(g[upper].max()))
    return res


def projnorm(x: Vector, g: Vector, bounds: BoundSpec) -> float:
    return float(np.linalg.norm(projected_gradient(x, g, bounds)))


def check_eps1o(x: Vector, g: Vector, bounds: BoundSpec, eps: float) -> CheckResult:
    """Approximate first-order stationarity test.

    Feasibility, ``||Z g|| <= eps`` with ``z = min(x, u - x, 1)`` on every
    constrained index, ``g >= -eps`` where ``x <= u/2`` and ``g <= eps`` where
    ``x > u/2``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    violations = []
    if not bounds.is_feasible(x):
        violations.append("infeasible")
    m = bounds.mask
    z = np.ones(x.size)
    if bounds.two_sided:
        u = bounds.upper
        z[m] = np.minimum(np.minimum(x[m], u[m] - x[m]), 1.0)
        low_half = m & (x <= u / 2.0)
        high_half = m & (x > u / 2.0)
    else:
        z[m] = np.minimum(x[m], 1.0)
        low_half = m
        high_half = np.zeros(x.size, dtype=bool)
    znorm = float(np.linalg.norm(z * g))
    if znorm > eps:
        violations.append(f"||Zg||={znorm:.3e} > {eps:.3e}")
    if low_half.any() and g[low_half].min() < -eps:
        violations.append(f"min g on lower half = {g[low_half].min():.3e} < -eps")
    if high_half.any() and g[high_half].max() > eps:
        violations.append(f"max g on upper half = {g[high_half].max():.3e} > eps")
    return CheckResult(not violations, violations, {"znorm": znorm})


def dense_scaled_hessian(
    hvp: Callable[[Vector], Vector], s: Vector, max_dim: int = 10_000
) -> np.ndarray:
    """Materialise ``S H S`` column by column from Hessian-vector products."""
    n = s.size
    if n > max_dim:
        raise DimensionTooLarge(f"dimension {n} exceeds dense cap {max_dim}")
    out = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = s[j]
        out[:, j] = s * hvp(e)
        e[j] = 0.0
    return 0.5 * (out + out.T)


def check_eps2o(
    x: Vector,
    oracle: ObjectiveOracle,
    bounds: BoundSpec,
    eps: float,
    max_dim: int = 10_000,
    g: Optional[Vector] = None,
) -> CheckResult:
    """Approximate second-order stationarity test with a dense eigen-solve.

    Near-bound threshold ``sqrt(eps)``; requires ``||S g|| <= 2 eps``, the
    ``eps**0.75`` gradient-sign floor on near-bound indices and
    ``lambda_min(S H S) >= -sqrt(eps)``.
    """
    x = np.asarray(x, dtype=float)
    if x.size > max_dim:
        raise DimensionTooLarge(f"dimension {x.size} exceeds dense cap {max_dim}")
    if g is None:
        g = oracle.eval_grad(x)
    violations = []
    if not bounds.is_feasible(x):
        violations.append("infeasible")
    thr = math.sqrt(eps)
    lower, upper = near_bound_masks(x, bounds, thr)
    s = s_scaling(x, IndexPartition.from_mask(lower | upper), bounds).diag
    sg = float(np.linalg.norm(s * g))
    if sg > 2 * eps:
        violations.append(f"||Sg||={sg:.3e} > 2 eps")
    floor = eps ** 0.75
    if lower.any() and g[lower].min() < -floor:
        violations.append(f"min g near lower bound {g[lower].min():.3e} < -eps^(3/4)")
    if upper.any() and g[upper].max() > floor:
        violations.append(f"max g near upper bound {g[upper].max():.3e} > eps^(3/4)")
    shs = dense_scaled_hessian(lambda v: oracle.eval_hvp(x, v), s, max_dim)
    lam = float(np.linalg.eigvalsh(shs)[0])
    if lam < -thr:
        violations.append(f"lambda_min(SHS)={lam:.3e} < -sqrt(eps)")
    return CheckResult(not violations, violations, {"sg_norm": sg, "lambda_min": lam})
