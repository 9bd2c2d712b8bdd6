"""Bound-constrained quadratics ``f(x) = 1/2 x^T A x + b^T x + c`` with known constants.

Used by the acceptance and property suites because L_g, L_H, U_g and a valid
f_low are available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import BoundSpec, DimensionMismatch, ObjectiveOracle, Vector


@dataclass
class QuadraticProblem:
    A: np.ndarray
    b: np.ndarray
    bounds: BoundSpec
    c: float = 0.0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        n = self.b.size
        if self.A.shape != (n, n) or self.bounds.dim != n:
            raise DimensionMismatch("A, b and bounds disagree on the dimension")
        self.A = 0.5 * (self.A + self.A.T)
        self._eigs = np.linalg.eigvalsh(self.A)

    @property
    def dim(self) -> int:
        return self.b.size

    def f(self, x: Vector) -> float:
        return 0.5 * float(x @ (self.A @ x)) + float(self.b @ x) + self.c

    def grad(self, x: Vector) -> Vector:
        return self.A @ x + self.b

    def oracle(self) -> ObjectiveOracle:
        return ObjectiveOracle(self.dim, self.f, self.grad, lambda x, v: self.A @ v)

    @property
    def lambda_min(self) -> float:
        return float(self._eigs[0])

    @property
    def L_g(self) -> float:
        return float(np.abs(self._eigs).max())

    L_H = 0.0

    def _box(self) -> bool:
        return self.bounds.mask.all() and np.isfinite(self.bounds.upper).all()

    def f_low(self) -> float:
        """A lower bound on f over the feasible set (exact for unconstrained strongly convex)."""
        if self._box():
            u = self.bounds.upper
            quad = 0.5 * min(self.lambda_min, 0.0) * float(u @ u)
            return quad + float(np.minimum(self.b * u, 0.0).sum()) + self.c
        if self.lambda_min <= 0:
            raise ValueError("f_low needs a bounded box or a strongly convex A")
        return self.c - 0.5 * float(self.b @ np.linalg.solve(self.A, self.b))

    def U_g(self, x0: Vector) -> float:
        """Bound on ||grad f|| over the level set of ``x0`` intersected with the feasible set."""
        if self._box():
            return self.L_g * float(np.linalg.norm(self.bounds.upper)) + float(np.linalg.norm(self.b))
        if self.lambda_min <= 0:
            raise ValueError("U_g needs a bounded box or a strongly convex A")
        gap = self.f(np.asarray(x0, dtype=float)) - self.f_low()
        return self.L_g * math.sqrt(2.0 * max(gap, 0.0) / self.lambda_min)

    def mirrored(self) -> "QuadraticProblem":
        """The problem in ``y = u - x``; requires a full box."""
        if not self._box():
            raise ValueError("mirroring needs finite upper bounds on every index")
        u = self.bounds.upper
        Au = self.A @ u
        return QuadraticProblem(self.A.copy(), -(Au + self.b), BoundSpec.box(u.copy()),
                                self.c + 0.5 * float(u @ Au) + float(self.b @ u))


def random_quadratic(
    n: int,
    seed: int,
    convex: bool = True,
    two_sided: bool = True,
    upper_range: tuple[float, float] = (0.5, 2.0),
    spectrum: tuple[float, float] = (0.1, 2.0),
    neg_fraction: float = 0.4,
) -> QuadraticProblem:
    """Random quadratic with eigenvalues in ``spectrum``.

    Nonconvex instances flip the sign of about ``neg_fraction`` of the
    eigenvalues. One-sided instances must be convex to stay bounded below.
    """
    if not two_sided and not convex:
        raise ValueError("one-sided nonconvex quadratics are unbounded below")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(*spectrum, size=n)
    if not convex:
        k = max(1, int(round(neg_fraction * n)))
        lam[rng.choice(n, size=k, replace=False)] *= -1.0
    A = (Q * lam) @ Q.T
    if two_sided:
        u = rng.uniform(*upper_range, size=n)
        # place the unconstrained stationary point partly outside the box
        b = -A @ rng.uniform(-0.5, 1.5, size=n) * u.mean()
        bounds = BoundSpec.box(u)
    else:
        b = -A @ rng.uniform(-1.0, 2.0, size=n)
        bounds = BoundSpec.nonnegative(n)
    return QuadraticProblem(A, b, bounds)


def random_feasible_point(prob: QuadraticProblem, seed: int, active_fraction: float = 0.2) -> Vector:
    """Feasible start with some coordinates exactly at a bound."""
    rng = np.random.default_rng(seed)
    n = prob.dim
    u = prob.bounds.upper
    top = np.where(np.isfinite(u), u, 2.0)
    x = rng.uniform(0.0, 1.0, size=n) * top
    hit = rng.random(n) < active_fraction
    at_upper = hit & (rng.random(n) < 0.5) & np.isfinite(u)
    x[hit] = 0.0
    x[at_upper] = u[at_upper]
    return x
