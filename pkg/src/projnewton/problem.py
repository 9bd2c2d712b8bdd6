"""Problem abstraction shared by all solvers: oracles, bounds, configuration, reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, asdict
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]


class ProjNewtonError(Exception):
    """Base class for all errors raised by this package."""


class ParameterOutOfRange(ProjNewtonError, ValueError):
    def __init__(self, name: str, value, reason: str = ""):
        self.name = name
        self.value = value
        msg = f"parameter {name}={value!r} out of range"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class InfeasiblePoint(ProjNewtonError, ValueError):
    pass


class DimensionMismatch(ProjNewtonError, ValueError):
    pass


class DimensionTooLarge(ProjNewtonError, ValueError):
    pass


class Status(str, Enum):
    CONVERGED_EPS1O = "ConvergedEps1o"
    CONVERGED_EPS2O = "ConvergedEps2o"
    ITER_LIMIT = "IterLimit"
    TIME_LIMIT = "TimeLimit"
    LINE_SEARCH_FAILURE = "LineSearchFailure"

    @property
    def converged(self) -> bool:
        return self in (Status.CONVERGED_EPS1O, Status.CONVERGED_EPS2O)


class StepKind(str, Enum):
    GRAD_PROJ = "GradProj"
    NEWTON_CG_SOL = "NewtonCgSol"
    NEWTON_CG_NC = "NewtonCgNc"
    MEO_NC = "MeoNc"
    TERMINATE = "Terminate"


class ObjectiveOracle:
    """Callbacks for f, its gradient and Hessian-vector products, with call counters.

    The callables must be pure functions of their arguments; the only state an
    oracle carries is its three counters.
    """

    def __init__(
        self,
        dim: int,
        f: Callable[[Vector], float],
        grad: Callable[[Vector], Vector],
        hvp: Callable[[Vector, Vector], Vector],
    ):
        if dim < 1:
            raise ParameterOutOfRange("dim", dim, "must be positive")
        self.dim = int(dim)
        self._f = f
        self._grad = grad
        self._hvp = hvp
        self.f_evals = 0
        self.grad_evals = 0
        self.hvp_evals = 0

    def eval_f(self, x: Vector) -> float:
        self.f_evals += 1
        return float(self._f(x))

    def eval_grad(self, x: Vector) -> Vector:
        self.grad_evals += 1
        return np.asarray(self._grad(x), dtype=float)

    def eval_hvp(self, x: Vector, v: Vector) -> Vector:
        self.hvp_evals += 1
        return np.asarray(self._hvp(x, v), dtype=float)

    def counts(self) -> "OracleCounts":
        return OracleCounts(self.f_evals, self.grad_evals, self.hvp_evals)


class OracleCounts(NamedTuple):
    f: int
    grad: int
    hvp: int

    def __sub__(self, other: "OracleCounts") -> "OracleCounts":
        return OracleCounts(self.f - other.f, self.grad - other.grad, self.hvp - other.hvp)


class BoundSpec:
    """Bounds ``0 <= x[i] (<= upper[i])`` on the constrained indices.

    Indices are zero-based. ``upper`` is either None (one-sided problem) or a
    length-``dim`` array holding ``+inf`` wherever no upper bound applies.
    Unconstrained indices always carry ``+inf`` in the stored upper array.
    """

    def __init__(
        self,
        dim: int,
        constrained: Optional[Sequence[int] | NDArray] = None,
        upper: Optional[Sequence[float] | NDArray | dict] = None,
    ):
        self.dim = int(dim)
        mask = np.zeros(self.dim, dtype=bool)
        if constrained is None:
            mask[:] = True
        else:
            idx = np.asarray(constrained)
            if idx.dtype == bool:
                if idx.shape != (self.dim,):
                    raise DimensionMismatch("boolean constrained mask must have length dim")
                mask = idx.copy()
            elif idx.size:
                idx = idx.astype(int)
                if idx.min() < 0 or idx.max() >= self.dim:
                    raise ParameterOutOfRange("constrained", idx.tolist(), "index outside 0..dim-1")
                mask[idx] = True
        self.mask = mask

        if upper is None:
            self.two_sided = False
            self.upper = np.full(self.dim, np.inf)
        else:
            self.two_sided = True
            u = np.full(self.dim, np.inf)
            if isinstance(upper, dict):
                for i, val in upper.items():
                    u[int(i)] = float(val)
            else:
                arr = np.asarray(upper, dtype=float)
                if arr.shape == (self.dim,):
                    u = arr.copy()
                elif arr.shape == (int(mask.sum()),):
                    u[mask] = arr
                else:
                    raise DimensionMismatch(
                        f"upper has shape {arr.shape}, expected ({self.dim},) or ({int(mask.sum())},)"
                    )
            finite = np.isfinite(u)
            if np.any(finite & ~mask):
                raise ParameterOutOfRange("upper", u.tolist(), "upper bound on an unconstrained index")
            if np.any(u[mask] <= 0) or np.any(np.isnan(u)):
                raise ParameterOutOfRange("upper", u.tolist(), "upper bounds must be positive")
            self.upper = u
        self.all_constrained = bool(self.mask.all())
        self.half_upper = self.upper / 2.0

    @classmethod
    def nonnegative(cls, dim: int) -> "BoundSpec":
        return cls(dim)

    @classmethod
    def box(cls, upper: Sequence[float] | NDArray) -> "BoundSpec":
        u = np.asarray(upper, dtype=float)
        return cls(u.size, None, u)

    @property
    def indices(self) -> NDArray:
        return np.flatnonzero(self.mask)

    def min_upper(self) -> float:
        """Smallest upper bound over constrained indices (``inf`` when none)."""
        if not self.mask.any():
            return math.inf
        return float(self.upper[self.mask].min())

    def is_feasible(self, x: Vector) -> bool:
        x = np.asarray(x)
        m = self.mask
        return bool(np.all(x[m] >= 0) and np.all(x[m] <= self.upper[m]))

    def __repr__(self) -> str:
        kind = "two-sided" if self.two_sided else "one-sided"
        return f"BoundSpec(dim={self.dim}, constrained={int(self.mask.sum())}, {kind})"


@dataclass
class SolverConfig:
    eps_g: float = 1e-6
    eps_H: float = 1e-3
    theta: float = 0.5
    zeta: float = 0.5
    eta: float = 0.2
    sigma: float = 0.5
    beta: float = 0.5
    delta: float = 0.01
    M_hint: Optional[float] = None
    max_outer_iters: int = 5000
    max_wall_seconds: float = 100.0
    rng_seed: int = 0
    meo_enabled: bool = False
    zeta_hat_init: float = 0.1
    zeta_hat_shrink: float = 10.0
    # False: Capped-CG derives its accuracy as zeta / (3 kappa) internally.
    adaptive_zeta_hat: bool = True
    eps_r: float = 1e-6
    max_backtracks: int = 100

    def replace(self, **changes) -> "SolverConfig":
        data = asdict(self)
        unknown = set(changes) - set(data)
        if unknown:
            raise ParameterOutOfRange(sorted(unknown)[0], changes[sorted(unknown)[0]], "unknown field")
        data.update(changes)
        return SolverConfig(**data)

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: f.type for f in fields(cls)}


def validate_config(cfg: SolverConfig, bounds: Optional[BoundSpec] = None) -> None:
    """Raise ParameterOutOfRange on the first violated parameter constraint."""

    def open_unit(name):
        v = getattr(cfg, name)
        if not (0.0 < v < 1.0):
            raise ParameterOutOfRange(name, v, "must lie in (0, 1)")

    for name in ("eps_g", "eps_H", "theta", "zeta", "sigma", "beta", "zeta_hat_init"):
        open_unit(name)
    eta_max = (1.0 - cfg.zeta) / 2.0
    if not (0.0 < cfg.eta < eta_max):
        raise ParameterOutOfRange("eta", cfg.eta, f"must lie in (0, {eta_max})")
    if not (0.0 <= cfg.delta < 1.0):
        raise ParameterOutOfRange("delta", cfg.delta, "must lie in [0, 1)")
    if cfg.M_hint is not None and not (cfg.M_hint >= 0.0):
        raise ParameterOutOfRange("M_hint", cfg.M_hint, "must be nonnegative")
    if cfg.max_outer_iters < 0:
        raise ParameterOutOfRange("max_outer_iters", cfg.max_outer_iters, "must be nonnegative")
    if not (cfg.max_wall_seconds > 0):
        raise ParameterOutOfRange("max_wall_seconds", cfg.max_wall_seconds, "must be positive")
    if not (cfg.zeta_hat_shrink > 1.0):
        raise ParameterOutOfRange("zeta_hat_shrink", cfg.zeta_hat_shrink, "must exceed 1")
    if not (0.0 < cfg.eps_r < 1.0):
        raise ParameterOutOfRange("eps_r", cfg.eps_r, "must lie in (0, 1)")
    if cfg.max_backtracks < 1:
        raise ParameterOutOfRange("max_backtracks", cfg.max_backtracks, "must be positive")
    if bounds is not None and bounds.two_sided:
        umin = bounds.min_upper()
        if 2.0 * cfg.eps_H > umin:
            raise ParameterOutOfRange("eps_H", cfg.eps_H, f"2*eps_H must not exceed min upper bound {umin}")


@dataclass(slots=True)
class IterationRecord:
    k: int
    f: float
    step_type: StepKind
    alpha: float
    dir_norm: float
    elapsed: float
    residual: float = math.nan
    projnorm: float = math.nan


@dataclass
class SolverReport:
    status: Status
    x_final: Vector
    f_final: float
    residual: float
    projnorm: float
    outer_iters: int
    step_counts: dict = field(default_factory=dict)
    oracle_counts: OracleCounts = OracleCounts(0, 0, 0)
    trace: list = field(default_factory=list)
    elapsed: float = 0.0
    meo_calls: int = 0
    message: str = ""
    warnings: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status.converged


def empty_step_counts() -> dict:
    return {k: 0 for k in (StepKind.GRAD_PROJ, StepKind.NEWTON_CG_SOL, StepKind.NEWTON_CG_NC, StepKind.MEO_NC)}


def finite_diff_check(
    oracle: ObjectiveOracle,
    x: Vector,
    n_dirs: int = 5,
    h: float = 1e-5,
    seed: int = 0,
) -> float:
    """Largest relative error of the gradient and Hvp against central differences.

    For each random unit direction v, compares ``(f(x+hv)-f(x-hv))/2h`` with
    ``grad(x)·v`` and ``(grad(x+hv)-grad(x-hv))/2h`` with ``hvp(x, v)``.
    The directional-derivative error is measured relative to ``||grad(x)||``.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    g = oracle.eval_grad(x)
    gnorm = float(np.linalg.norm(g))
    worst = 0.0
    for _ in range(n_dirs):
        v = rng.standard_normal(x.size)
        v /= np.linalg.norm(v)
        fd = (oracle.eval_f(x + h * v) - oracle.eval_f(x - h * v)) / (2 * h)
        exact = float(g @ v)
        scale = max(abs(fd), abs(exact), gnorm)
        if scale > 0:
            worst = max(worst, abs(fd - exact) / scale)
        fd_h = (oracle.eval_grad(x + h * v) - oracle.eval_grad(x - h * v)) / (2 * h)
        hv = oracle.eval_hvp(x, v)
        scale = max(np.linalg.norm(fd_h), np.linalg.norm(hv))
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(fd_h - hv) / scale))
    return worst
