"""Nonnegative matrix factorisation ``min 1/2 ||W Y - V||_F^2`` s.t. ``W, Y >= 0``.

The flat variable is ``x = [vec(W); vec(Y)]`` with ``vec`` in column-major
(Fortran) order, ``W`` of shape ``(m, r)`` first, then ``Y`` of shape ``(r, n)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .pgrad import pgrad_solve
from .problem import BoundSpec, DimensionMismatch, ObjectiveOracle, ProjNewtonError, SolverReport, Vector
from . import geometry as geo

log = logging.getLogger(__name__)


class Rank1SolveFailed(ProjNewtonError):
    pass


@dataclass
class NmfProblem:
    V: np.ndarray
    r: int

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        if self.V.ndim != 2:
            raise DimensionMismatch(f"V must be a matrix, got shape {self.V.shape}")
        if self.r < 1:
            raise DimensionMismatch(f"rank must be positive, got {self.r}")

    @property
    def m(self) -> int:
        return self.V.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[1]

    @property
    def dim(self) -> int:
        return (self.m + self.n) * self.r

    def pack(self, W: np.ndarray, Y: np.ndarray) -> Vector:
        W = np.asarray(W, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if W.shape != (self.m, self.r) or Y.shape != (self.r, self.n):
            raise DimensionMismatch(
                f"expected W {(self.m, self.r)} and Y {(self.r, self.n)}, got {W.shape} and {Y.shape}"
            )
        return np.concatenate([W.ravel(order="F"), Y.ravel(order="F")])

    def unpack(self, x: Vector) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"expected a vector of length {self.dim}, got shape {x.shape}")
        mr = self.m * self.r
        W = x[:mr].reshape((self.m, self.r), order="F")
        Y = x[mr:].reshape((self.r, self.n), order="F")
        return W, Y

    def bounds(self) -> BoundSpec:
        return BoundSpec.nonnegative(self.dim)

    def objective(self, W: np.ndarray, Y: np.ndarray) -> float:
        R = W @ Y - self.V
        return 0.5 * float(np.vdot(R, R))


def nmf_oracle(prob: NmfProblem) -> ObjectiveOracle:
    V = prob.V

    def f(x):
        W, Y = prob.unpack(x)
        R = W @ Y - V
        return 0.5 * float(np.vdot(R, R))

    def grad(x):
        W, Y = prob.unpack(x)
        R = W @ Y - V
        return prob.pack(R @ Y.T, W.T @ R)

    def hvp(x, v):
        W, Y = prob.unpack(x)
        dW, dY = prob.unpack(v)
        R = W @ Y - V
        dR = dW @ Y + W @ dY
        return prob.pack(dR @ Y.T + R @ dY.T, W.T @ dR + dW.T @ R)

    return ObjectiveOracle(prob.dim, f, grad, hvp)


@dataclass
class SyntheticData:
    problem: NmfProblem
    W_true: np.ndarray
    Y_true: np.ndarray
    scale: float
    """V = scale * (W_true @ Y_true + noise)."""
    zero_frac_W: float
    zero_frac_Y: float
    seed: int
    meta: dict = field(default_factory=dict)


def gen_synthetic(m: int, n: int, r: int, seed: int, zero_prob: float = 0.6, noise_rel: float = 0.05) -> SyntheticData:
    """Sparse half-normal factors plus Gaussian noise, normalised so ``mean|V| = 1``."""
    for name, v in (("m", m), ("n", n), ("r", r)):
        if int(v) < 1:
            raise DimensionMismatch(f"{name} must be positive, got {v}")
    rng = np.random.default_rng(seed)
    W = np.abs(rng.standard_normal((m, r)))
    W[rng.random((m, r)) < zero_prob] = 0.0
    Y = np.abs(rng.standard_normal((r, n)))
    Y[rng.random((r, n)) < zero_prob] = 0.0
    clean = W @ Y
    sd = noise_rel * float(np.abs(clean).mean())
    V = clean + sd * rng.standard_normal((m, n))
    mag = float(np.abs(V).mean())
    scale = 1.0 / mag if mag > 0 else 1.0
    V = V * scale
    data = SyntheticData(
        NmfProblem(V, r), W, Y, scale,
        float((W == 0).mean()), float((Y == 0).mean()), int(seed),
    )
    data.meta = {
        "m": m, "n": n, "r": r, "seed": int(seed), "scale": scale, "noise_sd": sd,
        "zero_frac_W": data.zero_frac_W, "zero_frac_Y": data.zero_frac_Y,
    }
    return data


def initial_point(m: int, n: int, r: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Half-normal ``W0, Y0``; each block is rescaled separately to mean entry 1."""
    rng = np.random.default_rng(seed)
    W = np.abs(rng.standard_normal((m, r)))
    Y = np.abs(rng.standard_normal((r, n)))
    return W / W.mean(), Y / Y.mean()


def pgrad_nmf(
    prob: NmfProblem,
    W0: np.ndarray,
    Y0: np.ndarray,
    beta: float = 0.5,
    sigma: float = 0.5,
    tol: float = 1e-4,
    max_iters: int = 5000,
    max_seconds: float = 100.0,
    eps_r: float = 1e-6,
    record_trace: bool = True,
) -> SolverReport:
    if np.any(np.asarray(W0) < 0) or np.any(np.asarray(Y0) < 0):
        raise geo.InfeasiblePoint("initial factors must be nonnegative")
    oracle = nmf_oracle(prob)
    return pgrad_solve(
        oracle, prob.bounds(), prob.pack(W0, Y0),
        beta=beta, sigma=sigma, tol=tol, max_iters=max_iters, max_seconds=max_seconds,
        eps_r=eps_r, record_trace=record_trace,
    )


@dataclass
class Saddle:
    W0: np.ndarray
    Y0: np.ndarray
    w: np.ndarray
    y: np.ndarray
    rank1_projnorm: float
    projnorm: float


def replicate_rank1(w: np.ndarray, y: np.ndarray, r_target: int) -> tuple[np.ndarray, np.ndarray]:
    """``W = (2/r) w 1^T``, ``Y = 1/2 * 1 y`` so that ``W Y = w y`` and stationarity carries over."""
    w = np.asarray(w, dtype=float).reshape(-1, 1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    W = (2.0 / r_target) * np.repeat(w, r_target, axis=1)
    Y = 0.5 * np.repeat(y, r_target, axis=0)
    return W, Y


def polish_rank1(V: np.ndarray, w: np.ndarray, y: np.ndarray, tol: float,
                 max_sweeps: int = 10_000) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact alternating block minimisation for ``min 1/2 ||w y^T - V||^2``, ``w, y >= 0``.

    Each block update is closed form, so no line search is involved. Returns
    ``(w, y, projnorm)``.
    """
    prob = NmfProblem(V, 1)
    oracle = nmf_oracle(prob)
    bounds = prob.bounds()
    w = np.asarray(w, dtype=float).copy()
    y = np.asarray(y, dtype=float).copy()

    def pn_of(w, y):
        x = prob.pack(w[:, None], y[None, :])
        return geo.projnorm(x, oracle.eval_grad(x), bounds)

    pn = pn_of(w, y)
    for sweep in range(max_sweeps):
        if pn <= tol:
            break
        yy = float(y @ y)
        if yy == 0.0:
            break
        w = np.maximum(V @ y, 0.0) / yy
        ww = float(w @ w)
        if ww == 0.0:
            break
        y = np.maximum(V.T @ w, 0.0) / ww
        if sweep % 10 == 9:
            pn = pn_of(w, y)
    pn = pn_of(w, y)
    return w, y, pn


def build_saddle(
    m: int,
    n: int,
    seed: int,
    r_target: int = 10,
    V: Optional[np.ndarray] = None,
    tol: float = 1e-6,
    max_iters: int = 100_000,
    max_seconds: float = 60.0,
) -> Saddle:
    """First-order stationary rank-``r_target`` point built from a rank-1 solve.

    Uses the synthetic instance ``gen_synthetic(m, n, r_target, seed)`` unless
    ``V`` is given. The rank-1 pair comes from projected gradient run to
    projected-gradient norm ``tol``; when its line search stalls on rounding
    first, the pair is finished with :func:`polish_rank1`.
    """
    if V is None:
        V = gen_synthetic(m, n, r_target, seed).problem.V
    p1 = NmfProblem(V, 1)
    w0, y0 = initial_point(p1.m, p1.n, 1, seed)
    rep = pgrad_nmf(p1, w0, y0, tol=tol, max_iters=max_iters, max_seconds=max_seconds, record_trace=False)
    w, y = p1.unpack(rep.x_final)
    pn1 = rep.projnorm
    if not pn1 <= tol:
        # Armijo tests lose resolution once F decreases fall below rounding in F
        w, y, pn1 = polish_rank1(V, w[:, 0], y[0], tol)
        w, y = w[:, None], y[None, :]
    if not pn1 <= tol:
        raise Rank1SolveFailed(
            f"rank-1 solve stopped with projnorm {pn1:.3e} > {tol:.1e} ({rep.status.value}, then polished)"
        )
    W0, Y0 = replicate_rank1(w[:, 0], y[0], r_target)
    prob = NmfProblem(V, r_target)
    x0 = prob.pack(W0, Y0)
    pn = geo.projnorm(x0, nmf_oracle(prob).eval_grad(x0), prob.bounds())
    if pn > 10.0 * max(pn1, np.finfo(float).tiny):
        raise Rank1SolveFailed(f"replicated point has projnorm {pn:.3e}, rank-1 had {pn1:.3e}")
    return Saddle(W0, Y0, w[:, 0].copy(), y[0].copy(), pn1, pn)
