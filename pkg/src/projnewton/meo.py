"""Minimum eigenvalue oracle via randomized Lanczos.

Either certifies ``lambda_min(H) >= -eps`` (wrong with probability at most
``delta``) or returns a unit vector whose Rayleigh quotient is ``<= -eps/2``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .problem import ProjNewtonError, Vector

CERTIFICATE = "Certificate"
NEGATIVE_CURVATURE = "NegativeCurvature"


class MeoTimeout(ProjNewtonError):
    """The caller's wall-clock deadline passed during the Lanczos loop."""


@dataclass
class MeoResult:
    kind: str
    lambda_: float = math.nan
    v: Optional[Vector] = None
    lanczos_iters: int = 0
    budget: int = 0
    orth_error: float = math.nan

    @property
    def certified(self) -> bool:
        return self.kind == CERTIFICATE


def estimate_norm(hvp: Callable[[Vector], Vector], n: int, rng: np.random.Generator, iters: int = 20) -> float:
    """Power-iteration estimate of ``||H||``, inflated by 10%."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = hvp(v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return 1.1 * est


def meo_budget(n: int, eps: float, delta: float, U_H: float) -> int:
    """Lanczos iteration budget ``min(n, 1 + ceil(C / sqrt(eps)))``."""
    if delta <= 0.0:
        return n
    C = math.log(2.75 * n / delta ** 2) * math.sqrt(U_H * max(1.0, eps ** 2)) / 2.0
    return int(min(n, 1 + math.ceil(C / math.sqrt(eps))))


def meo(
    hvp: Callable[[Vector], Vector],
    n: int,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    M: Optional[float] = None,
    norm_iters: int = 20,
    check_orthogonality: bool = False,
    deadline: Optional[float] = None,
) -> MeoResult:
    """Randomized Lanczos with full reorthogonalisation.

    ``M`` bounds ``||H||`` for the iteration budget; without it the norm is
    estimated by power iteration. ``deadline`` is a ``time.perf_counter()``
    value after which MeoTimeout is raised.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    U_H = M if M is not None else estimate_norm(hvp, n, rng, norm_iters)
    budget = meo_budget(n, eps, delta, U_H)
    target = -eps / 2.0

    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    Q = np.empty((min(budget, 64), n))
    alphas: list[float] = []
    betas: list[float] = []
    q_prev = None
    beta_prev = 0.0
    anorm = 0.0
    k = 0
    hv_extra = 0

    def ritz_min(k):
        if k == 1:
            return alphas[0], np.ones(1)
        w, vec = eigh_tridiagonal(np.asarray(alphas[:k]), np.asarray(betas[: k - 1]),
                                  select="i", select_range=(0, 0))
        return float(w[0]), vec[:, 0]

    while k < budget:
        if deadline is not None and time.perf_counter() > deadline:
            raise MeoTimeout(f"deadline reached after {k} Lanczos iterations")
        if k == Q.shape[0]:
            Q = np.concatenate([Q, np.empty((min(Q.shape[0], budget - k), n))])
        Q[k] = q
        w = hvp(q)
        a = float(q @ w)
        alphas.append(a)
        w = w - a * q
        if q_prev is not None:
            w -= beta_prev * q_prev
        # Two passes of classical Gram-Schmidt against the whole basis.
        basis = Q[: k + 1]
        w -= basis.T @ (basis @ w)
        w -= basis.T @ (basis @ w)
        k += 1
        b = float(np.linalg.norm(w))
        anorm = max(anorm, abs(a) + b + beta_prev)

        lam, s = ritz_min(k)
        if lam <= target:
            v = basis.T @ s
            v /= np.linalg.norm(v)
            hv_extra += 1
            rq = float(v @ hvp(v))
            if rq <= target:
                res = MeoResult(NEGATIVE_CURVATURE, rq, v, k, budget)
                if check_orthogonality:
                    res.orth_error = _orth_error(Q[:k])
                return res
        if b <= 1e-12 * max(1.0, anorm):
            # invariant subspace: the Krylov space is exhausted
            break
        betas.append(b)
        q_prev = q
        beta_prev = b
        q = w / b

    res = MeoResult(CERTIFICATE, lanczos_iters=k, budget=budget)
    if check_orthogonality:
        res.orth_error = _orth_error(Q[:k])
    return res


def _orth_error(Q: np.ndarray) -> float:
    G = Q @ Q.T
    return float(np.abs(G - np.eye(G.shape[0])).max()) if G.size else 0.0
