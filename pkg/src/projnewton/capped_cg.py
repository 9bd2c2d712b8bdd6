"""Capped conjugate gradient on the damped system ``(H + 2 eps I) y = -g``.

Either returns an approximate solution (``SOL``) or a direction along which
the damped matrix has curvature below ``eps`` (``NC``). One Hessian-vector
product is spent per CG iteration: ``H r_j`` is recovered from the
recurrence ``p_j = -r_j + beta_j p_{j-1}`` and ``H y_j`` from
``r_j = (H + 2 eps I) y_j + g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .problem import ProjNewtonError, Vector

SOL = "SOL"
NC = "NC"


class CappedCGError(ProjNewtonError):
    """Raised on numerical pathology; carries the final ``kappa`` and ``M`` when known."""

    kappa: float = math.nan
    M_final: float = math.nan


class IterCapExceeded(CappedCGError):
    pass


class ZeroGradient(CappedCGError, ValueError):
    pass


class MaskedHvp:
    """Hessian-vector product restricted to the principal submatrix on ``mask``."""

    def __init__(self, base: Callable[[Vector], Vector], mask: np.ndarray, n: int):
        self.base = base
        self.mask = np.asarray(mask)
        self.n = n
        self._buf = np.zeros(n)

    def __call__(self, v: Vector) -> Vector:
        self._buf[:] = 0.0
        self._buf[self.mask] = v
        return self.base(self._buf)[self.mask]

    @property
    def dim(self) -> int:
        return int(self.mask.sum()) if self.mask.dtype == bool else int(self.mask.size)


@dataclass
class CappedCgOutcome:
    d_type: str
    d: Vector
    iters: int
    M_final: float
    kappa: float
    zeta_hat: float
    tau: float
    T: float
    residual_norm: float
    curvature: float
    """``d^T H d / ||d||^2`` for the undamped H (computed for every exit)."""

    @property
    def is_nc(self) -> bool:
        return self.d_type == NC


def weak_curvature_cap(kappa: float, zeta_hat: float) -> int:
    """Iteration count after which the residual-growth trap must have fired."""
    sk = math.sqrt(kappa)
    return int(math.ceil(sk * math.log(144.0 * sk / zeta_hat ** 2)))


def capped_cg(
    hvp: Callable[[Vector], Vector],
    g: Vector,
    eps: float,
    zeta: float = 0.5,
    zeta_hat: Optional[float] = None,
    M: float = 0.0,
    iter_cap: Optional[int] = None,
) -> CappedCgOutcome:
    """Run Capped CG.

    Args:
        hvp: ``v -> H v`` for the symmetric matrix H.
        g: right-hand side, nonzero.
        eps: damping parameter in (0, 1).
        zeta: accuracy parameter; the relative residual target is
            ``zeta / (3 kappa)`` and tracks every update of the norm estimate.
        zeta_hat: fixed relative residual target. Overrides ``zeta``-derived
            target; kappa, tau and T are still updated.
        M: initial estimate of ``||H||`` (0 if unknown).
        iter_cap: hard limit on CG iterations. By default the weak-curvature
            bound for the current kappa plus 5, recomputed as kappa grows.
    """
    g = np.asarray(g, dtype=float)
    if not np.any(g):
        raise ZeroGradient("Capped CG needs a nonzero right-hand side")
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    fixed_zeta_hat = zeta_hat is not None

    state = {}

    def refresh(Mv):
        kappa = (Mv + 2.0 * eps) / eps
        zh = zeta_hat if fixed_zeta_hat else zeta / (3.0 * kappa)
        tau = math.sqrt(kappa) / (math.sqrt(kappa) + 1.0)
        T = 4.0 * kappa ** 4 / (1.0 - math.sqrt(tau)) ** 2
        state.update(M=Mv, kappa=kappa, zeta_hat=zh, tau=tau, T=T)

    refresh(float(M))

    def cap():
        if iter_cap is not None:
            return iter_cap
        return weak_curvature_cap(state["kappa"], state["zeta_hat"]) + 5

    def finish(d_type, d, j, rnorm, Hd=None):
        if Hd is None:
            Hd = hvp(d)
        dd = float(d @ d)
        curv = float(d @ Hd) / dd
        return CappedCgOutcome(
            d_type, d, j, state["M"], state["kappa"], state["zeta_hat"],
            state["tau"], state["T"], rnorm, curv,
        )

    two_eps = 2.0 * eps
    y = np.zeros_like(g)
    r = g.copy()
    p = -g
    r0 = float(np.linalg.norm(r))
    Hp = hvp(p)
    Hbp = Hp + two_eps * p
    pp = float(p @ p)
    if float(p @ Hbp) < eps * pp:
        return finish(NC, p, 0, r0, Hp)
    pn = math.sqrt(pp)
    hp_ratio = float(np.linalg.norm(Hp)) / pn
    if hp_ratio > state["M"]:
        refresh(hp_ratio)

    # H-bar y_i = r_i - g, so storing residuals is enough for the weak-curvature search.
    ys = [y.copy()]
    rs = [r.copy()]
    j = 0
    rr = float(r @ r)
    while True:
        if j >= cap():
            err = IterCapExceeded(f"Capped CG did not exit within {j} iterations")
            err.kappa, err.M_final = state["kappa"], state["M"]
            raise err
        pHbp = float(p @ Hbp)
        alpha = rr / pHbp
        y = y + alpha * p
        r = r + alpha * Hbp
        rr_new = float(r @ r)
        beta = rr_new / rr
        Hp_prev = Hp
        p = -r + beta * p
        rr = rr_new
        j += 1
        Hp = hvp(p)
        Hbp = Hp + two_eps * p
        Hr = beta * Hp_prev - Hp
        Hy = r - g - two_eps * y
        ys.append(y.copy())
        rs.append(r.copy())

        yn = float(np.linalg.norm(y))
        rn = math.sqrt(rr)
        pn = float(np.linalg.norm(p))
        ratios = [float(np.linalg.norm(Hp)) / pn if pn > 0 else 0.0,
                  float(np.linalg.norm(Hy)) / yn if yn > 0 else 0.0,
                  float(np.linalg.norm(Hr)) / rn if rn > 0 else 0.0]
        mx = max(ratios)
        if state["M"] < mx:
            refresh(mx)

        yHby = float(y @ (r - g))
        if yHby < eps * yn * yn:
            return finish(NC, y, j, rn, Hy)
        if rn <= state["zeta_hat"] * r0:
            return finish(SOL, y, j, rn, Hy)
        if float(p @ Hbp) < eps * pn * pn:
            return finish(NC, p, j, rn, Hp)
        if rn > math.sqrt(state["T"]) * state["tau"] ** (j / 2.0) * r0:
            alpha = rr / float(p @ Hbp)
            y_next = y + alpha * p
            r_next = r + alpha * Hbp
            for i in range(j):
                dy = y_next - ys[i]
                dyy = float(dy @ dy)
                if dyy == 0.0:
                    continue
                if float(dy @ (r_next - rs[i])) < eps * dyy:
                    return finish(NC, dy, j, rn)
            err = CappedCGError("residual-growth trap fired but no weak-curvature direction was found")
            err.kappa, err.M_final = state["kappa"], state["M"]
            raise err


def rescale_nc(t: Vector, g: Vector, curvature: float) -> Vector:
    """Negative-curvature step of length ``|t^T H t| / ||t||^2`` pointing downhill."""
    sgn = 1.0 if float(t @ g) >= 0.0 else -1.0
    return -sgn * abs(curvature) * t / float(np.linalg.norm(t))
