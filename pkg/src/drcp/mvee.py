"""Minimum-volume enclosing ellipsoid via Khachiyan iteration with a Newton polish.

The coarse stage is the barycentric-coordinate ascent with away steps; it is
only run far enough to identify a candidate support set.  A Newton iteration on
the dual barycentric weights of the support then drives the duality gap to
machine precision, which makes the returned ellipsoid a function of the support
points alone: two solves over different supersets of the same support agree to
far better than the consensus tolerances.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, NumericalFailure

TAU_MVEE = 1e-7
_COARSE_TOL = 1e-5
_SUPPORT_WEIGHT = 1e-9


@dataclass
class MveeResult:
    center: np.ndarray
    shape: np.ndarray  # W with (y - c)' W (y - c) <= 1
    objective: float  # log det(W^{-1})
    weights: np.ndarray  # barycentric weights, one per input point
    support: np.ndarray  # indices of points carrying weight
    gap: float


def _lifted(points):
    return np.hstack([points, np.ones((len(points), 1))])


def _leverages(Q, w):
    """M_j = q_j' V^{-1} q_j for V = Q' diag(w) Q; raises on singular V."""
    V = Q.T @ (w[:, None] * Q)
    sol = np.linalg.solve(V, Q.T)
    return np.einsum("ij,ji->i", Q, sol)


def _khachiyan(Q, tol, max_iter):
    k, qd = Q.shape
    w = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        M = _leverages(Q, w)
        j_add = int(np.argmax(M))
        kappa_add = M[j_add]
        active = w > 0
        M_act = np.where(active, M, np.inf)
        j_away = int(np.argmin(M_act))
        kappa_away = M_act[j_away]
        if kappa_add <= qd * (1 + tol) and kappa_away >= qd * (1 - 10 * tol):
            break
        if kappa_add - qd >= qd - kappa_away or kappa_away <= 1.0:
            beta = (kappa_add - qd) / (qd * (kappa_add - 1.0))
            w *= 1.0 - beta
            w[j_add] += beta
        else:
            beta = (qd - kappa_away) / (qd * (kappa_away - 1.0))
            beta = min(beta, w[j_away] / (1.0 - w[j_away]))
            w *= 1.0 + beta
            w[j_away] -= beta * (1.0 + beta) / (1.0 + beta)  # keeps sum at 1
            w[j_away] = max(w[j_away], 0.0)
            w /= w.sum()
    return w


def _newton_on_support(Q, support, w0, max_steps=80):
    """Maximize log det(Q_S' diag(w) Q_S) over the simplex restricted to S."""
    qd = Q.shape[1]
    S = np.array(sorted(support), dtype=int)
    w = np.maximum(w0[S], _SUPPORT_WEIGHT)
    w /= w.sum()
    for _ in range(max_steps):
        QS = Q[S]
        V = QS.T @ (w[:, None] * QS)
        try:
            sol = np.linalg.solve(V, QS.T)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular moment matrix in ellipsoid polish") from exc
        G = QS @ sol  # G_jk = q_j' V^{-1} q_k
        g = np.diag(G).copy()
        if np.max(np.abs(g - qd)) <= 1e-12 * qd:
            break
        H = -(G * G)
        n = len(S)
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = H
        kkt[:n, n] = 1.0
        kkt[n, :n] = 1.0
        rhs = np.concatenate([-g, [0.0]])
        try:
            step = np.linalg.solve(kkt, rhs)[:n]
        except np.linalg.LinAlgError:
            step = None
        if step is None or not np.all(np.isfinite(step)):
            break
        alpha = 1.0
        neg = step < 0
        if np.any(neg):
            alpha = min(1.0, 0.9 * np.min(-w[neg] / step[neg]))
        # drop points whose weight wants to vanish
        if alpha < 1e-10:
            drop = S[neg & (w < 1e-8)]
            if drop.size:
                keep = ~np.isin(S, drop)
                S = S[keep]
                w = w[keep]
                w /= w.sum()
                continue
            break
        w = w + alpha * step
        w = np.maximum(w, 0.0)
        zero = w <= 0
        if np.any(zero):
            S = S[~zero]
            w = w[~zero]
        w /= w.sum()
    full = np.zeros(len(Q))
    full[S] = w
    return full, S


def minimum_volume_ellipsoid(points, *, tol=TAU_MVEE, max_iter=5000) -> MveeResult:
    """Smallest ellipsoid (y - c)' W (y - c) <= 1 covering the given points.

    Raises DegenerateInput when the points do not affinely span the space.
    The relative optimality gap of the result is at most `tol`.
    """
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    k, q = P.shape
    if k < q + 1 or np.linalg.matrix_rank(P - P[0], tol=1e-10) < q:
        raise DegenerateInput("points do not span the space")
    Q = _lifted(P)
    qd = q + 1

    w = _khachiyan(Q, _COARSE_TOL, max_iter)
    M = _leverages(Q, w)
    support = set(np.flatnonzero(w > _SUPPORT_WEIGHT))
    support |= set(np.flatnonzero(M >= qd * (1 - 1e-3)))

    for _ in range(30):
        w, S = _newton_on_support(Q, support, w)
        M = _leverages(Q, w)
        violated = np.flatnonzero(M > qd * (1 + tol * 0.1))
        new = set(violated) - set(S)
        if not new:
            support = set(S)
            break
        support = set(S) | new
    else:
        raise NumericalFailure("support repair loop did not settle")

    gap = float(np.max(M) / qd - 1.0)
    if gap > tol:
        raise NumericalFailure(f"ellipsoid gap {gap:.2e} above tolerance")

    center = P.T @ w
    sigma = P.T @ (w[:, None] * P) - np.outer(center, center)
    shape = np.linalg.inv(sigma) / q
    sign, logdet_sigma = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise NumericalFailure("ellipsoid shape lost positive definiteness")
    objective = q * math.log(q) + logdet_sigma  # log det(W^{-1})
    return MveeResult(
        center=center,
        shape=shape,
        objective=float(objective),
        weights=w,
        support=np.array(sorted(support), dtype=int),
        gap=max(gap, 0.0),
    )


def ellipsoid_volume(shape) -> float:
    """Volume of {y : (y - c)' W (y - c) <= 1} for the given shape matrix W."""
    W = np.asarray(shape, dtype=np.float64)
    q = W.shape[0]
    unit_ball = math.pi ** (q / 2.0) / math.gamma(q / 2.0 + 1.0)
    return unit_ball / math.sqrt(np.linalg.det(W))


def membership_values(points, center, shape) -> np.ndarray:
    """(y - c)' W (y - c) - 1 for each point; <= 0 means covered."""
    diff = np.atleast_2d(points) - center
    return np.einsum("ij,jk,ik->i", diff, shape, diff) - 1.0
