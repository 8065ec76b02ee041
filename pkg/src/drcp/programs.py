"""Convex programs over constraint pools and their deterministic solvers.

All solvers canonicalize the index set by sorting ids before any numerical
work, so the returned Solution is a pure function of the index *set*: any
permutation of the same ids yields bit-identical output.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateInput, NumericalFailure
from .mvee import membership_values, minimum_volume_ellipsoid
from .pool import ConstraintPool, Family
from .simplex import solve_inequality_lp

TAU_FEAS = 1e-8
TAU_ACT = 1e-6
TAU_OBJ = 1e-9


class Status(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"


@dataclass
class Solution:
    status: Status
    x_star: np.ndarray
    j_star: float
    active: tuple = ()
    multipliers: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "x_star": [None if not math.isfinite(v) else float(v) for v in self.x_star],
            "j_star": None if not math.isfinite(self.j_star) else float(self.j_star),
            "active": list(self.active),
            "multipliers": {str(k): float(v) for k, v in self.multipliers.items()},
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def _infeasible_solution(dim: int) -> Solution:
    return Solution(Status.INFEASIBLE, np.full(dim, np.nan), np.inf)


def family_dimension(family: Family, delta_dim: int) -> int:
    """Decision-variable dimension implied by the family and realization size."""
    if family is Family.LINEAR_HALFSPACE:
        return delta_dim - 1
    if family is Family.ELLIPSOID_MEMBERSHIP:
        q = delta_dim
        return q * (q + 3) // 2 + 1
    p = delta_dim - 1
    return p + 3


@dataclass(frozen=True)
class ConvexProgram:
    """Objective direction, box domain, and an index set into a shared pool."""

    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    pool: ConstraintPool
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "objective", np.asarray(self.objective, dtype=np.float64))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=np.float64))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=np.float64))
        object.__setattr__(self, "indices", tuple(self.indices))
        d = family_dimension(self.pool.family, self.pool.dim)
        if self.objective.shape != (d,):
            raise ValueError(f"objective must have dimension {d}")
        if not np.any(self.objective):
            raise ValueError("objective direction must be nonzero")
        if self.lower.shape != (d,) or self.upper.shape != (d,):
            raise ValueError("box bounds must match the problem dimension")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("box bounds must be finite")
        if not np.all(self.lower < self.upper):
            raise ValueError("box must have lower < upper per coordinate")
        for cid in self.indices:
            if cid not in self.pool:
                raise ValueError(f"index {cid} not in pool")
        if self.pool.family is not Family.LINEAR_HALFSPACE:
            canon = np.zeros(d)
            canon[-1] = 1.0
            if not np.array_equal(self.objective, canon):
                raise ValueError("this family fixes the objective to the last coordinate")
        if self.pool.family is Family.CLASSIFICATION_MARGIN:
            if self.lower[-1] < 0 or self.lower[-2] < 0:
                raise ValueError("slack coordinates require nonnegative lower bounds")

    @property
    def dimension(self) -> int:
        return self.objective.size

    def restrict(self, ids) -> "ConvexProgram":
        return ConvexProgram(self.objective, self.lower, self.upper, self.pool, tuple(ids))


# -- ellipsoid parameter packing --------------------------------------------


def pack_ellipsoid(center, shape, objective) -> np.ndarray:
    q = len(center)
    iu = np.triu_indices(q)
    return np.concatenate([center, np.asarray(shape)[iu], [objective]])


def unpack_ellipsoid(x, q):
    center = x[:q]
    iu = np.triu_indices(q)
    W = np.zeros((q, q))
    W[iu] = x[q : q + q * (q + 1) // 2]
    W = W + W.T - np.diag(np.diag(W))
    return center, W


# -- constraint evaluation ---------------------------------------------------


def constraint_values(program: ConvexProgram, x, ids=None) -> np.ndarray:
    """f_j(x) for each id, in the canonical scaling of the family."""
    ids = program.indices if ids is None else tuple(ids)
    if not ids:
        return np.zeros(0)
    pool = program.pool
    if pool.family is Family.LINEAR_HALFSPACE:
        rows = pool.scaled_deltas(ids)
        return rows[:, :-1] @ x + rows[:, -1]
    if pool.family is Family.ELLIPSOID_MEMBERSHIP:
        center, W = unpack_ellipsoid(x, pool.dim)
        return membership_values(pool.deltas(ids), center, W)
    d = pool.deltas(ids)
    b, labels = d[:, :-1], d[:, -1]
    p = b.shape[1]
    theta, rho, nu = x[:p], x[p], x[p + 1]
    return 1.0 - nu - labels * (b @ theta + rho)


def active_set(program: ConvexProgram, solution: Solution, tol=TAU_ACT) -> tuple:
    """Ids whose constraint is tight at the optimizer; empty for infeasible input."""
    if solution.status is Status.INFEASIBLE:
        return ()
    vals = constraint_values(program, solution.x_star)
    return tuple(cid for cid, v in zip(program.indices, vals) if abs(v) <= tol)


# -- family solvers -----------------------------------------------------------


def _solve_halfspace(program, ids):
    pool = program.pool
    rows = pool.scaled_deltas(ids)
    scales = pool.row_scales(ids)
    lp = solve_inequality_lp(
        rows[:, :-1] if len(ids) else np.zeros((0, program.dimension)),
        -rows[:, -1] if len(ids) else np.zeros(0),
        program.objective,
        program.lower,
        program.upper,
        lexicographic=True,
    )
    if lp.status != "optimal":
        return _infeasible_solution(program.dimension)
    multipliers = {
        cid: float(mu / s)
        for cid, mu, s in zip(ids, lp.row_duals, scales)
        if mu > 0.0
    }
    sol = Solution(Status.FEASIBLE, lp.x, lp.objective, multipliers=multipliers)
    restricted = program.restrict(ids)
    sol.active = active_set(restricted, sol)
    return sol


def _solve_ellipsoid(program, ids):
    pool = program.pool
    q = pool.dim
    if len(ids) < q + 1:
        raise DegenerateInput("too few points for a bounded ellipsoid")
    res = minimum_volume_ellipsoid(pool.deltas(ids))
    x = pack_ellipsoid(res.center, res.shape, res.objective)
    multipliers = {ids[k]: float(res.weights[k]) for k in res.support if res.weights[k] > 0}
    sol = Solution(Status.FEASIBLE, x, res.objective, multipliers=multipliers)
    sol.active = active_set(program.restrict(ids), sol)
    return sol


def _classification_newton(b, labels, S, theta, rho, nu, lam, *, fix_nu):
    """Solve the stationarity system on the tight margin set S.

    fix_nu pins the slack at zero and drops its stationarity row.  Returns
    (theta, rho, nu, lam, converged).
    """
    p = b.shape[1]
    s = len(S)
    bS = b[S]
    lS = labels[S]
    for _ in range(60):
        t = np.linalg.norm(theta)
        if t < 1e-12:
            return theta, rho, nu, lam, False
        svec = bS.T @ (lam * lS)
        margins = 1.0 - nu - lS * (bS @ theta + rho)
        F = [theta - t * svec, [lam @ lS], margins]
        if not fix_nu:
            F.insert(2, [lam.sum() - 1.0])
        F = np.concatenate([np.atleast_1d(np.asarray(f, float)) for f in F])
        if np.max(np.abs(F)) <= 1e-12:
            return theta, rho, nu, lam, True
        u = theta / t
        n_var = p + 1 + (0 if fix_nu else 1) + s
        J = np.zeros((n_var, n_var))
        col_rho = p
        col_nu = None if fix_nu else p + 1
        col_lam = p + 1 + (0 if fix_nu else 1)
        r = 0
        J[r : r + p, :p] = np.eye(p) - np.outer(svec, u)
        J[r : r + p, col_lam:] = -t * (lS[None, :] * bS.T)
        r += p
        J[r, col_lam:] = lS
        r += 1
        if not fix_nu:
            J[r, col_lam:] = 1.0
            r += 1
        J[r:, :p] = -lS[:, None] * bS
        J[r:, col_rho] = -lS
        if not fix_nu:
            J[r:, col_nu] = -1.0
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return theta, rho, nu, lam, False
        if not np.all(np.isfinite(step)):
            return theta, rho, nu, lam, False
        theta = theta + step[:p]
        rho = rho + step[col_rho]
        if not fix_nu:
            nu = nu + step[col_nu]
        lam = lam + step[col_lam:]
    return theta, rho, nu, lam, False


def _solve_classification(program, ids, warm_cuts=None):
    pool = program.pool
    d = program.dimension
    p = d - 3
    a = program.objective
    deltas = pool.deltas(ids)
    b = deltas[:, :-1] if len(ids) else np.zeros((0, p))
    labels = deltas[:, -1] if len(ids) else np.zeros(0)

    # margin rows as linear constraints on z = (theta, rho, nu, phi)
    def margin_rows():
        rows = np.zeros((len(ids), d))
        rows[:, :p] = -labels[:, None] * b
        rows[:, p] = -labels
        rows[:, p + 1] = -1.0
        return rows, -np.ones(len(ids))

    base_rows, base_rhs = margin_rows()
    cut_mat = np.vstack([np.eye(p), -np.eye(p)])
    if warm_cuts is not None and len(warm_cuts):
        cut_mat = np.vstack([cut_mat, warm_cuts])
    lp = None
    for _ in range(60):
        crows = np.zeros((len(cut_mat), d))
        crows[:, :p] = cut_mat
        crows[:, p + 1] = 1.0
        crows[:, p + 2] = -1.0
        lp = solve_inequality_lp(
            np.vstack([base_rows, crows]),
            np.concatenate([base_rhs, np.zeros(len(cut_mat))]),
            a,
            program.lower,
            program.upper,
        )
        if lp.status != "optimal":
            raise NumericalFailure("margin relaxation unexpectedly infeasible")
        z = lp.x
        theta, nu, phi = z[:p], z[p + 1], z[p + 2]
        norm = np.linalg.norm(theta)
        if norm + nu - phi <= 1e-6:
            break
        cut_mat = np.vstack([cut_mat, theta / norm])
    z = lp.x
    theta, rho, nu = z[:p].copy(), float(z[p]), float(z[p + 1])

    margins = 1.0 - nu - labels * (b @ theta + rho) if len(ids) else np.zeros(0)
    polished = False
    lam = np.zeros(0)
    S: list = []
    if len(ids) and np.linalg.norm(theta) > 1e-9:
        for capture in (1e-5, 1e-7):
            S = list(np.flatnonzero(margins >= -capture))
            if not S:
                continue
            theta_c, rho_c, nu_c = theta.copy(), rho, nu
            lam = np.full(len(S), 1.0 / len(S))
            for _ in range(30):
                fix_nu = nu_c <= 1e-7
                th, rh, nv, lam_s, ok = _classification_newton(
                    b, labels, S, theta_c.copy(), rho_c, 0.0 if fix_nu else nu_c,
                    lam.copy(), fix_nu=fix_nu,
                )
                if not ok:
                    break
                if fix_nu and 1.0 - lam_s.sum() < -1e-10:
                    th, rh, nv, lam_s, ok = _classification_newton(
                        b, labels, S, theta_c.copy(), rho_c, max(nu_c, 1e-6),
                        lam.copy(), fix_nu=False,
                    )
                    if not ok:
                        break
                drop = np.flatnonzero(lam_s < -1e-10)
                if drop.size:
                    S = [S[i] for i in range(len(S)) if i not in set(drop)]
                    if not S:
                        break
                    lam = np.full(len(S), 1.0 / len(S))
                    continue
                all_margins = 1.0 - nv - labels * (b @ th + rh)
                viol = np.flatnonzero(all_margins > TAU_FEAS)
                new = [int(j) for j in viol if j not in set(S)]
                if new:
                    S = sorted(set(S) | set(new))
                    lam = np.full(len(S), 1.0 / len(S))
                    theta_c, rho_c, nu_c = th, rh, max(nv, 0.0)
                    continue
                phi_new = float(np.linalg.norm(th) + nv)
                if abs(phi_new - lp.objective) <= 1e-4 * max(1.0, abs(lp.objective)):
                    theta, rho, nu = th, float(rh), float(max(nv, 0.0))
                    lam = lam_s
                    polished = True
                break
            if polished:
                break
        if not polished:
            raise NumericalFailure("margin stationarity polish did not converge")

    phi = float(np.linalg.norm(theta) + nu)
    x = np.concatenate([theta, [rho, nu, phi]])
    multipliers = {}
    if polished:
        multipliers = {ids[j]: float(l) for j, l in zip(S, lam) if l > 0}
    sol = Solution(Status.FEASIBLE, x, phi, multipliers=multipliers)
    sol.active = active_set(program.restrict(ids), sol)
    return sol, cut_mat[2 * p :][-40:]


def solve(program: ConvexProgram) -> Solution:
    """Deterministic solve of the program over its index set.

    The index set is canonicalized by sorting, so any permutation of the same
    ids produces bit-identical results.  Raises DegenerateInput for ellipsoid
    programs whose points do not span the space.
    """
    ids = tuple(sorted(program.indices))
    family = program.pool.family
    if family is Family.LINEAR_HALFSPACE:
        return _solve_halfspace(program, ids)
    if family is Family.ELLIPSOID_MEMBERSHIP:
        return _solve_ellipsoid(program, ids)
    return _solve_classification(program, ids)[0]


def solve_with_hint(program: ConvexProgram, hint=None):
    """Solve plus an opaque warm-start hint for resolves over similar sets.

    The hint only accelerates the solve; the result matches solve() up to the
    stationarity-polish tolerance (~1e-12).  Families without warm state
    return hint None.
    """
    ids = tuple(sorted(program.indices))
    family = program.pool.family
    if family is Family.CLASSIFICATION_MARGIN:
        return _solve_classification(program, ids, warm_cuts=hint)
    return solve(program), None
