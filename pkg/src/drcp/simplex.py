"""Dense simplex kernels for programs with few variables and many inequality rows.

The inequality program min a'x s.t. U x <= r, lo <= x <= hi is solved through
its dual, min r'y s.t. U'y = -a, y >= 0, whose basis has only d rows.  The
simplex multipliers of the dual are the primal optimizer, the dual basic
variables are the primal row multipliers, and primal feasibility of the
returned point is exactly the termination criterion of the pivoting loop.
Dantzig pricing is used first; on stalling the loop restarts with Bland's rule,
which cannot cycle.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

PIVOT_TOL = 1e-9
RATIO_TOL = 1e-11

_OPTIMAL = 0
_UNBOUNDED = 1


@dataclass
class LpResult:
    status: str  # "optimal" or "infeasible"
    x: np.ndarray | None = None
    objective: float = np.inf
    row_duals: np.ndarray | None = None
    tight_rows: tuple = ()
    extras: dict = field(default_factory=dict)


def _pivot_loop(A, b, c, basis, *, bland, max_iter):
    """Run simplex pivots on min c'z, Az = b, z >= 0 from a feasible basis.

    Returns (flag, basis, y) where y are the simplex multipliers of the final
    basis.  flag is _OPTIMAL or _UNBOUNDED.
    """
    m, n = A.shape
    cols = np.arange(n)
    for _ in range(max_iter):
        try:
            inv = np.linalg.inv(A[:, basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular simplex basis") from exc
        xb = inv @ b
        y = c[basis] @ inv
        reduced = c - y @ A
        reduced[basis] = 0.0
        if bland:
            entering_set = np.flatnonzero(reduced < -PIVOT_TOL)
            if entering_set.size == 0:
                return _OPTIMAL, basis, y
            entering = int(entering_set[0])
        else:
            entering = int(np.argmin(reduced))
            if reduced[entering] >= -PIVOT_TOL:
                return _OPTIMAL, basis, y
        w = inv @ A[:, entering]
        positive = w > RATIO_TOL
        if not np.any(positive):
            return _UNBOUNDED, basis, y
        ratios = np.full(m, np.inf)
        ratios[positive] = np.maximum(xb[positive], 0.0) / w[positive]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + RATIO_TOL)
        # deterministic leaving choice: smallest basic column id among ties
        leave_pos = int(tied[np.argmin(cols[basis][tied])])
        basis = basis.copy()
        basis[leave_pos] = entering
    raise NumericalFailure("simplex iteration cap exceeded")


def _solve_standard(A, b, c, *, max_iter=None):
    """Two-phase simplex for min c'z, Az = b, z >= 0 with few rows.

    Returns (flag, basis, y).  flag _UNBOUNDED means the problem is unbounded
    below; an infeasible system raises NumericalFailure because every caller
    in this package constructs feasible systems by design.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = A.shape
    if max_iter is None:
        max_iter = 200 + 25 * (n + m)

    sign = np.where(b < 0, -1.0, 1.0)
    A1 = A * sign[:, None]
    b1 = b * sign
    A_art = np.hstack([A1, np.eye(m)])
    c_art = np.concatenate([np.zeros(n), np.ones(m)])
    basis = np.arange(n, n + m)
    try:
        flag, basis, _ = _pivot_loop(A_art, b1, c_art, basis, bland=False, max_iter=max_iter)
    except NumericalFailure:
        flag, basis, _ = _pivot_loop(
            A_art, b1, c_art, np.arange(n, n + m), bland=True, max_iter=20 * max_iter
        )
    xb = np.linalg.solve(A_art[:, basis], b1)
    if flag != _OPTIMAL or float(c_art[basis] @ xb) > 1e-7:
        raise NumericalFailure("phase-1 failed on a structurally feasible system")

    # drive artificial columns out of the basis; the callers' column sets
    # always contain +/- unit columns, so a pivot column exists for every row
    for pos in range(m):
        if basis[pos] >= n:
            Binv_row = np.linalg.solve(A_art[:, basis].T, np.eye(m)[pos])
            row_vals = Binv_row @ A1
            row_vals[basis[basis < n]] = 0.0
            cand = np.flatnonzero(np.abs(row_vals) > 1e-9)
            if cand.size == 0:
                raise NumericalFailure("redundant row in simplex system")
            basis[pos] = int(cand[0])

    try:
        flag, basis, y = _pivot_loop(A1, b1, c, basis, bland=False, max_iter=max_iter)
    except NumericalFailure:
        flag, basis, y = _pivot_loop(A1, b1, c, basis, bland=True, max_iter=20 * max_iter)
    # multipliers of the sign-flipped system map back through the same signs
    return flag, basis, y * sign


def _solve_inequality_once(rows, rhs, objective, lower, upper):
    """One inequality-form solve; returns LpResult without lexicographic refinement."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    rhs = np.asarray(rhs, dtype=np.float64)
    a = np.asarray(objective, dtype=np.float64)
    d = a.size
    m = len(rhs)
    if rows.size == 0:
        rows = np.zeros((0, d))

    eye = np.eye(d)
    A = np.hstack([rows.T, eye, -eye]) if m else np.hstack([eye, -eye])
    cost = np.concatenate([rhs, np.asarray(upper, float), -np.asarray(lower, float)])
    flag, basis, x = _solve_standard(A, -a, cost)
    if flag == _UNBOUNDED:
        return LpResult(status="infeasible")

    xb = np.linalg.solve(A[:, basis], -a)
    duals = np.zeros(m)
    tight = []
    for pos, col in enumerate(basis):
        if col < m:
            duals[col] = max(float(xb[pos]), 0.0)
            tight.append(int(col))
    return LpResult(
        status="optimal",
        x=x.copy(),
        objective=float(a @ x),
        row_duals=duals,
        tight_rows=tuple(sorted(tight)),
    )


def solve_inequality_lp(rows, rhs, objective, lower, upper, *, lexicographic=False):
    """Minimize objective'x subject to rows@x <= rhs and lower <= x <= upper.

    With lexicographic=True, ties in the optimal face are broken by
    sequentially minimizing x_1, x_2, ... at the fixed optimal value, so the
    returned point is the unique lexicographically smallest optimizer.  Row
    duals and the objective always refer to the original objective.
    """
    base = _solve_inequality_once(rows, rhs, objective, lower, upper)
    if base.status != "optimal" or not lexicographic:
        return base

    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    a = np.asarray(objective, dtype=np.float64)
    d = a.size
    if rows.size == 0:
        rows = np.zeros((0, d))
    ext_rows = [rows, a[None, :]]
    ext_rhs = [np.asarray(rhs, float), np.array([base.objective])]
    x = base.x
    for k in range(d):
        ek = np.zeros(d)
        ek[k] = 1.0
        res = _solve_inequality_once(
            np.vstack(ext_rows), np.concatenate(ext_rhs), ek, lower, upper
        )
        if res.status != "optimal":
            # the previous point stays feasible, so this is conditioning noise
            # from near-parallel pinning rows; keep the refinement so far
            break
        x = res.x
        ext_rows.append(ek[None, :])
        ext_rhs.append(np.array([res.objective]))
    base.x = x
    base.objective = float(a @ x)
    return base
