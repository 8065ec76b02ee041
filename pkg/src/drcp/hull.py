"""Exact convex-hull vertex identification through LP membership tests.

The planar case uses a monotone chain.  In general dimension each point is
tested against the set of already-confirmed vertices: the separation LP either
certifies the point inside that hull (so inside the full hull as well) or
yields a direction whose extreme point is a new confirmed vertex.  This keeps
every LP small while remaining exact in any dimension, including point sets
that only span an affine subspace.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

TAU_HULL = 1e-9

_TIE_TOL = 1e-12
_PIVOT_TOL = 1e-10
_RATIO_TOL = 1e-11


@dataclass(frozen=True)
class VertexSet:
    indices: tuple
    dim: int

    def __len__(self):
        return len(self.indices)

    def __contains__(self, cid):
        return cid in set(self.indices)

    def __iter__(self):
        return iter(self.indices)


def _membership_pivots(A, b, c, basis, *, bland, max_iter):
    """Simplex pivots from a feasible basis; returns (basis, y) at optimality."""
    n = A.shape[1]
    cols = np.arange(n)
    for _ in range(max_iter):
        try:
            inv = np.linalg.inv(A[:, basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular membership basis") from exc
        xb = inv @ b
        y = c[basis] @ inv
        reduced = c - y @ A
        reduced[basis] = 0.0
        if bland:
            cand = np.flatnonzero(reduced < -_PIVOT_TOL)
            if cand.size == 0:
                return basis, y
            entering = int(cand[0])
        else:
            entering = int(np.argmin(reduced))
            if reduced[entering] >= -_PIVOT_TOL:
                return basis, y
        w = inv @ A[:, entering]
        positive = w > _RATIO_TOL
        if not np.any(positive):
            raise NumericalFailure("membership problem cannot be unbounded")
        ratios = np.full(len(b), np.inf)
        ratios[positive] = np.maximum(xb[positive], 0.0) / w[positive]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + _RATIO_TOL)
        leave_pos = int(tied[np.argmin(cols[basis][tied])])
        basis = basis.copy()
        basis[leave_pos] = entering
    raise NumericalFailure("membership pivot cap exceeded")


def separation(point, others, tol=TAU_HULL, want_support=False):
    """Best margin of a hyperplane separating `point` from conv(others).

    Returns (margin, direction).  margin > tol certifies the point outside the
    hull; otherwise the point is within tol of it.  The direction has unit
    max-norm and satisfies direction@point >= direction@q + margin for all q.
    With want_support=True a third element lists (position, weight) pairs of
    the barycentric support expressing the point inside the hull.

    Internally this minimizes the l1 distance from the point to the hull over
    barycentric weights; that standard form admits an immediately feasible
    basis (nearest point plus signed residual slacks), so no phase-1 pass is
    needed, and its row duals are exactly the separating functional.
    """
    others = np.atleast_2d(np.asarray(others, dtype=np.float64))
    point = np.asarray(point, dtype=np.float64)
    m, ell = others.shape
    if m == 0:
        return (np.inf, np.zeros(ell), []) if want_support else (np.inf, np.zeros(ell))
    A = np.zeros((ell + 1, m + 2 * ell))
    A[:ell, :m] = others.T
    A[ell, :m] = 1.0
    A[:ell, m : m + ell] = np.eye(ell)
    A[:ell, m + ell :] = -np.eye(ell)
    b = np.concatenate([point, [1.0]])
    c = np.concatenate([np.zeros(m), np.ones(2 * ell)])

    j0 = int(np.argmin(np.abs(others - point).sum(axis=1)))
    resid = point - others[j0]
    basis = np.array(
        [j0] + [m + k if resid[k] >= 0 else m + ell + k for k in range(ell)]
    )
    try:
        basis, y = _membership_pivots(A, b, c, basis, bland=False, max_iter=60 + 10 * ell)
    except NumericalFailure:
        basis, y = _membership_pivots(
            A,
            b,
            c,
            np.array([j0] + [m + k if resid[k] >= 0 else m + ell + k for k in range(ell)]),
            bland=True,
            max_iter=400 * (m + ell),
        )
    direction = y[:ell].copy()
    margin = float(direction @ point - (others @ direction).max())
    if not want_support:
        return margin, direction
    weights = np.linalg.solve(A[:, basis], b)
    support = [(int(col), float(w)) for col, w in zip(basis, weights) if col < m and w > 0]
    return margin, direction, support


def is_vertex(point, others, tol=TAU_HULL) -> bool:
    """Whether `point` lies strictly outside the convex hull of `others`."""
    margin, _ = separation(point, others, tol)
    return margin > tol


def _dedupe(points, ids):
    """Keep the lowest id per coincident coordinate tuple, sorted by id."""
    order = sorted(range(len(ids)), key=lambda k: ids[k])
    kept_rows, kept_ids, seen = [], [], set()
    for k in order:
        key = points[k].tobytes()
        if key not in seen:
            seen.add(key)
            kept_rows.append(points[k])
            kept_ids.append(ids[k])
    return np.array(kept_rows), kept_ids


def _planar_chain(points, tol):
    """Andrew monotone chain returning vertex positions, strict turns only."""
    n = len(points)
    order = sorted(range(n), key=lambda k: (points[k][0], points[k][1]))

    def build(seq):
        hull = []
        for k in seq:
            while len(hull) >= 2:
                o, a = points[hull[-2]], points[hull[-1]]
                p = points[k]
                cross = (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])
                base = np.hypot(p[0] - o[0], p[1] - o[1])
                if cross > tol * max(base, 1e-30):
                    break
                hull.pop()
            hull.append(k)
        return hull

    lower = build(order)
    upper = build(order[::-1])
    if n <= 2:
        return list(range(n))
    return sorted(set(lower[:-1] + upper[:-1]))


def _seed_directions(ell):
    dirs = list(np.eye(ell)) + list(-np.eye(ell))
    rng = np.random.default_rng(20231115)
    extra = rng.normal(size=(16 + 4 * ell, ell))
    extra /= np.maximum(np.linalg.norm(extra, axis=1, keepdims=True), 1e-12)
    return np.vstack([dirs, extra])


def _lex_extreme(points, candidates):
    best = candidates[0]
    for k in candidates[1:]:
        a, b = points[k], points[best]
        for va, vb in zip(a, b):
            if va > vb:
                best = k
                break
            if va < vb:
                break
    return best


def _argmax_vertex(points, direction):
    vals = points @ direction
    top = vals.max()
    tied = np.flatnonzero(vals >= top - _TIE_TOL * max(1.0, abs(top)))
    return _lex_extreme(points, list(tied))


def _clarkson(points, tol, vertex_flag=None, certificates=None, interior_out=None):
    """Resolve vertex positions; any pre-set flags must be proven vertices.

    certificates maps a position to a direction separating it from the other
    confirmed vertices; it is consulted before solving LPs and updated with
    every direction discovered.  interior_out, when given, collects barycentric
    proofs for points classified interior as position -> [(position, weight)].
    """
    n = len(points)
    if vertex_flag is None:
        vertex_flag = np.zeros(n, dtype=bool)
    certificates = certificates if certificates is not None else {}
    for direction in _seed_directions(points.shape[1]):
        pos = _argmax_vertex(points, direction)
        vertex_flag[pos] = True
        certificates.setdefault(pos, direction)

    confirmed = list(np.flatnonzero(vertex_flag))
    for k in range(n):
        if vertex_flag[k]:
            continue
        while True:
            others = [c for c in confirmed if c != k]
            if not others:
                vertex_flag[k] = True
                confirmed.append(k)
                break
            margin, d, support = separation(points[k], points[others], tol, want_support=True)
            if margin <= tol:
                # inside the confirmed hull, hence inside the full hull
                if interior_out is not None:
                    interior_out[k] = [(others[pos], w) for pos, w in support]
                break
            q = _argmax_vertex(points, d)
            if q == k:
                vertex_flag[k] = True
                certificates[k] = d
                confirmed.append(k)
                break
            if not vertex_flag[q]:
                vertex_flag[q] = True
                certificates.setdefault(q, d)
                confirmed.append(q)
            else:
                # tie fuzz put an already-confirmed point on top of k's
                # separating direction; k beats the rest, so it is extreme on
                # that face and counts as a vertex exactly when it ties the top
                vals = points @ d
                if vals[k] >= vals.max() - _TIE_TOL * max(1.0, abs(vals.max())):
                    vertex_flag[k] = True
                    certificates[k] = d
                    confirmed.append(k)
                break
    return vertex_flag, certificates


def vertex_set(points, ids=None, tol=TAU_HULL) -> VertexSet:
    """Indices of points that are vertices of the convex hull of the set.

    Points within `tol` of a face of the remaining hull are classified as
    interior; coincident points keep only the lowest id.  The result is
    independent of input order.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.size == 0:
        return VertexSet((), 0)
    n, ell = points.shape
    if ids is None:
        ids = list(range(n))
    pts, kept_ids = _dedupe(points, list(ids))
    if len(pts) <= 2:
        positions = list(range(len(pts)))
    elif ell == 2:
        positions = _planar_chain(pts, tol)
    else:
        flags, _ = _clarkson(pts, tol)
        positions = list(np.flatnonzero(flags))
    return VertexSet(tuple(sorted(kept_ids[k] for k in positions)), ell)


def pool_vertex_set(pool, ids, tol=TAU_HULL) -> VertexSet:
    """Hull vertices of a pool subset, using the family's invariant vectors."""
    ids = tuple(sorted(ids))
    if not ids:
        return VertexSet((), pool.dim)
    return vertex_set(pool.hull_vectors(ids), ids, tol)


class IncrementalHull:
    """Per-node vertex tracker for repeated merges of constraint batches.

    The union of everything inserted only grows, so a point once certified
    interior can never become a vertex again and is dropped permanently.
    Separating directions of current vertices are cached and re-validated
    vectorially on each merge; only points whose certificate breaks, plus the
    new arrivals, pay for an LP.  A shared interior-certificate store lets
    several trackers over the same pool reuse each other's barycentric proofs:
    a proof applies at a node as soon as all its corner points have been seen
    there.  The vertex set after each merge equals vertex_set over all
    never-discarded points.
    """

    def __init__(self, pool, ids=(), tol=TAU_HULL, interior_certs=None, known_vertices=None):
        self.pool = pool
        self.tol = tol
        self._seen = set()
        self._coords = {}
        self._certs = {}  # id -> separating direction
        self._interior = interior_certs if interior_certs is not None else {}
        # vertices of a superset are vertices of any subset containing them,
        # so ids known extreme for the whole pool skip the membership test
        self._known = frozenset(known_vertices) if known_vertices is not None else frozenset()
        self.vertices = ()
        self.merge(ids)

    def _reusable_interior(self, cid) -> bool:
        cert = self._interior.get(cid)
        return cert is not None and all(corner in self._seen for corner in cert)

    def merge(self, new_ids) -> tuple:
        fresh = [c for c in new_ids if c not in self._seen]
        if not fresh:
            return self.vertices
        self._seen.update(fresh)
        for cid, row in zip(fresh, self.pool.hull_vectors(fresh)):
            self._coords[cid] = row
        fresh = [c for c in fresh if not self._reusable_interior(c)]

        candidates = sorted(set(self.vertices) | set(fresh))
        rows = np.array([self._coords[c] for c in candidates])
        pts, kept_ids = _dedupe(rows, candidates)
        if len(pts) <= 2:
            flags = np.ones(len(pts), dtype=bool)
            certs = {}
        elif pts.shape[1] == 2:
            flags = np.zeros(len(pts), dtype=bool)
            flags[_planar_chain(pts, self.tol)] = True
            certs = {}
        else:
            flags = np.zeros(len(pts), dtype=bool)
            certs = {}
            for pos, cid in enumerate(kept_ids):
                if cid in self._known:
                    flags[pos] = True
                    continue
                d = self._certs.get(cid)
                if d is None:
                    continue
                vals = pts @ d
                rest = np.delete(vals, pos)
                if rest.size == 0 or vals[pos] > rest.max() + self.tol:
                    flags[pos] = True
                    certs[pos] = d
            interior_proofs: dict = {}
            flags, certs = _clarkson(pts, self.tol, flags, certs, interior_proofs)
            for pos, support in interior_proofs.items():
                self._interior.setdefault(
                    kept_ids[pos], tuple(kept_ids[corner] for corner, _ in support)
                )

        self.vertices = tuple(
            sorted(kept_ids[k] for k in np.flatnonzero(flags))
        )
        self._certs = {
            kept_ids[k]: certs[k] for k in certs if flags[k] and kept_ids[k] in set(self.vertices)
        }
        # interior points are gone for good; keep only vertex coordinates
        keep = set(self.vertices)
        self._coords = {c: v for c, v in self._coords.items() if c in keep}
        return self.vertices
