"""Scenario generators and program builders for the benchmark problems."""

from dataclasses import dataclass

import numpy as np

from .pool import ConstraintPool, Family
from .programs import ConvexProgram, family_dimension


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_mixture(n: int, seed=None, return_labels=False):
    """Planar mixture: standard normal with probability 0.95, otherwise a
    uniform [-1,1]^2 draw plus ten times a fresh standard normal."""
    rng = _rng(seed)
    outlier = rng.random(n) < 0.05
    base = rng.normal(size=(n, 2))
    bulk = rng.normal(size=(n, 2))
    uni = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.where(outlier[:, None], uni + 10.0 * base, bulk)
    pool = ConstraintPool(Family.ELLIPSOID_MEMBERSHIP, pts)
    if return_labels:
        return pool, outlier
    return pool


def gen_classification(n: int, p: int, seed=None) -> ConstraintPool:
    """Balanced labelled features: +1 around +10*1_p, -1 around -10*1_p."""
    if n % 2:
        raise ValueError("n must be even for balanced labels")
    rng = _rng(seed)
    half = n // 2
    plus = rng.normal(10.0, 1.0, size=(half, p))
    minus = rng.normal(-10.0, 1.0, size=(half, p))
    deltas = np.vstack(
        [
            np.hstack([plus, np.ones((half, 1))]),
            np.hstack([minus, -np.ones((half, 1))]),
        ]
    )
    return ConstraintPool(Family.CLASSIFICATION_MARGIN, deltas)


def gen_uncertain_lp(n: int, d: int, seed=None, feasible=True) -> ConstraintPool:
    """Random halfspace rows u'x <= v stored as [u, -v] realization rows.

    With feasible=True every row admits the origin with positive slack, so the
    pooled problem is feasible inside the standard box.
    """
    rng = _rng(seed)
    u = rng.normal(size=(n, d))
    norms = np.linalg.norm(u, axis=1)
    if feasible:
        v = norms * rng.uniform(0.1, 1.5, size=n)
    else:
        v = norms * rng.uniform(-1.5, 1.5, size=n)
    return ConstraintPool(Family.LINEAR_HALFSPACE, np.hstack([u, -v[:, None]]))


def canonical_objective(pool: ConstraintPool, rng=None) -> np.ndarray:
    d = family_dimension(pool.family, pool.dim)
    if pool.family is Family.LINEAR_HALFSPACE:
        if rng is not None:
            a = _rng(rng).normal(size=d)
            return a / np.linalg.norm(a)
        return -np.ones(d) / np.sqrt(d)
    a = np.zeros(d)
    a[-1] = 1.0
    return a


def standard_box(pool: ConstraintPool, span=None):
    """A box comfortably containing the optimum for each family."""
    d = family_dimension(pool.family, pool.dim)
    if pool.family is Family.LINEAR_HALFSPACE:
        span = 10.0 if span is None else span
        return -span * np.ones(d), span * np.ones(d)
    if pool.family is Family.ELLIPSOID_MEMBERSHIP:
        scale = float(np.abs(pool.deltas()).max()) if len(pool) else 1.0
        span = span or max(100.0, 100.0 * scale)
        return -span * np.ones(d), span * np.ones(d)
    span = span or 1e3
    p = pool.dim - 1
    lower = np.concatenate([-span * np.ones(p + 1), [0.0, 0.0]])
    return lower, span * np.ones(d)


def build_program(pool: ConstraintPool, objective=None, box=None) -> ConvexProgram:
    if objective is None:
        objective = canonical_objective(pool)
    if box is None:
        box = standard_box(pool)
    return ConvexProgram(objective, box[0], box[1], pool, pool.ids)


def partition_ids(pool: ConstraintPool, n_nodes: int, seed=None, sizes=None):
    """Split the pool ids over nodes: a seeded random even split by default."""
    ids = list(sorted(pool.ids))
    if sizes is not None:
        if sum(sizes) != len(ids):
            raise ValueError("partition sizes must sum to the pool size")
    rng = _rng(seed)
    rng.shuffle(ids)
    if sizes is None:
        chunks = np.array_split(ids, n_nodes)
    else:
        chunks = []
        at = 0
        for s in sizes:
            chunks.append(ids[at : at + s])
            at += s
    return [tuple(sorted(int(c) for c in chunk)) for chunk in chunks]


_KINDS = ("ellipsoid_mixture", "gaussian_classification", "uncertain_lp")


@dataclass(frozen=True)
class ScenarioSpec:
    """A reproducible benchmark scenario: kind, size, dimension, seed, split."""

    kind: str
    n_constraints: int
    dim: int
    seed: int
    partition: str = "even"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        if self.n_constraints < 1:
            raise ValueError("n_constraints must be positive")

    def build_pool(self) -> ConstraintPool:
        if self.kind == "ellipsoid_mixture":
            return gen_mixture(self.n_constraints, self.seed)
        if self.kind == "gaussian_classification":
            return gen_classification(self.n_constraints, self.dim, self.seed)
        return gen_uncertain_lp(self.n_constraints, self.dim, self.seed)

    def build_program(self, pool=None) -> ConvexProgram:
        pool = pool or self.build_pool()
        objective = None
        if self.kind == "uncertain_lp":
            objective = canonical_objective(pool, rng=np.random.default_rng(self.seed + 1))
        return build_program(pool, objective=objective)

    def build_partition(self, pool, n_nodes):
        return partition_ids(pool, n_nodes, seed=self.seed + 7)
