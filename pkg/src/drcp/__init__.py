"""Distributed random convex programming via constraints consensus."""

from .bounds import epsilon_bound, min_samples, phi
from .consensus import (
    AccEngine,
    NodeState,
    QvccEngine,
    RunReport,
    VccEngine,
    check_edge_dominance,
    check_monotone,
    run_acc,
    run_qvcc,
    run_vcc,
)
from .errors import (
    DegenerateInput,
    DomainError,
    DrcpError,
    GenerationFailed,
    InfeasibleStage,
    NotStronglyConnected,
    NumericalFailure,
    UnsupportedFamily,
)
from .experiments import ExperimentResult, bench_grid, make_graph, run_experiment
from .hull import IncrementalHull, VertexSet, is_vertex, pool_vertex_set, vertex_set
from .mvee import MveeResult, ellipsoid_volume, minimum_volume_ellipsoid
from .network import (
    DirectedGraph,
    diameter,
    gen_chain,
    gen_complete,
    gen_geometric,
    gen_ring,
)
from .oracles import essential_sets_oracle, support_set_oracle
from .pool import Constraint, ConstraintPool, Family
from .programs import (
    ConvexProgram,
    Solution,
    Status,
    active_set,
    constraint_values,
    solve,
)
from .removal import RemovalReport, StageRecord, remove_constraints
from .scenarios import (
    ScenarioSpec,
    build_program,
    gen_classification,
    gen_mixture,
    gen_uncertain_lp,
    partition_ids,
)

__version__ = "0.1.0"


def solve_mvee(points):
    """Convenience wrapper returning (center, shape, Solution) for a point set."""
    import numpy as np

    from .programs import Solution as _Solution
    from .programs import Status as _Status
    from .programs import pack_ellipsoid

    res = minimum_volume_ellipsoid(points)
    from .mvee import membership_values

    vals = membership_values(points, res.center, res.shape)
    active = tuple(int(k) for k in np.flatnonzero(np.abs(vals) <= 1e-6))
    multipliers = {int(k): float(res.weights[k]) for k in res.support if res.weights[k] > 0}
    sol = _Solution(
        _Status.FEASIBLE,
        pack_ellipsoid(res.center, res.shape, res.objective),
        res.objective,
        active,
        multipliers,
    )
    return res.center, res.shape, sol
