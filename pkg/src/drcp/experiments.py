"""Experiment harness: run a scenario on a topology and compare to the
centralized solution."""

import csv
import time
from dataclasses import dataclass

import numpy as np

from .consensus import run_acc, run_qvcc, run_vcc
from .network import gen_chain, gen_complete, gen_geometric
from .programs import Status, solve
from .scenarios import ScenarioSpec

CONSENSUS_ERROR_TOL = 1e-6

_CSV_FIELDS = (
    "kind",
    "topology",
    "protocol",
    "n_nodes",
    "n_constraints",
    "seed",
    "diameter",
    "iterations",
    "converged_round",
    "max_constraints_exchanged",
    "wall_time",
    "parallel_time",
    "centralized_time",
    "consensus_error",
    "converged",
)


@dataclass
class ExperimentResult:
    kind: str
    topology: str
    protocol: str
    n_nodes: int
    n_constraints: int
    seed: int
    diameter: int
    iterations: int
    converged_round: int
    max_constraints_exchanged: int
    wall_time: float
    parallel_time: float
    centralized_time: float
    consensus_error: float
    converged: bool

    def csv_row(self):
        return [getattr(self, f) for f in _CSV_FIELDS]


def make_graph(topology: str, n_nodes: int, seed=None):
    if topology == "chain":
        return gen_chain(n_nodes)
    if topology == "complete":
        return gen_complete(n_nodes)
    if topology == "geometric":
        return gen_geometric(n_nodes, rng=np.random.default_rng(seed))
    raise ValueError("topology must be chain, geometric or complete")


def run_experiment(
    spec: ScenarioSpec,
    topology: str,
    protocol: str,
    n_nodes: int,
    *,
    bandwidth=None,
    max_workers=1,
) -> ExperimentResult:
    """Run one consensus experiment and measure the error vs the central solve.

    The consensus error is the max over nodes of the worst coordinate
    deviation from the centralized optimizer plus the objective deviation;
    a run is flagged failed when it exceeds 1e-6.
    """
    pool = spec.build_pool()
    program = spec.build_program(pool)
    graph = make_graph(topology, n_nodes, seed=spec.seed + 101)
    partition = spec.build_partition(pool, n_nodes)

    t0 = time.perf_counter()
    central = solve(program)
    central_time = time.perf_counter() - t0

    if protocol == "acc":
        report = run_acc(program, graph, partition, max_workers=max_workers)
    elif protocol == "vcc":
        report = run_vcc(program, graph, partition, max_workers=max_workers)
    elif protocol == "qvcc":
        report = run_qvcc(program, graph, partition, bandwidth or 5, max_workers=max_workers)
    else:
        raise ValueError("protocol must be acc, vcc or qvcc")

    err = np.inf
    if central.status is Status.INFEASIBLE:
        if all(s.status is Status.INFEASIBLE for s in report.final_per_node):
            err = 0.0
    else:
        errs = []
        for s in report.final_per_node:
            if s.status is not Status.FEASIBLE or not np.all(np.isfinite(s.x_star)):
                errs.append(np.inf)
            else:
                errs.append(
                    max(
                        float(np.max(np.abs(s.x_star - central.x_star))),
                        abs(s.j_star - central.j_star),
                    )
                )
        err = max(errs)

    return ExperimentResult(
        kind=spec.kind,
        topology=topology,
        protocol=protocol,
        n_nodes=n_nodes,
        n_constraints=spec.n_constraints,
        seed=spec.seed,
        diameter=graph.diameter,
        iterations=report.rounds,
        converged_round=report.converged_round,
        max_constraints_exchanged=report.max_constraints_per_message,
        wall_time=report.wall_seconds,
        parallel_time=report.parallel_seconds,
        centralized_time=central_time,
        consensus_error=err,
        converged=bool(report.converged and err <= CONSENSUS_ERROR_TOL),
    )


def bench_grid(
    kind: str,
    n_constraints: int,
    dim: int,
    topologies,
    protocols,
    node_counts,
    seeds,
    *,
    bandwidth=5,
) -> list:
    results = []
    for seed in seeds:
        spec = ScenarioSpec(kind, n_constraints, dim, int(seed))
        for topology in topologies:
            for n_nodes in node_counts:
                for protocol in protocols:
                    results.append(
                        run_experiment(
                            spec, topology, protocol, n_nodes, bandwidth=bandwidth
                        )
                    )
    return results


def write_csv(results, fh):
    writer = csv.writer(fh)
    writer.writerow(_CSV_FIELDS)
    for res in results:
        writer.writerow(res.csv_row())
