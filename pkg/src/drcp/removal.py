"""Distributed constraint removal by repeated consensus and marginal-cost pruning."""

import json
import warnings
from dataclasses import dataclass, field

from .consensus import run_acc, run_qvcc, run_vcc
from .errors import InfeasibleStage
from .programs import ConvexProgram

_PROTOCOLS = ("acc", "vcc", "qvcc")


@dataclass
class StageRecord:
    removed_id: int
    multiplier: float
    j_star: float


@dataclass
class RemovalReport:
    protocol: str
    removed: tuple
    per_stage: list = field(default_factory=list)
    final: object = None

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "removed": list(self.removed),
            "per_stage": [
                {"removed_id": s.removed_id, "multiplier": s.multiplier, "j_star": s.j_star}
                for s in self.per_stage
            ],
            "final": self.final.to_json() if self.final is not None else None,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def _run_protocol(protocol, program, graph, partition, bandwidth):
    if protocol == "acc":
        return run_acc(program, graph, partition)
    if protocol == "vcc":
        return run_vcc(program, graph, partition)
    return run_qvcc(program, graph, partition, bandwidth)


def remove_constraints(
    program: ConvexProgram,
    graph,
    partition,
    r: int,
    protocol: str = "acc",
    *,
    bandwidth: int | None = None,
) -> RemovalReport:
    """Remove r constraints, one per consensus stage, by largest multiplier.

    After each stage every node holds the same converged candidate set and the
    same multipliers, so all nodes deterministically agree on the constraint to
    drop (ties go to the lowest id).  The vertex-based protocols may miss
    tight constraints that are not hull vertices; a warning is emitted.
    """
    if protocol not in _PROTOCOLS:
        raise ValueError(f"protocol must be one of {_PROTOCOLS}")
    if r < 0:
        raise ValueError("removal count must be nonnegative")
    if protocol == "qvcc" and bandwidth is None:
        raise ValueError("qvcc removal needs a bandwidth")
    if protocol in ("vcc", "qvcc"):
        warnings.warn(
            "vertex-based removal can miss tight constraints with nonzero "
            "multipliers outside the hull vertex set",
            stacklevel=2,
        )

    parts = [list(p) for p in partition]
    current = ConvexProgram(
        program.objective, program.lower, program.upper, program.pool, program.indices
    )
    removed = []
    stages = []
    for _ in range(r):
        report = _run_protocol(protocol, current, graph, parts, bandwidth)
        sol = report.final
        if report.infeasible_detected or not sol.multipliers:
            raise InfeasibleStage(
                f"stage {len(removed)} has no usable multipliers "
                f"(infeasible={report.infeasible_detected})"
            )
        worst = max(sol.multipliers.items(), key=lambda kv: (kv[1], -kv[0]))
        cid = worst[0]
        removed.append(cid)
        stages.append(StageRecord(cid, float(worst[1]), float(sol.j_star)))
        parts = [[c for c in p if c != cid] for p in parts]
        current = current.restrict(tuple(c for c in current.indices if c != cid))

    final_report = _run_protocol(protocol, current, graph, parts, bandwidth)
    return RemovalReport(protocol, tuple(removed), stages, final_report.final)
