"""Synchronous round engines for the three constraints-consensus protocols.

All engines follow the same contract: every node reads its in-neighbors'
round-t broadcast, then all nodes advance to round t+1 together.  Node updates
are pure functions of the previous-round snapshot, so update order (or running
them concurrently) cannot change any result.  Per-round values of the local
objective, candidate sizes, message sizes and update wall time are recorded
for every node.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateInput, NumericalFailure
from .hull import IncrementalHull, pool_vertex_set
from .network import DirectedGraph
from .programs import (
    TAU_FEAS,
    TAU_ACT,
    ConvexProgram,
    Solution,
    Status,
    constraint_values,
    solve_with_hint,
)

STAGNATION_TOL = 1e-12
CONSENSUS_X_TOL = 1e-9
MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class NodeState:
    id: int
    local_ids: tuple
    candidate: tuple
    queue: tuple
    j_local: float
    x_local: np.ndarray | None
    stagnation: int
    stopped: bool


@dataclass
class RunReport:
    """Full trace of one protocol run."""

    protocol: str
    rounds: int
    diameter: int
    converged: bool
    converged_round: int
    infeasible_detected: bool
    max_constraints_per_message: int
    final: Solution
    final_per_node: list
    j_trace: np.ndarray  # (rounds + 1, n)
    candidate_trace: np.ndarray
    sent_trace: np.ndarray
    node_seconds: np.ndarray
    parallel_seconds: float
    wall_seconds: float
    active_rounds: int
    bandwidth: int | None = None

    @property
    def per_round(self):
        out = []
        for t in range(self.j_trace.shape[0]):
            out.append(
                {
                    i: (
                        float(self.j_trace[t, i]),
                        int(self.candidate_trace[t, i]),
                        int(self.sent_trace[t, i]),
                    )
                    for i in range(self.j_trace.shape[1])
                }
            )
        return out

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "rounds": self.rounds,
            "diameter": self.diameter,
            "converged": self.converged,
            "converged_round": self.converged_round,
            "infeasible_detected": self.infeasible_detected,
            "max_constraints_per_message": self.max_constraints_per_message,
            "active_rounds": self.active_rounds,
            "bandwidth": self.bandwidth,
            "parallel_seconds": self.parallel_seconds,
            "wall_seconds": self.wall_seconds,
            "final": self.final.to_json(),
            "j_trace": [[float(v) for v in row] for row in self.j_trace],
            "candidate_trace": self.candidate_trace.tolist(),
            "sent_trace": self.sent_trace.tolist(),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    def to_csv(self, fh):
        """Stream per-round stats as CSV rows (round, node, j_local, msg_constraints)."""
        fh.write("round,node,j_local,msg_constraints\n")
        for t in range(self.j_trace.shape[0]):
            for i in range(self.j_trace.shape[1]):
                fh.write(
                    f"{t},{i},{self.j_trace[t, i]!r},{int(self.sent_trace[t, i])}\n"
                )


def check_monotone(report: RunReport, slack=MONOTONE_SLACK):
    """Every node's objective trace must be non-decreasing."""
    j = report.j_trace
    for i in range(j.shape[1]):
        col = j[:, i]
        for t in range(1, len(col)):
            prev, cur = col[t - 1], col[t]
            if math.isinf(prev) or math.isinf(cur):
                if prev == np.inf and cur != np.inf:
                    raise NumericalFailure(f"node {i} left infeasible state at round {t}")
                if prev > cur and cur != -np.inf:
                    raise NumericalFailure(f"node {i} objective dropped at round {t}")
                continue
            if cur < prev - slack * max(1.0, abs(prev)):
                raise NumericalFailure(
                    f"node {i} objective dropped at round {t}: {prev} -> {cur}"
                )


def check_edge_dominance(report: RunReport, graph: DirectedGraph, slack=MONOTONE_SLACK):
    """For each edge (i, j), the receiver's next objective dominates the sender's.

    Holds for the active-set and full-vertex protocols; the bandwidth-limited
    protocol does not transfer full information per round and is excluded.
    """
    if report.protocol == "qvcc":
        raise ValueError("edge dominance is not a property of the quantized protocol")
    j = report.j_trace
    for t in range(j.shape[0] - 1):
        for i, k in graph.edges:
            lhs, rhs = j[t + 1, k], j[t, i]
            if math.isinf(lhs) or math.isinf(rhs):
                if rhs == np.inf and lhs != np.inf and t + 1 < j.shape[0] - 1:
                    continue  # infeasibility needs one round to propagate
                continue
            if lhs < rhs - slack * max(1.0, abs(rhs)):
                raise NumericalFailure(
                    f"edge ({i},{k}) dominance violated at round {t}: {rhs} -> {lhs}"
                )


class _EngineBase:
    protocol = ""

    def __init__(self, program: ConvexProgram, graph: DirectedGraph, partition, *, max_workers=1):
        if len(partition) != graph.n:
            raise ValueError("partition must have one constraint set per node")
        union = set()
        for part in partition:
            union.update(part)
        if union != set(program.indices):
            raise ValueError("partition must cover exactly the program's index set")
        self.program = program
        self.pool = program.pool
        self.graph = graph
        self.partition = [tuple(sorted(p)) for p in partition]
        self.max_workers = max_workers
        self.round = 0
        self.states: list[NodeState] = []
        self._solve_memo: dict = {}
        self._hints: list = [None] * graph.n
        self._j_rows: list[list] = []
        self._cand_rows: list[list] = []
        self._sent_rows: list[list] = []
        self._sec_rows: list[list] = []
        self._wall_start = time.perf_counter()

    # -- shared helpers -----------------------------------------------------

    def _candidate_solve(self, ids, node=None):
        """Deterministic solve over an id set with memoization.

        Degenerate ellipsoid subproblems (too few points) report an unbounded
        objective and fall back to hull vertices as the candidate set.  A node
        index enables warm-start hints across that node's successive rounds.
        """
        key = tuple(sorted(ids))
        hit = self._solve_memo.get(key)
        if hit is None:
            hint = self._hints[node] if node is not None else None
            try:
                sol, hint_out = solve_with_hint(self.program.restrict(key), hint)
                if node is not None and hint_out is not None:
                    self._hints[node] = hint_out
                if sol.status is Status.INFEASIBLE:
                    hit = (np.inf, None, (), sol)
                else:
                    hit = (sol.j_star, sol.x_star, tuple(sol.active), sol)
            except DegenerateInput:
                verts = pool_vertex_set(self.pool, key).indices
                hit = (-np.inf, None, verts, None)
            self._solve_memo[key] = hit
        return hit

    def _record_round(self, sent):
        self._j_rows.append([st.j_local for st in self.states])
        self._cand_rows.append([len(st.candidate) for st in self.states])
        self._sent_rows.append(list(sent))

    def _update_all(self, update_fn, inputs):
        """Apply per-node updates against the immutable previous snapshot."""

        def task(i):
            t0 = time.perf_counter()
            new_state = update_fn(i, *inputs)
            return new_state, time.perf_counter() - t0

        if self.max_workers > 1:
            with ThreadPoolExecutor(max_workers=self.max_workers) as ex:
                timed = list(ex.map(task, range(self.graph.n)))
        else:
            timed = [task(i) for i in range(self.graph.n)]
        self.states = [t[0] for t in timed]
        self._sec_rows.append([t[1] for t in timed])

    def all_stopped(self):
        return all(st.stopped for st in self.states)

    # -- report -------------------------------------------------------------

    def _finalize(self, active_rounds=None, bandwidth=None) -> RunReport:
        finals = []
        for st in self.states:
            if st.j_local == np.inf:
                finals.append(
                    Solution(Status.INFEASIBLE, np.full(self.program.dimension, np.nan), np.inf)
                )
            else:
                _, _, _, sol = self._candidate_solve(st.candidate)
                if sol is None:
                    finals.append(
                        Solution(Status.FEASIBLE, np.full(self.program.dimension, np.nan), -np.inf)
                    )
                else:
                    finals.append(sol)

        infeasible = any(s.status is Status.INFEASIBLE for s in finals)
        converged = True
        for s in finals[1:]:
            if s.status is not finals[0].status:
                converged = False
                break
            if s.status is Status.FEASIBLE:
                if not math.isfinite(s.j_star) or not math.isfinite(finals[0].j_star):
                    converged = False
                    break
                if abs(s.j_star - finals[0].j_star) > CONSENSUS_X_TOL * max(
                    1.0, abs(finals[0].j_star)
                ):
                    converged = False
                    break
                if np.max(np.abs(s.x_star - finals[0].x_star)) > CONSENSUS_X_TOL:
                    converged = False
                    break

        j_trace = np.array(self._j_rows)
        rounds = len(self._j_rows) - 1
        converged_round = 0
        for i in range(j_trace.shape[1]):
            col = j_trace[:, i]
            last_change = 0
            for t in range(1, len(col)):
                prev, cur = col[t - 1], col[t]
                if prev == cur:
                    continue
                if math.isfinite(prev) and math.isfinite(cur) and abs(cur - prev) <= STAGNATION_TOL * max(1.0, abs(prev)):
                    continue
                last_change = t
            converged_round = max(converged_round, last_change)

        sent = np.array(self._sent_rows)
        report = RunReport(
            protocol=self.protocol,
            rounds=rounds,
            diameter=self.graph.diameter,
            converged=converged,
            converged_round=converged_round,
            infeasible_detected=infeasible,
            max_constraints_per_message=int(sent.max()) if sent.size else 0,
            final=finals[0],
            final_per_node=finals,
            j_trace=j_trace,
            candidate_trace=np.array(self._cand_rows),
            sent_trace=sent,
            node_seconds=np.array(self._sec_rows),
            parallel_seconds=float(np.array(self._sec_rows).max(axis=1).sum()),
            wall_seconds=time.perf_counter() - self._wall_start,
            active_rounds=rounds if active_rounds is None else active_rounds,
            bandwidth=bandwidth,
        )
        check_monotone(report)
        return report


class AccEngine(_EngineBase):
    """Active-constraints consensus: nodes exchange the tight constraints."""

    protocol = "acc"

    def __init__(self, program, graph, partition, *, max_workers=1, max_rounds=None):
        super().__init__(program, graph, partition, max_workers=max_workers)
        self.max_rounds = max_rounds or (20 * graph.diameter + 200)
        self._stop_threshold = 2 * graph.diameter + 1

        def init_node(i):
            ids = self.partition[i]
            j, x, cand, _ = self._candidate_solve(ids, node=i)
            return NodeState(i, ids, cand, (), j, x, 0, j == np.inf)

        self._update_all(lambda i: init_node(i), ())
        self._record_round([0] * graph.n)

    def step(self):
        prev = self.states
        msgs = [(st.candidate, st.j_local) for st in prev]
        sent = [0 if st.stopped else len(st.candidate) for st in prev]

        def update(i):
            st = prev[i]
            if st.stopped:
                return st
            incoming = set()
            worst_in = -np.inf
            for nb in self.graph.in_neighbors(i):
                cand, j_nb = msgs[nb]
                incoming.update(cand)
                worst_in = max(worst_in, j_nb)
            if st.j_local == np.inf or worst_in == np.inf:
                return replace(st, candidate=(), j_local=np.inf, x_local=None, stopped=True)

            fresh = sorted(incoming - set(st.candidate) - set(st.local_ids))
            if st.x_local is not None and fresh:
                vals = constraint_values(self.program, st.x_local, fresh)
            else:
                vals = np.zeros(0)
            solve_needed = st.x_local is None or (len(fresh) > 0 and vals.max() > TAU_FEAS)
            if not solve_needed:
                tight = [c for c, v in zip(fresh, vals) if abs(v) <= TAU_ACT]
                in_cand = sorted(incoming - set(st.local_ids) - set(fresh))
                extra = []
                if in_cand:
                    known_vals = constraint_values(self.program, st.x_local, in_cand)
                    extra = [c for c, v in zip(in_cand, known_vals) if abs(v) <= TAU_ACT]
                new_cand = tuple(sorted(set(st.candidate) | set(tight) | set(extra)))
                j_new, x_new = st.j_local, st.x_local
            else:
                merged = tuple(sorted(set(st.candidate) | incoming | set(st.local_ids)))
                j_new, x_new, new_cand, _ = self._candidate_solve(merged, node=i)
                if j_new == np.inf:
                    return replace(st, candidate=(), j_local=np.inf, x_local=None, stopped=True)

            if st.j_local == -np.inf and j_new == -np.inf:
                stag = 0
            elif math.isfinite(j_new) and math.isfinite(st.j_local) and abs(
                j_new - st.j_local
            ) <= STAGNATION_TOL * max(1.0, abs(st.j_local)):
                stag = st.stagnation + 1
            else:
                stag = 0
            return NodeState(
                i, st.local_ids, new_cand, (), j_new, x_new, stag, stag >= self._stop_threshold
            )

        self._update_all(lambda i: update(i), ())
        self._record_round(sent)
        self.round += 1

    def run(self) -> RunReport:
        while not self.all_stopped():
            if self.round >= self.max_rounds:
                raise NumericalFailure(
                    f"acc did not stop within {self.max_rounds} rounds "
                    f"(round {self.round}, node objectives {[s.j_local for s in self.states]})"
                )
            self.step()
        return self._finalize()

    # -- snapshots ----------------------------------------------------------

    def snapshot(self) -> dict:
        return _snapshot(self)

    @classmethod
    def from_snapshot(cls, program, graph, partition, payload, **kwargs):
        eng = cls.__new__(cls)
        _EngineBase.__init__(eng, program, graph, partition, **kwargs)
        eng.max_rounds = 20 * graph.diameter + 200
        eng._stop_threshold = 2 * graph.diameter + 1
        _restore(eng, payload)
        return eng


class VccEngine(_EngineBase):
    """Vertex consensus: nodes exchange hull vertices for exactly diam rounds."""

    protocol = "vcc"

    def __init__(self, program, graph, partition, *, max_workers=1, trace_objectives=True):
        super().__init__(program, graph, partition, max_workers=max_workers)
        self.trace_objectives = trace_objectives
        shared_certs: dict = {}
        known = frozenset(pool_vertex_set(self.pool, program.indices).indices)
        self._hulls = [
            IncrementalHull(
                self.pool, self.partition[i], interior_certs=shared_certs, known_vertices=known
            )
            for i in range(graph.n)
        ]

        def init_node(i):
            cand = self._hulls[i].vertices
            j, x = self._trace_solve(cand, i)
            return NodeState(i, self.partition[i], cand, (), j, x, 0, graph.diameter == 0)

        self._update_all(lambda i: init_node(i), ())
        self._record_round([0] * graph.n)

    def _trace_solve(self, cand, node):
        if not self.trace_objectives:
            return np.nan, None
        j, x, _, _ = self._candidate_solve(cand, node=node)
        return j, x

    def step(self):
        prev = self.states
        msgs = [st.candidate for st in prev]
        sent = [len(st.candidate) for st in prev]

        def update(i):
            st = prev[i]
            incoming = set()
            for nb in self.graph.in_neighbors(i):
                incoming.update(msgs[nb])
            new_cand = self._hulls[i].merge(sorted(incoming))
            j, x = self._trace_solve(new_cand, i)
            return NodeState(
                i, st.local_ids, new_cand, (), j, x, 0, self.round + 1 >= self.graph.diameter
            )

        self._update_all(lambda i: update(i), ())
        self._record_round(sent)
        self.round += 1

    def run(self) -> RunReport:
        for _ in range(self.graph.diameter):
            self.step()
        if not self.trace_objectives:
            # final objectives still needed for the report
            self.states = [
                replace(st, j_local=self._candidate_solve(st.candidate)[0]) for st in self.states
            ]
            self._j_rows[-1] = [st.j_local for st in self.states]
        return self._finalize()

    def snapshot(self) -> dict:
        return _snapshot(self)

    @classmethod
    def from_snapshot(cls, program, graph, partition, payload, **kwargs):
        eng = cls.__new__(cls)
        _EngineBase.__init__(eng, program, graph, partition, **kwargs)
        eng.trace_objectives = kwargs.get("trace_objectives", True)
        eng._hulls = [IncrementalHull(eng.pool, ()) for _ in range(graph.n)]
        _restore(eng, payload)
        for i, st in enumerate(eng.states):
            eng._hulls[i].merge(st.candidate)
        return eng


class QvccEngine(_EngineBase):
    """Vertex consensus under a per-message budget of m constraints.

    Each node keeps a FIFO transmission queue and sends its first m entries per
    round.  Queue emptiness is gossiped as a hop counter: h resets to 0 while
    the own queue is nonempty and otherwise grows as 1 + min over in-neighbors'
    previous counters, so h >= diam+1 certifies that every node's queue was
    empty at the matching offset and the node may stop.
    """

    protocol = "qvcc"

    def __init__(
        self, program, graph, partition, bandwidth, *, max_workers=1, trace_objectives=True,
        max_rounds=None,
    ):
        if bandwidth < 1:
            raise ValueError("bandwidth must be at least 1")
        super().__init__(program, graph, partition, max_workers=max_workers)
        self.bandwidth = bandwidth
        self.trace_objectives = trace_objectives
        self._quiet_threshold = graph.diameter + 1
        self._h = [0] * graph.n
        n_max = max(len(p) for p in self.partition)
        d_max = max(graph.max_in_degree(), 1)
        theory = math.ceil(n_max / bandwidth) * ((d_max + 1) ** graph.diameter - 1) // d_max
        self.max_rounds = max_rounds or (theory + graph.diameter + 10)
        shared_certs: dict = {}
        known = frozenset(pool_vertex_set(self.pool, program.indices).indices)
        self._hulls = [
            IncrementalHull(
                self.pool, self.partition[i], interior_certs=shared_certs, known_vertices=known
            )
            for i in range(graph.n)
        ]
        self.active_rounds = 0

        def init_node(i):
            cand = self._hulls[i].vertices
            j, x = self._trace_solve(cand, i)
            return NodeState(i, self.partition[i], cand, cand, j, x, 0, False)

        self._update_all(lambda i: init_node(i), ())
        self._record_round([0] * graph.n)

    def _trace_solve(self, cand, node):
        if not self.trace_objectives:
            return np.nan, None
        j, x, _, _ = self._candidate_solve(cand, node=node)
        return j, x

    def step(self):
        prev = self.states
        prev_h = list(self._h)
        msgs = [st.queue[: self.bandwidth] if not st.stopped else () for st in prev]
        sent = [len(m) for m in msgs]
        if any(len(st.queue) > 0 for st in prev):
            self.active_rounds = self.round + 1
        new_h = [0] * len(prev)

        def update(i):
            st = prev[i]
            if st.stopped:
                new_h[i] = prev_h[i]
                return st
            incoming = set()
            for nb in self.graph.in_neighbors(i):
                incoming.update(msgs[nb])
            old_cand = set(st.candidate)
            new_cand = self._hulls[i].merge(sorted(incoming))
            dropped = old_cand - set(new_cand)
            gone = set(msgs[i]) | dropped
            queue = tuple(c for c in st.queue if c not in gone) + tuple(
                sorted(set(new_cand) - old_cand)
            )
            if queue:
                h = 0
            else:
                nbs = self.graph.in_neighbors(i)
                h = 1 + (min(prev_h[nb] for nb in nbs) if nbs else prev_h[i])
            new_h[i] = h
            if set(new_cand) != old_cand:
                j, x = self._trace_solve(new_cand, i)
            else:
                j, x = st.j_local, st.x_local
            return NodeState(
                i, st.local_ids, new_cand, queue, j, x, h, h >= self._quiet_threshold
            )

        self._update_all(lambda i: update(i), ())
        self._h = new_h
        self._record_round(sent)
        self.round += 1

    def run(self) -> RunReport:
        while not self.all_stopped():
            if self.round >= self.max_rounds:
                raise NumericalFailure(f"qvcc did not stop within {self.max_rounds} rounds")
            self.step()
        if not self.trace_objectives:
            self.states = [
                replace(st, j_local=self._candidate_solve(st.candidate)[0]) for st in self.states
            ]
            self._j_rows[-1] = [st.j_local for st in self.states]
        return self._finalize(active_rounds=self.active_rounds, bandwidth=self.bandwidth)

    def snapshot(self) -> dict:
        payload = _snapshot(self)
        payload["h"] = list(self._h)
        payload["active_rounds"] = self.active_rounds
        return payload

    @classmethod
    def from_snapshot(cls, program, graph, partition, bandwidth, payload, **kwargs):
        eng = cls.__new__(cls)
        _EngineBase.__init__(eng, program, graph, partition, **kwargs)
        eng.bandwidth = bandwidth
        eng.trace_objectives = kwargs.get("trace_objectives", True)
        eng._quiet_threshold = graph.diameter + 1
        n_max = max(len(p) for p in eng.partition)
        d_max = max(graph.max_in_degree(), 1)
        theory = math.ceil(n_max / bandwidth) * ((d_max + 1) ** graph.diameter - 1) // d_max
        eng.max_rounds = theory + graph.diameter + 10
        eng._hulls = [IncrementalHull(eng.pool, ()) for _ in range(graph.n)]
        _restore(eng, payload)
        eng._h = list(payload["h"])
        eng.active_rounds = payload["active_rounds"]
        for i, st in enumerate(eng.states):
            eng._hulls[i].merge(st.candidate)
        return eng


# -- snapshot plumbing --------------------------------------------------------


def _snapshot(engine) -> dict:
    return {
        "protocol": engine.protocol,
        "round": engine.round,
        "nodes": [
            {
                "id": st.id,
                "local_ids": list(st.local_ids),
                "candidate": list(st.candidate),
                "queue": list(st.queue),
                "j_local": st.j_local,
                "x_local": None if st.x_local is None else [float(v) for v in st.x_local],
                "stagnation": st.stagnation,
                "stopped": st.stopped,
            }
            for st in engine.states
        ],
        "j_rows": [[float(v) for v in row] for row in engine._j_rows],
        "cand_rows": engine._cand_rows,
        "sent_rows": engine._sent_rows,
        "sec_rows": engine._sec_rows,
    }


def _restore(engine, payload):
    engine.round = payload["round"]
    engine.states = [
        NodeState(
            nd["id"],
            tuple(nd["local_ids"]),
            tuple(nd["candidate"]),
            tuple(nd["queue"]),
            float(nd["j_local"]),
            None if nd["x_local"] is None else np.array(nd["x_local"]),
            nd["stagnation"],
            nd["stopped"],
        )
        for nd in payload["nodes"]
    ]
    engine._j_rows = [list(r) for r in payload["j_rows"]]
    engine._cand_rows = [list(r) for r in payload["cand_rows"]]
    engine._sent_rows = [list(r) for r in payload["sent_rows"]]
    engine._sec_rows = [list(r) for r in payload["sec_rows"]]


# -- convenience wrappers ------------------------------------------------------


def run_acc(program, graph, partition, *, max_workers=1, max_rounds=None) -> RunReport:
    """Run active-constraints consensus to its stopping rule.

    Args:
        program: full problem whose indices the partition covers.
        graph: strongly connected communication graph.
        partition: per-node local constraint id sets, union = program.indices.
    Returns:
        RunReport with per-round traces and the consensus solution.
    """
    return AccEngine(program, graph, partition, max_workers=max_workers, max_rounds=max_rounds).run()


def run_vcc(program, graph, partition, *, max_workers=1, trace_objectives=True) -> RunReport:
    """Run vertex consensus; terminates after exactly diameter rounds."""
    return VccEngine(
        program, graph, partition, max_workers=max_workers, trace_objectives=trace_objectives
    ).run()


def run_qvcc(
    program, graph, partition, bandwidth, *, max_workers=1, trace_objectives=True, max_rounds=None
) -> RunReport:
    """Run bandwidth-limited vertex consensus with the quiet-period stop rule."""
    return QvccEngine(
        program,
        graph,
        partition,
        bandwidth,
        max_workers=max_workers,
        trace_objectives=trace_objectives,
        max_rounds=max_rounds,
    ).run()
