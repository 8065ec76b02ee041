"""Directed communication graphs and the topology generators used in benchmarks."""

import json
from collections import deque

import numpy as np

from .errors import GenerationFailed, NotStronglyConnected


class DirectedGraph:
    """Strongly connected directed graph; edge (i, j) means i transmits to j."""

    def __init__(self, n: int, edges):
        if n < 1:
            raise ValueError("graph needs at least one node")
        self.n = n
        edge_set = set()
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            if i != j:
                edge_set.add((int(i), int(j)))
        self.edges = tuple(sorted(edge_set))
        self._out = {i: [] for i in range(n)}
        self._in = {i: [] for i in range(n)}
        for i, j in self.edges:
            self._out[i].append(j)
            self._in[j].append(i)
        for i in range(n):
            self._out[i] = tuple(sorted(self._out[i]))
            self._in[i] = tuple(sorted(self._in[i]))
        self._diameter = None
        if not self._strongly_connected():
            raise NotStronglyConnected("graph is not strongly connected")

    def out_neighbors(self, i) -> tuple:
        return self._out[i]

    def in_neighbors(self, i) -> tuple:
        return self._in[i]

    def max_in_degree(self) -> int:
        return max(len(self._in[i]) for i in range(self.n))

    def _bfs_depths(self, source) -> np.ndarray:
        depth = np.full(self.n, -1, dtype=int)
        depth[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self._out[u]:
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    queue.append(v)
        return depth

    def _strongly_connected(self) -> bool:
        if self.n == 1:
            return True
        if np.any(self._bfs_depths(0) < 0):
            return False
        rev = {i: [] for i in range(self.n)}
        for i, j in self.edges:
            rev[j].append(i)
        depth = np.full(self.n, -1, dtype=int)
        depth[0] = 0
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in rev[u]:
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    queue.append(v)
        return not np.any(depth < 0)

    @property
    def diameter(self) -> int:
        """Maximum over node pairs of the shortest directed path length."""
        if self._diameter is None:
            worst = 0
            for s in range(self.n):
                worst = max(worst, int(self._bfs_depths(s).max()))
            self._diameter = worst
        return self._diameter

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, payload: dict) -> "DirectedGraph":
        return cls(payload["n"], [tuple(e) for e in payload["edges"]])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "DirectedGraph":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def diameter(graph: DirectedGraph) -> int:
    return graph.diameter


def gen_chain(n: int) -> DirectedGraph:
    """Bidirectional path 0-1-...-(n-1); diameter n-1."""
    edges = []
    for i in range(n - 1):
        edges += [(i, i + 1), (i + 1, i)]
    return DirectedGraph(n, edges)


def gen_complete(n: int) -> DirectedGraph:
    edges = [(i, j) for i in range(n) for j in range(n) if i != j]
    return DirectedGraph(n, edges)


def gen_ring(n: int) -> DirectedGraph:
    """One-directional cycle; diameter n-1."""
    return DirectedGraph(n, [(i, (i + 1) % n) for i in range(n)])


def default_geometric_radius(n: int, margin: float = 0.1) -> float:
    if n <= 1:
        return 1.0
    return 2.0 * np.sqrt(2.0) * np.sqrt(np.log(n) / n) * (1.0 + margin)


def gen_geometric(n: int, radius=None, rng=None, margin=0.1, max_attempts=100):
    """Random geometric graph on [0,1]^2 with bidirectional edges within radius.

    Positions are resampled until the graph is strongly connected; raises
    GenerationFailed after max_attempts.  Same rng state produces the same
    graph.
    """
    if rng is None:
        rng = np.random.default_rng()
    elif isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    if n == 1:
        return DirectedGraph(1, [])
    if radius is None:
        radius = default_geometric_radius(n, margin)
    if radius <= 0:
        raise ValueError("radius must be positive")
    for _ in range(max_attempts):
        pos = rng.uniform(size=(n, 2))
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        ii, jj = np.nonzero(dist <= radius)
        edges = [(int(i), int(j)) for i, j in zip(ii, jj) if i != j]
        try:
            return DirectedGraph(n, edges)
        except NotStronglyConnected:
            continue
    raise GenerationFailed(f"no strongly connected graph in {max_attempts} attempts")
