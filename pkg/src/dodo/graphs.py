"""Random weighted DAGs and the graph utilities shared by the pipeline.

Ground-truth worlds are directed acyclic graphs over nodes ``0..n-1`` with
signed edge weights. Generation is split into three composable steps
(edge sampling, cycle breaking, weight assignment) so tests can exercise
each one in isolation.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np


class CycleError(ValueError):
    """Raised when an operation requires an acyclic graph and gets a cycle."""


WEIGHT_LOW = 1.0
WEIGHT_HIGH = 5.0


def _toposort(n: int, pairs: Iterable[tuple[int, int]]) -> list[int]:
    """Kahn's algorithm with a min-heap so the order is deterministic."""
    children: list[list[int]] = [[] for _ in range(n)]
    indegree = [0] * n
    for u, v in pairs:
        children[u].append(v)
        indegree[v] += 1
    heap = [v for v in range(n) if indegree[v] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in children[v]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != n:
        raise CycleError("graph contains a directed cycle")
    return order


@dataclass(frozen=True)
class WeightedDag:
    """Immutable weighted DAG over nodes ``0..n-1``.

    ``edges`` holds ``(cause, effect, weight)`` triples sorted by
    ``(cause, effect)``. Construction validates every structural
    invariant: node indices in range, no self-loops, no duplicate pairs,
    weight magnitudes inside ``[WEIGHT_LOW, WEIGHT_HIGH]``, and acyclicity.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one node, got n={self.n}")
        seen: set[tuple[int, int]] = set()
        for u, v, w in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for n={self.n}")
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u},{v})")
            seen.add((u, v))
            if not (WEIGHT_LOW <= abs(w) <= WEIGHT_HIGH):
                raise ValueError(f"weight {w} for edge ({u},{v}) outside magnitude bounds")
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))
        _toposort(self.n, [(u, v) for u, v, _ in self.edges])

    def edge_pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset((u, v) for u, v, _ in self.edges)

    def parents(self, v: int) -> list[tuple[int, float]]:
        """Weighted parents of ``v`` in (cause, weight) form."""
        return [(u, w) for u, t, w in self.edges if t == v]

    def adjacency(self) -> np.ndarray:
        """Binary adjacency matrix, ``a[u, v] = 1`` iff edge u -> v."""
        a = np.zeros((self.n, self.n), dtype=np.int8)
        for u, v, _ in self.edges:
            a[u, v] = 1
        return a

    def weight_matrix(self) -> np.ndarray:
        w = np.zeros((self.n, self.n), dtype=float)
        for u, v, x in self.edges:
            w[u, v] = x
        return w


def sample_er_digraph(n: int, p: float, rng: np.random.Generator) -> set[tuple[int, int]]:
    """Sample a directed Erdos-Renyi graph over ordered node pairs.

    Every ordered pair ``(u, v)`` with ``u != v`` receives an edge
    independently with probability ``p``, so the expected edge count is
    ``p * n * (n - 1)``. The result may contain cycles; see
    :func:`break_cycles`.

    Parameters
    ----------
    n : node count, at least 1.
    p : edge probability in ``[0, 1]``.
    rng : numpy Generator driving the draws.
    """
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    draws = rng.random((n, n))
    return {(u, v) for u in range(n) for v in range(n) if u != v and draws[u, v] < p}


def _find_back_edge(edges: set[tuple[int, int]]) -> tuple[int, int] | None:
    """First back edge found by DFS from the lowest-index node, or None.

    Start nodes and neighbours are visited in ascending index order, so
    the edge returned depends only on the edge set.
    """
    adjacency: dict[int, list[int]] = {}
    for u, v in sorted(edges):
        adjacency.setdefault(u, []).append(v)
    state: dict[int, int] = {}  # 1 = on stack, 2 = finished
    for start in sorted(adjacency):
        if start in state:
            continue
        state[start] = 1
        stack = [(start, iter(adjacency.get(start, ())))]
        while stack:
            node, it = stack[-1]
            child = next(it, None)
            if child is None:
                state[node] = 2
                stack.pop()
                continue
            mark = state.get(child, 0)
            if mark == 1:
                return (node, child)
            if mark == 0:
                state[child] = 1
                stack.append((child, iter(adjacency.get(child, ()))))
    return None


def break_cycles(edges: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    """Remove back edges until the graph is acyclic.

    Repeats a deterministic depth-first search (lowest-index start node,
    ascending neighbour order) and deletes the first back edge it meets,
    until no cycle remains. Acyclic inputs come back unchanged.
    """
    out = set(edges)
    while True:
        back = _find_back_edge(out)
        if back is None:
            return out
        out.remove(back)


def assign_weights(n: int, edges: Iterable[tuple[int, int]], rng: np.random.Generator) -> WeightedDag:
    """Attach signed weights to an acyclic edge set.

    Each weight is drawn from an equal mixture of ``U(-5, -1)`` and
    ``U(1, 5)``: a fair sign coin, then a magnitude uniform on ``[1, 5]``.
    Edges are processed in ``(cause, effect)`` order so the draws depend
    only on the edge set and the generator state.
    """
    weighted = []
    for u, v in sorted(set(edges)):
        if rng.random() < 0.5:
            w = rng.uniform(-WEIGHT_HIGH, -WEIGHT_LOW)
        else:
            w = rng.uniform(WEIGHT_LOW, WEIGHT_HIGH)
        weighted.append((u, v, float(w)))
    return WeightedDag(n, tuple(weighted))


def random_weighted_dag(n: int, p: float, rng: np.random.Generator) -> WeightedDag:
    """Sample edges, break cycles, assign weights. One-stop world topology."""
    return assign_weights(n, break_cycles(sample_er_digraph(n, p, rng)), rng)


def topological_order(dag: WeightedDag) -> list[int]:
    """Topological order of the DAG, lexicographically smallest."""
    return _toposort(dag.n, [(u, v) for u, v, _ in dag.edges])


def transitive_closure(dag: WeightedDag) -> np.ndarray:
    """Boolean reachability matrix: ``r[u, v]`` iff a directed path u -> v.

    Nodes are never reachable from themselves (the diagonal stays False)
    because the graph is acyclic.
    """
    reach = np.zeros((dag.n, dag.n), dtype=bool)
    children: list[list[int]] = [[] for _ in range(dag.n)]
    for u, v, _ in dag.edges:
        children[u].append(v)
    for v in reversed(topological_order(dag)):
        for c in children[v]:
            reach[v, c] = True
            reach[v] |= reach[c]
    return reach


@dataclass
class InferredGraph:
    """Directed graph produced by a discovery algorithm, plus diagnostics.

    ``edges`` is the estimate itself. The remaining fields explain how it
    was reached: per-pair detection p-values, per-pair pruning p-values,
    a human-readable decision per considered edge, free-form flags, and
    numeric side information (epochs consumed, intervention value, ...).
    """

    n: int
    edges: frozenset[tuple[int, int]]
    detection_p: dict[tuple[int, int], float] = field(default_factory=dict)
    pruning_p: dict[tuple[int, int], float] = field(default_factory=dict)
    decisions: dict[tuple[int, int], str] = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    info: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n) or u == v:
                raise ValueError(f"invalid edge ({u},{v}) for n={self.n}")

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int8)
        for u, v in self.edges:
            a[u, v] = 1
        return a

    def has_directed_cycle(self) -> bool:
        try:
            _toposort(self.n, sorted(self.edges))
        except CycleError:
            return True
        return False


def edge_list_text(dag: WeightedDag | InferredGraph) -> str:
    """Edge-list serialization: header ``n=<count>``, then one
    ``cause,effect,weight`` line per edge in (cause, effect) order.

    Inferred graphs carry no weights; their edges are written with
    weight 1.0 so the format stays uniform.
    """
    lines = [f"n={dag.n}"]
    if isinstance(dag, WeightedDag):
        triples = dag.edges
    else:
        triples = tuple(sorted((u, v, 1.0) for u, v in dag.edges))
    for u, v, w in triples:
        lines.append(f"{u},{v},{w!r}")
    return "\n".join(lines) + "\n"


def write_edge_list(dag: WeightedDag | InferredGraph, path: str | Path) -> None:
    """Write :func:`edge_list_text` output to a file."""
    Path(path).write_text(edge_list_text(dag))


def _parse_edge_lines(text: str, path: str | Path) -> tuple[int, list[tuple[int, int, float]]]:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("n="):
        raise ValueError(f"{path}: expected first line 'n=<count>'")
    n = int(lines[0][2:])
    triples = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) == 2:
            u, v = int(parts[0]), int(parts[1])
            w = 1.0
        elif len(parts) == 3:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2])
        else:
            raise ValueError(f"{path}: malformed edge line {ln!r}")
        triples.append((u, v, w))
    return n, triples


def read_edge_list(path: str | Path) -> WeightedDag:
    """Read an edge list written by :func:`write_edge_list` as a WeightedDag.

    All WeightedDag invariants are enforced, so this is the right reader
    for ground-truth files. Use :func:`read_adjacency` for arbitrary
    estimate files.
    """
    n, triples = _parse_edge_lines(Path(path).read_text(), path)
    return WeightedDag(n, tuple(triples))


def read_adjacency(path: str | Path) -> np.ndarray:
    """Read an edge-list file as a binary adjacency matrix.

    Tolerant variant for scoring: weights are optional and unchecked,
    only index bounds and self-loops are validated.
    """
    n, triples = _parse_edge_lines(Path(path).read_text(), path)
    a = np.zeros((n, n), dtype=np.int8)
    for u, v, _ in triples:
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise ValueError(f"{path}: invalid edge ({u},{v}) for n={n}")
        a[u, v] = 1
    return a
