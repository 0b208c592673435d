"""Observational baseline: the PC algorithm (stable variant).

Pipeline: correlation-based skeleton search with growing conditioning
sets, collider orientation from separating sets, Meek rules R1 to R4 for
orientation propagation, and a scoring adapter that turns the partially
directed result into an adjacency matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .graphs import InferredGraph
from .stats import (
    InsufficientSamplesError,
    fisher_z_test,
    partial_correlations_batch,
    pearson_correlation_matrix,
)

SepSetTable = dict[frozenset[int], frozenset[int]]

# Conditioning subsets are tested in deterministic order but evaluated
# in batches this large, so the linear algebra amortizes across tests.
_SUBSET_CHUNK = 512


@dataclass
class Cpdag:
    """Partially directed graph: directed pairs plus undirected pairs."""

    n: int
    directed: set[tuple[int, int]] = field(default_factory=set)
    undirected: set[frozenset[int]] = field(default_factory=set)
    diagnostics: list[str] = field(default_factory=list)

    def adjacent(self, i: int, j: int) -> bool:
        return (
            (i, j) in self.directed
            or (j, i) in self.directed
            or frozenset((i, j)) in self.undirected
        )

    def neighbors(self, i: int) -> set[int]:
        out = {v for u, v in self.directed if u == i}
        out |= {u for u, v in self.directed if v == i}
        for pair in self.undirected:
            if i in pair:
                out |= pair - {i}
        return out


def pc_skeleton(
    data,
    alpha: float,
    max_cond_size: int | None = None,
) -> tuple[dict[int, set[int]], SepSetTable, list[str]]:
    """Edge-removal phase of PC, stable variant.

    Starts from the complete undirected graph and, for conditioning-set
    sizes ``level = 0, 1, 2, ...``, tests every remaining ordered pair
    (i, j) against all size-``level`` subsets of the neighbours of i
    (frozen at the start of the level) excluding j. An edge is removed,
    and its separating set recorded, when the Fisher z test accepts
    independence (p > alpha). Stops when no neighbourhood is large enough
    for the next level.

    Levels whose tests the sample size cannot support (the Fisher test
    needs ``k > level + 3``) are skipped with a diagnostic, as are any
    levels beyond ``max_cond_size``. Untestable correlations keep their
    edge: independence was not demonstrated.

    Returns (adjacency sets, separating sets, diagnostics).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    values = np.asarray(getattr(data, "values", data), dtype=float)
    k = values.shape[0]
    n = values.shape[1]
    corr = pearson_correlation_matrix(values)
    adj: dict[int, set[int]] = {i: set(range(n)) - {i} for i in range(n)}
    sepsets: SepSetTable = {}
    diagnostics: list[str] = []
    untestable = 0

    level_cap = k - 4
    if max_cond_size is not None:
        level_cap = min(level_cap, max_cond_size)

    level = 0
    while True:
        if not any(len(adj[i] - {j}) >= level for i in range(n) for j in adj[i]):
            break
        if level > level_cap:
            diagnostics.append(f"skipped levels >= {level}: conditioning cap {level_cap}")
            break
        frozen = {i: frozenset(adj[i]) for i in range(n)}
        for i in range(n):
            for j in sorted(frozen[i]):
                if j not in adj[i]:
                    continue  # removed earlier this level
                pool = sorted(frozen[i] - {j})
                subsets = list(combinations(pool, level))
                removed = False
                for start in range(0, len(subsets), _SUBSET_CHUNK):
                    chunk = subsets[start : start + _SUBSET_CHUNK]
                    rhos = partial_correlations_batch(corr, i, j, chunk)
                    for subset, rho in zip(chunk, rhos):
                        if math.isnan(rho):
                            untestable += 1
                            continue
                        if fisher_z_test(float(rho), k, level).value > alpha:
                            adj[i].discard(j)
                            adj[j].discard(i)
                            sepsets[frozenset((i, j))] = frozenset(subset)
                            removed = True
                            break
                    if removed:
                        break
        level += 1

    if untestable:
        diagnostics.append(f"untestable correlations kept their edge: {untestable}")
    return adj, sepsets, diagnostics


def orient_v_structures(
    skeleton: dict[int, set[int]],
    sepsets: SepSetTable,
) -> Cpdag:
    """Orient unshielded triples i - k - j into colliders i -> k <- j.

    A triple is oriented exactly when k is absent from the recorded
    separating set of (i, j). Pairs with no recorded separating set are
    treated as separated by the empty set. Conflicting orientations keep
    whichever arrived first and record a diagnostic.
    """
    n = len(skeleton)
    cpdag = Cpdag(n=n)
    for i in skeleton:
        for j in skeleton[i]:
            cpdag.undirected.add(frozenset((i, j)))

    def orient(a: int, b: int, triple: str) -> None:
        pair = frozenset((a, b))
        if (a, b) in cpdag.directed:
            return
        if (b, a) in cpdag.directed:
            cpdag.diagnostics.append(f"orientation conflict at {triple}: kept {b}->{a}")
            return
        cpdag.undirected.discard(pair)
        cpdag.directed.add((a, b))

    for k in range(n):
        for i, j in combinations(sorted(skeleton[k]), 2):
            if j in skeleton[i]:
                continue  # shielded
            if k in sepsets.get(frozenset((i, j)), frozenset()):
                continue
            orient(i, k, f"{i}->{k}<-{j}")
            orient(j, k, f"{i}->{k}<-{j}")
    return cpdag


def _has_directed_path(cpdag: Cpdag, src: int, dst: int) -> bool:
    """True if a path src -> ... -> dst exists along directed edges."""
    children: dict[int, list[int]] = {}
    for u, v in cpdag.directed:
        children.setdefault(u, []).append(v)
    stack = [src]
    seen = {src}
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        for c in children.get(node, ()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def _guarded_orient(cpdag: Cpdag, a: int, b: int, rule: str) -> bool:
    """Turn a - b into a -> b unless that would break CPDAG sanity.

    The orientation is skipped, with a diagnostic, if it would close a
    directed cycle or create a v-structure that no collider test asked
    for. Returns True when the edge was oriented.
    """
    pair = frozenset((a, b))
    if pair not in cpdag.undirected:
        return False
    if _has_directed_path(cpdag, b, a):
        cpdag.diagnostics.append(f"{rule}: skipped {a}->{b}, would create a directed cycle")
        return False
    for w, t in cpdag.directed:
        if t == b and w != a and not cpdag.adjacent(w, a):
            cpdag.diagnostics.append(f"{rule}: skipped {a}->{b}, would create a new v-structure")
            return False
    cpdag.undirected.discard(pair)
    cpdag.directed.add((a, b))
    return True


def apply_meek_rules(cpdag: Cpdag) -> Cpdag:
    """Propagate orientations with Meek rules R1 to R4 until fixpoint.

    R1: a -> b and b - c with a, c nonadjacent orients b -> c.
    R2: a -> b -> c with a - c orients a -> c.
    R3: a - b, a - c, a - d with c -> b and d -> b, c, d nonadjacent,
        orients a -> b.
    R4: a - b, a - k, k -> m, m -> b with k, b nonadjacent orients
        a -> b (either completion of b - a would force a cycle through
        k or an undetected collider at a).

    Orientations that would create a directed cycle or a new v-structure
    are skipped with a diagnostic, so the output is always cycle-free on
    its directed part. The input object is mutated and returned.
    """
    changed = True
    while changed:
        changed = False
        # R1
        for a, b in sorted(cpdag.directed):
            for c in sorted(cpdag.neighbors(b)):
                if frozenset((b, c)) in cpdag.undirected and not cpdag.adjacent(a, c):
                    changed |= _guarded_orient(cpdag, b, c, "R1")
        # R2
        for a, b in sorted(cpdag.directed):
            for b2, c in sorted(cpdag.directed):
                if b2 == b and frozenset((a, c)) in cpdag.undirected:
                    changed |= _guarded_orient(cpdag, a, c, "R2")
        # R3
        for a in range(cpdag.n):
            undirected_nbrs = sorted(
                v for v in cpdag.neighbors(a) if frozenset((a, v)) in cpdag.undirected
            )
            for b in undirected_nbrs:
                parents_b = sorted(w for w, t in cpdag.directed if t == b)
                hit = False
                for c, d in combinations(parents_b, 2):
                    if (
                        c in undirected_nbrs
                        and d in undirected_nbrs
                        and not cpdag.adjacent(c, d)
                    ):
                        hit = True
                        break
                if hit:
                    changed |= _guarded_orient(cpdag, a, b, "R3")
        # R4
        for a in range(cpdag.n):
            undirected_nbrs = sorted(
                v for v in cpdag.neighbors(a) if frozenset((a, v)) in cpdag.undirected
            )
            for b in undirected_nbrs:
                fired = False
                for m, target in sorted(cpdag.directed):
                    if target != b:
                        continue
                    for k, m2 in sorted(cpdag.directed):
                        if (
                            m2 == m
                            and k in undirected_nbrs
                            and k != b
                            and not cpdag.adjacent(k, b)
                        ):
                            changed |= _guarded_orient(cpdag, a, b, "R4")
                            fired = True
                            break
                    if fired:
                        break
    return cpdag


def cpdag_to_adjacency(cpdag: Cpdag, undirected_policy: str = "both") -> np.ndarray:
    """Score a partially directed graph as a directed adjacency matrix.

    Directed edges map to single entries. Undirected edges carry real
    skeleton information but no direction, so the default policy scores
    them as both directions; policy "skip" drops them instead.
    """
    if undirected_policy not in ("both", "skip"):
        raise ValueError(f"unknown undirected policy {undirected_policy!r}")
    a = np.zeros((cpdag.n, cpdag.n), dtype=np.int8)
    for u, v in cpdag.directed:
        a[u, v] = 1
    if undirected_policy == "both":
        for pair in cpdag.undirected:
            u, v = sorted(pair)
            a[u, v] = 1
            a[v, u] = 1
    return a


def run_pc(
    data,
    alpha: float,
    max_cond_size: int | None = None,
    undirected_policy: str = "both",
) -> InferredGraph:
    """Full PC baseline on observational data.

    Composes skeleton search, collider orientation, Meek propagation and
    the adjacency adapter. Needs at least 4 samples (the smallest Fisher
    z test). Undirected survivors enter the estimate under the given
    scoring policy.
    """
    values = np.asarray(getattr(data, "values", data), dtype=float)
    if values.shape[0] < 4:
        raise InsufficientSamplesError(
            f"PC needs at least 4 samples, got {values.shape[0]}"
        )
    adj, sepsets, diagnostics = pc_skeleton(data, alpha, max_cond_size)
    cpdag = orient_v_structures(adj, sepsets)
    cpdag = apply_meek_rules(cpdag)
    adjacency = cpdag_to_adjacency(cpdag, undirected_policy)
    n = cpdag.n
    edges = frozenset(
        (int(u), int(v)) for u in range(n) for v in range(n) if adjacency[u, v]
    )
    flags = []
    if any("conflict" in d for d in cpdag.diagnostics):
        flags.append("orientation_conflict")
    if any("skipped levels" in d for d in diagnostics):
        flags.append("level_cap_hit")
    graph = InferredGraph(n=n, edges=edges, flags=tuple(flags))
    graph.decisions = {}
    graph.info = {"alpha": alpha}
    return graph
