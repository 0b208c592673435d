"""Budgeted interventional discovery agent.

The agent spends a fixed epoch budget in four phases: observe the world,
pick an intervention value far outside the observed range, intervene on
every node in turn, then test which columns moved. A final pruning pass
removes candidate edges that are explained away by other candidate
parents, using partial correlation on the observational data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import InferredGraph
from .scm import Intervention, SampleMatrix, ScmParams, collect_samples, stack_matrices
from .stats import (
    InsufficientSamplesError,
    UntestableError,
    fisher_z_test,
    partial_correlation_from_matrix,
    pearson_correlation_matrix,
    welch_t_test,
)

DEFAULT_P_CRIT = 0.001

# Observation plus one intervention pass per node, each k epochs long.
PHASES_PER_NODE = 1


class InfeasibleBudgetError(ValueError):
    """Budget too small for at least two epochs per phase."""

    def __init__(self, b: int, n: int, min_feasible: int):
        self.b = b
        self.n = n
        self.min_feasible = min_feasible
        super().__init__(
            f"budget b={b} infeasible for n={n} nodes, need at least {min_feasible} epochs"
        )


@dataclass(frozen=True)
class BudgetPlan:
    """Epoch budget split evenly across the n + 1 phases."""

    b: int
    n: int
    k: int

    @property
    def epochs_used(self) -> int:
        return self.k * (self.n + 1)


def allocate_budget(b: int, n: int) -> BudgetPlan:
    """Split budget ``b`` into ``k = floor(b / (n + 1))`` epochs per phase.

    The leftover ``b mod (n + 1)`` epochs stay unspent, so
    ``epochs_used <= b`` always holds. Raises InfeasibleBudgetError when
    even one epoch per phase does not fit.
    """
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    if b < 0:
        raise ValueError(f"budget must be non-negative, got b={b}")
    k = b // (n + 1)
    if k < 1:
        raise InfeasibleBudgetError(b, n, min_feasible=n + 1)
    return BudgetPlan(b=b, n=n, k=k)


def observe_phase(
    world: ScmParams, k: int, rng: np.random.Generator
) -> tuple[SampleMatrix, np.ndarray]:
    """Collect ``k`` observational epochs and the per-node sample means."""
    if k < 2:
        raise ValueError(f"observation needs at least 2 epochs, got k={k}")
    samples = collect_samples(world, None, k, rng)
    return samples, samples.values.mean(axis=0)


def intervention_value(observed_means: np.ndarray) -> tuple[float, bool]:
    """Intervention value: twice the largest observed mean magnitude.

    Pushing every node to twice the most extreme mean keeps the clamp
    outside the observed range, so downstream shifts are detectable.
    Returns the value and a degeneracy flag; the value degenerates to 0
    only when every observed mean is exactly 0, in which case callers
    should substitute a positive constant.
    """
    means = np.asarray(observed_means, dtype=float)
    if means.size == 0:
        raise ValueError("need at least one node mean")
    tau = 2.0 * float(np.max(np.abs(means)))
    return tau, tau == 0.0


def intervene_phase(
    world: ScmParams, k: int, tau: float, rng: np.random.Generator
) -> dict[int, SampleMatrix]:
    """Run ``do(v = tau)`` for ``k`` epochs on every node in index order."""
    if k < 2:
        raise ValueError(f"each intervention needs at least 2 epochs, got k={k}")
    return {
        v: collect_samples(world, Intervention(v, tau), k, rng) for v in range(world.n)
    }


def detect_candidates(
    observational: SampleMatrix,
    interventional: dict[int, SampleMatrix],
    p_crit: float = DEFAULT_P_CRIT,
) -> tuple[set[tuple[int, int]], dict[tuple[int, int], float]]:
    """Welch-test every (intervened node, other node) column pair.

    The pair (u, v) becomes a candidate edge u -> v when the distribution
    of node v under do(u = tau) differs from its observational
    distribution at level ``p_crit`` (strict inequality). Returns the
    candidate set and the p-value of every test performed.
    """
    if not 0.0 < p_crit < 1.0:
        raise ValueError(f"p_crit must lie in (0, 1), got {p_crit}")
    n = observational.n
    candidates: set[tuple[int, int]] = set()
    pvalues: dict[tuple[int, int], float] = {}
    for u in sorted(interventional):
        shifted = interventional[u]
        if shifted.n != n:
            raise ValueError(f"matrix for intervention on {u} has {shifted.n} columns, expected {n}")
        for v in range(n):
            if v == u:
                continue
            p = welch_t_test(observational.column(v), shifted.column(v)).value
            pvalues[(u, v)] = p
            if p < p_crit:
                candidates.add((u, v))
    return candidates, pvalues


def prune_indirect(
    candidates: set[tuple[int, int]],
    observational: SampleMatrix,
    p_crit: float = DEFAULT_P_CRIT,
    detection_p: dict[tuple[int, int], float] | None = None,
) -> InferredGraph:
    """Drop candidate edges explained away by the other candidate parents.

    For each candidate edge q -> c the conditioning set is every other
    candidate parent of c. The edge is removed only when the Fisher z
    test on the partial correlation of q and c given that set is clearly
    insignificant (p > p_crit). Edges whose test cannot be computed
    (constant columns, singular correlations, too few samples) are kept:
    the detection phase already paid interventional evidence for them,
    so pruning fails open.

    Conditioning sets are fixed before any removal; the result does not
    depend on edge iteration order.
    """
    if not 0.0 < p_crit < 1.0:
        raise ValueError(f"p_crit must lie in (0, 1), got {p_crit}")
    n = observational.n
    k = observational.k
    for q, c in candidates:
        if q == c or not (0 <= q < n and 0 <= c < n):
            raise ValueError(f"invalid candidate edge ({q},{c}) for n={n}")
    parents: dict[int, set[int]] = {}
    for q, c in candidates:
        parents.setdefault(c, set()).add(q)
    corr = pearson_correlation_matrix(observational)
    kept: set[tuple[int, int]] = set()
    pruning_p: dict[tuple[int, int], float] = {}
    decisions: dict[tuple[int, int], str] = {}
    for c in sorted(parents):
        for q in sorted(parents[c]):
            edge = (q, c)
            conditioning = parents[c] - {q}
            if not conditioning:
                kept.add(edge)
                decisions[edge] = "kept: sole candidate parent"
                continue
            try:
                rho = partial_correlation_from_matrix(corr, q, c, conditioning)
                p = fisher_z_test(rho, k, len(conditioning)).value
            except InsufficientSamplesError:
                kept.add(edge)
                decisions[edge] = "kept: too few samples to test"
                continue
            except UntestableError:
                kept.add(edge)
                decisions[edge] = "kept: untestable correlation"
                continue
            pruning_p[edge] = p
            if p > p_crit:
                decisions[edge] = f"pruned: partial correlation p={p:.3g} > {p_crit}"
            else:
                kept.add(edge)
                decisions[edge] = f"kept: partial correlation p={p:.3g} <= {p_crit}"
    return InferredGraph(
        n=n,
        edges=frozenset(kept),
        detection_p=dict(detection_p or {}),
        pruning_p=pruning_p,
        decisions=decisions,
    )


def run_dodo(
    world: ScmParams,
    b: int,
    rng: np.random.Generator,
    p_crit: float = DEFAULT_P_CRIT,
    prune_on: str = "observational",
    sample_sink=None,
) -> InferredGraph:
    """Full discovery run: observe, intervene everywhere, detect, prune.

    ``b`` is the total epoch budget; each of the n + 1 phases gets
    ``floor(b / (n + 1))`` epochs and needs at least 2, so budgets below
    ``2 * (n + 1)`` raise InfeasibleBudgetError. ``prune_on`` selects the
    data the pruning tests run on: "observational" (default) or "pooled"
    (observational plus all interventional rows). ``sample_sink``, when
    given, receives every collected matrix as (label, SampleMatrix) for
    export.
    """
    n = world.n
    min_feasible = 2 * (n + 1)
    try:
        plan = allocate_budget(b, n)
    except InfeasibleBudgetError:
        raise InfeasibleBudgetError(b, n, min_feasible) from None
    if plan.k < 2:
        raise InfeasibleBudgetError(b, n, min_feasible)
    if prune_on not in ("observational", "pooled"):
        raise ValueError(f"unknown prune_on mode {prune_on!r}")

    observational, means = observe_phase(world, plan.k, rng)
    tau, degenerate = intervention_value(means)
    if degenerate:
        # All-zero means leave no scale to double; fall back to a fixed
        # offset that still clears the observational range.
        tau = 2.0
    interventional = intervene_phase(world, plan.k, tau, rng)

    if sample_sink is not None:
        sample_sink("observational", observational)
        for v in range(n):
            sample_sink(f"do_{v}", interventional[v])

    candidates, detection_p = detect_candidates(observational, interventional, p_crit)
    if prune_on == "pooled":
        pooled = stack_matrices([observational, *(interventional[v] for v in range(n))])
        prune_data = SampleMatrix(values=pooled)
    else:
        prune_data = observational
    graph = prune_indirect(candidates, prune_data, p_crit, detection_p=detection_p)

    flags = []
    if degenerate:
        flags.append("degenerate_tau")
    if graph.has_directed_cycle():
        flags.append("cyclic_estimate")
    graph.flags = tuple(flags)
    graph.info = {
        "epochs_used": float(plan.epochs_used),
        "k_per_phase": float(plan.k),
        "tau": tau,
    }
    return graph
