"""Discovery agent: budget split, phases, detection, pruning, full runs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_world, dag_from, world_from
from dodo.agent import (
    DEFAULT_P_CRIT,
    InfeasibleBudgetError,
    allocate_budget,
    detect_candidates,
    intervene_phase,
    intervention_value,
    observe_phase,
    prune_indirect,
    run_dodo,
)
from dodo.graphs import random_weighted_dag, transitive_closure
from dodo.scm import Intervention, collect_samples, init_scm


def rng(seed=0):
    return np.random.default_rng(seed)


# --- allocate_budget ---


def test_budget_examples():
    assert allocate_budget(100, 20).k == 4
    assert allocate_budget(1000, 10).k == 90
    assert allocate_budget(1000, 10).epochs_used == 990


def test_budget_infeasible():
    with pytest.raises(InfeasibleBudgetError) as err:
        allocate_budget(20, 20)
    assert err.value.min_feasible == 21


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10_000), st.integers(1, 100))
def test_budget_law(b, n):
    try:
        plan = allocate_budget(b, n)
    except InfeasibleBudgetError:
        assert b < n + 1
        return
    assert plan.k == b // (n + 1)
    assert plan.epochs_used == plan.k * (n + 1)
    assert plan.epochs_used <= b


# --- observe_phase ---


def test_observe_minimal_k():
    samples, means = observe_phase(chain_world(), 2, rng(1))
    assert samples.values.shape == (2, 3)
    assert means.shape == (3,)
    np.testing.assert_allclose(means, samples.values.mean(axis=0))


def test_observe_clt_bound():
    world = world_from(dag_from(1, []), mu=[4.0], sigma=[2.0], lam=0.0)
    k = 400
    _, means = observe_phase(world, k, rng(2))
    assert abs(means[0] - 4.0) < 3 * 2.0 / np.sqrt(k)


def test_observe_deterministic():
    world = chain_world(lam=0.5)
    _, a = observe_phase(world, 10, rng(3))
    _, b = observe_phase(world, 10, rng(3))
    np.testing.assert_array_equal(a, b)


def test_observe_rejects_k_below_two():
    with pytest.raises(ValueError):
        observe_phase(chain_world(), 1, rng())


# --- intervention_value ---


def test_intervention_value_examples():
    assert intervention_value(np.array([3.0, -7.0, 2.0])) == (14.0, False)
    assert intervention_value(np.array([0.0, 0.0, 0.0])) == (0.0, True)
    assert intervention_value(np.array([-50.0])) == (100.0, False)


def test_intervention_value_rejects_empty():
    with pytest.raises(ValueError):
        intervention_value(np.array([]))


# --- intervene_phase ---


def test_intervene_shapes_and_clamps():
    world = init_scm(random_weighted_dag(5, 0.4, rng(4)), 0.5, rng(5))
    out = intervene_phase(world, 4, 9.0, rng(6))
    assert sorted(out) == [0, 1, 2, 3, 4]
    for t, m in out.items():
        assert m.values.shape == (4, 5)
        assert np.all(m.column(t) == 9.0)
        assert m.regime == Intervention(t, 9.0)


def test_intervene_chain_mean_propagation():
    dag = dag_from(2, [(0, 1, 2.0)])
    world = world_from(dag, mu=[1.0, 0.0], lam=0.001)
    tau = 25.0
    out = intervene_phase(world, 200, tau, rng(7))
    assert out[0].column(1).mean() == pytest.approx(2 * tau, rel=1e-3)


# --- detect_candidates ---


def test_detect_chain_finds_direct_and_transitive():
    world = chain_world(weights=(2.0, 3.0), mu=(10.0, 0.0, 0.0), lam=0.001)
    g = rng(8)
    obs, means = observe_phase(world, 200, g)
    tau, _ = intervention_value(means)
    interv = intervene_phase(world, 200, tau, g)
    candidates, pvalues = detect_candidates(obs, interv, DEFAULT_P_CRIT)
    assert candidates == {(0, 1), (0, 2), (1, 2)}
    assert all(0.0 <= p <= 1.0 for p in pvalues.values())
    assert len(pvalues) == 6


def test_detect_null_false_positive_rate():
    # Empty graph: every candidate is a false positive; with p_crit=0.05
    # the expected count per run is p_crit * n * (n-1) = 1.0.
    world_dag = dag_from(5, [])
    p_crit = 0.05
    counts = []
    for seed in range(60):
        world = init_scm(world_dag, 0.001, rng(100 + seed))
        g = rng(200 + seed)
        obs, means = observe_phase(world, 50, g)
        tau, deg = intervention_value(means)
        interv = intervene_phase(world, 50, tau, g)
        candidates, _ = detect_candidates(obs, interv, p_crit)
        counts.append(len(candidates))
    bound = p_crit * 5 * 4
    # Mean of 60 runs: allow 3 sd of the binomial mean on top.
    sd = np.sqrt(bound * (1 - p_crit) / 60)
    assert np.mean(counts) <= bound + 3 * sd


def test_detect_single_edge_exact():
    hits = 0
    for seed in range(100):
        dag = dag_from(2, [(0, 1, 2.5)])
        world = init_scm(dag, 0.0001, rng(300 + seed))
        g = rng(400 + seed)
        obs, means = observe_phase(world, 20, g)
        tau, _ = intervention_value(means)
        interv = intervene_phase(world, 20, tau, g)
        candidates, _ = detect_candidates(obs, interv, DEFAULT_P_CRIT)
        hits += candidates == {(0, 1)}
    assert hits >= 95


def test_detect_p_crit_monotone():
    world = chain_world(lam=0.5)
    g = rng(9)
    obs, means = observe_phase(world, 30, g)
    tau, _ = intervention_value(means)
    interv = intervene_phase(world, 30, tau, g)
    loose, _ = detect_candidates(obs, interv, 0.05)
    strict, _ = detect_candidates(obs, interv, 0.001)
    assert strict <= loose


def test_detect_never_self_edges():
    world = chain_world(lam=0.5)
    g = rng(10)
    obs, means = observe_phase(world, 20, g)
    interv = intervene_phase(world, 20, 5.0, g)
    candidates, pvalues = detect_candidates(obs, interv, 0.5)
    assert all(u != v for u, v in candidates)
    assert all(u != v for u, v in pvalues)


# --- prune_indirect ---


def chain_samples(k=200, lam=0.5, seed=11):
    world = chain_world(weights=(2.0, 3.0), mu=(10.0, 0.0, 0.0), lam=lam)
    return collect_samples(world, None, k, rng(seed))


def test_prune_removes_transitive_edge():
    obs = chain_samples()
    graph = prune_indirect({(0, 1), (0, 2), (1, 2)}, obs, DEFAULT_P_CRIT)
    assert graph.edges == frozenset({(0, 1), (1, 2)})
    assert graph.decisions[(0, 2)].startswith("pruned:")
    assert (0, 2) in graph.pruning_p


def test_prune_single_parent_untested():
    obs = chain_samples()
    graph = prune_indirect({(0, 1), (1, 2)}, obs, DEFAULT_P_CRIT)
    assert graph.edges == frozenset({(0, 1), (1, 2)})
    assert graph.decisions[(0, 1)] == "kept: sole candidate parent"
    assert not graph.pruning_p


def test_prune_fail_open_on_insufficient_samples():
    # |S|=1 tests need K > 4 samples; K=4 falls short and keeps the edge.
    short = chain_samples(k=4)
    graph = prune_indirect({(0, 2), (1, 2)}, short, DEFAULT_P_CRIT)
    assert graph.edges == frozenset({(0, 2), (1, 2)})
    assert graph.decisions[(0, 2)] == "kept: too few samples to test"


def test_prune_fail_open_on_untestable():
    # Zero noise everywhere: all columns exact multiples, tests singular.
    obs = chain_samples(lam=0.0)
    graph = prune_indirect({(0, 2), (1, 2)}, obs, DEFAULT_P_CRIT)
    assert graph.edges == frozenset({(0, 2), (1, 2)})
    assert graph.decisions[(0, 2)] == "kept: untestable correlation"


def test_prune_output_subset_of_candidates():
    g = rng(12)
    for _ in range(20):
        dag = random_weighted_dag(6, 0.4, g)
        world = init_scm(dag, 0.5, g)
        obs = collect_samples(world, None, 60, g)
        candidates = {(int(u), int(v)) for u, v in zip(*np.nonzero(transitive_closure(dag)))}
        graph = prune_indirect(candidates, obs, DEFAULT_P_CRIT)
        assert graph.edges <= candidates


def test_prune_validates_candidates():
    obs = chain_samples()
    with pytest.raises(ValueError):
        prune_indirect({(0, 0)}, obs, DEFAULT_P_CRIT)
    with pytest.raises(ValueError):
        prune_indirect({(0, 9)}, obs, DEFAULT_P_CRIT)


# --- run_dodo ---


def make_random_world(n=5, p=0.3, noise=0.5, seed=13):
    dag = random_weighted_dag(n, p, rng(seed))
    return dag, init_scm(dag, noise, rng(seed + 1))


def test_run_dodo_infeasible_budget():
    _, world = make_random_world()
    with pytest.raises(InfeasibleBudgetError) as err:
        run_dodo(world, 5, rng(14))
    assert err.value.min_feasible == 12
    with pytest.raises(InfeasibleBudgetError):
        run_dodo(world, 11, rng(14))  # k=1 < 2


def test_run_dodo_budget_accounting():
    _, world = make_random_world()
    for b in (12, 100, 777):
        graph = run_dodo(world, b, rng(15))
        used = graph.info["epochs_used"]
        assert used == (b // 6) * 6
        assert used <= b


def test_run_dodo_deterministic():
    _, world = make_random_world()
    a = run_dodo(world, 300, rng(16))
    b = run_dodo(world, 300, rng(16))
    assert a.edges == b.edges
    assert a.detection_p == b.detection_p
    assert a.pruning_p == b.pruning_p


def test_run_dodo_recovers_chain():
    world = chain_world(weights=(2.0, 3.0), mu=(10.0, 0.0, 0.0), lam=0.5)
    graph = run_dodo(world, 1000, rng(17))
    assert graph.edges == frozenset({(0, 1), (1, 2)})


def test_run_dodo_empty_world_spurious_rate():
    sizes = []
    for seed in range(30):
        world = init_scm(dag_from(5, []), 0.5, rng(500 + seed))
        graph = run_dodo(world, 1000, rng(600 + seed))
        sizes.append(len(graph.edges))
    assert np.mean(sizes) <= 2.0


def test_run_dodo_degenerate_tau():
    # All-zero world: every observed mean is exactly 0.
    world = world_from(dag_from(2, []), mu=[0.0, 0.0], sigma=[0.0, 0.0], lam=0.0)
    graph = run_dodo(world, 60, rng(18))
    assert "degenerate_tau" in graph.flags
    assert graph.info["tau"] == 2.0


def test_run_dodo_sample_sink_labels():
    _, world = make_random_world(n=3)
    seen = []
    run_dodo(world, 100, rng(19), sample_sink=lambda label, m: seen.append((label, m.k)))
    assert [s[0] for s in seen] == ["observational", "do_0", "do_1", "do_2"]
    assert len({s[1] for s in seen}) == 1  # same k everywhere


def test_run_dodo_pooled_pruning_mode():
    _, world = make_random_world()
    graph = run_dodo(world, 400, rng(20), prune_on="pooled")
    assert graph.edges is not None
    with pytest.raises(ValueError):
        run_dodo(world, 400, rng(20), prune_on="bogus")


def test_run_dodo_rejects_bad_p_crit():
    _, world = make_random_world()
    with pytest.raises(ValueError):
        run_dodo(world, 400, rng(21), p_crit=0.0)
