"""Linear-Gaussian world: parameter draws, epoch sampling, do-interventions."""

import numpy as np
import pytest

from conftest import chain_world, dag_from, world_from
from dodo.graphs import random_weighted_dag, transitive_closure
from dodo.scm import (
    FIXED_STD_MEASURE,
    Intervention,
    SampleMatrix,
    ScmParams,
    collect_samples,
    init_scm,
    read_samples_csv,
    regime_label,
    sample_interventional_epoch,
    sample_observational_epoch,
    stack_matrices,
    write_samples_csv,
)


def rng(seed=0):
    return np.random.default_rng(seed)


# --- init_scm ---


def test_init_scm_noise_scale():
    dag = dag_from(3, [(0, 1, 2.0)])
    world = init_scm(dag, 0.0001, rng())
    assert np.allclose(world.noise_std, 0.0002)
    world = init_scm(dag, 0.0, rng())
    assert np.all(world.noise_std == 0.0)


def test_init_scm_parameter_ranges():
    dag = dag_from(4, [])
    world = init_scm(dag, 0.5, rng(1))
    assert np.all((world.mu >= -50) & (world.mu <= 50))
    assert np.all((world.sigma >= 1) & (world.sigma <= 2))
    assert np.allclose(world.noise_std, 0.5 * FIXED_STD_MEASURE)


def test_init_scm_mu_centered():
    g = rng(2)
    dag = dag_from(1, [])
    draws = [init_scm(dag, 0.0, g).mu[0] for _ in range(10_000)]
    assert abs(np.mean(draws)) < 1.0


def test_init_scm_rejects_negative_noise():
    with pytest.raises(ValueError):
        init_scm(dag_from(2, []), -0.1, rng())


def test_scm_params_validation():
    dag = dag_from(2, [])
    with pytest.raises(ValueError):
        ScmParams(dag=dag, mu=np.zeros(3), sigma=np.ones(2), noise_std=np.zeros(2))
    with pytest.raises(ValueError):
        ScmParams(dag=dag, mu=np.zeros(2), sigma=-np.ones(2), noise_std=np.zeros(2))


# --- observational sampling ---


def test_chain_zero_noise_exact_multiple():
    world = chain_world(weights=(2.0, 3.0), lam=0.0)
    row = sample_observational_epoch(world, rng(3))
    assert row[1] == pytest.approx(2.0 * row[0], rel=1e-9)
    assert row[2] == pytest.approx(6.0 * row[0], rel=1e-9)


def test_source_mean_law_of_large_numbers():
    world = world_from(dag_from(1, []), mu=[7.0], sigma=[1.5], lam=0.0)
    samples = collect_samples(world, None, 10_000, rng(4))
    # LLN band 3*sigma/sqrt(k) = 3*1.5/100
    assert abs(samples.column(0).mean() - 7.0) < 3 * 1.5 / 100


def test_fork_ratio_fixed_by_weights():
    dag = dag_from(3, [(0, 1, 3.0), (0, 2, -4.0)])
    world = world_from(dag, mu=[5.0, 0.0, 0.0], lam=0.0)
    samples = collect_samples(world, None, 50, rng(5))
    ratio = samples.column(2) / samples.column(1)
    assert np.allclose(ratio, -4.0 / 3.0, rtol=1e-9)


def test_nonsource_is_exact_parent_combination_at_zero_noise():
    dag = random_weighted_dag(8, 0.5, rng(6))
    world = init_scm(dag, 0.0, rng(7))
    samples = collect_samples(world, None, 20, rng(8))
    w = dag.weight_matrix()
    for v in range(8):
        if dag.parents(v):
            expected = samples.values @ w[:, v]
            np.testing.assert_allclose(samples.column(v), expected, rtol=1e-9)


# --- interventional sampling ---


def test_do_chain_propagates_weight_product():
    world = chain_world(weights=(2.0, 3.0), lam=0.0)
    tau = 11.0
    row = sample_interventional_epoch(world, 0, tau, rng(9))
    assert row[0] == tau
    assert row[1] == pytest.approx(2 * tau, rel=1e-12)
    assert row[2] == pytest.approx(6 * tau, rel=1e-12)


def test_do_column_constant():
    world = chain_world(lam=0.5)
    samples = collect_samples(world, Intervention(1, 42.0), 25, rng(10))
    assert np.all(samples.column(1) == 42.0)
    assert samples.regime == Intervention(1, 42.0)


def test_do_on_sink_leaves_rest_observational():
    # Clamped nodes still consume their draws, so with the same generator
    # state a do() epoch differs from the observational one only in the
    # clamped column and its descendants. A sink has no descendants.
    world = chain_world(lam=0.5)
    obs = collect_samples(world, None, 30, rng(11))
    do_sink = collect_samples(world, Intervention(2, 9.0), 30, rng(11))
    np.testing.assert_array_equal(obs.values[:, :2], do_sink.values[:, :2])
    assert np.all(do_sink.column(2) == 9.0)


def test_nondescendants_unaffected_by_intervention():
    dag = random_weighted_dag(10, 0.3, rng(12))
    world = init_scm(dag, 0.5, rng(13))
    target = 4
    obs = collect_samples(world, None, 40, rng(14))
    shifted = collect_samples(world, Intervention(target, 500.0), 40, rng(14))
    descendants = set(np.flatnonzero(transitive_closure(dag)[target]))
    for v in range(10):
        if v != target and v not in descendants:
            np.testing.assert_array_equal(obs.column(v), shifted.column(v))


def test_do_rejects_bad_target():
    world = chain_world()
    with pytest.raises(ValueError):
        sample_interventional_epoch(world, 7, 1.0, rng())


# --- collect_samples ---


def test_collect_shape_and_k_validation():
    world = chain_world()
    samples = collect_samples(world, None, 5, rng(15))
    assert samples.values.shape == (5, 3)
    assert samples.regime is None
    with pytest.raises(ValueError):
        collect_samples(world, None, 0, rng())


def test_collect_deterministic_replay():
    world = chain_world(lam=1.0)
    a = collect_samples(world, None, 10, rng(16))
    b = collect_samples(world, None, 10, rng(16))
    np.testing.assert_array_equal(a.values, b.values)


def test_sample_matrix_is_read_only():
    samples = collect_samples(chain_world(), None, 3, rng(17))
    with pytest.raises(ValueError):
        samples.values[0, 0] = 1.0


# --- helpers and serialization ---


def test_regime_label():
    assert regime_label(None) == "observational"
    assert regime_label(Intervention(2, 1.5)) == "do(2=1.5)"


def test_stack_matrices():
    world = chain_world()
    a = collect_samples(world, None, 4, rng(18))
    b = collect_samples(world, Intervention(0, 1.0), 6, rng(18))
    stacked = stack_matrices([a, b])
    assert stacked.shape == (10, 3)
    np.testing.assert_array_equal(stacked[:4], a.values)


def test_samples_csv_round_trip(tmp_path):
    world = chain_world(lam=0.5)
    samples = collect_samples(world, Intervention(1, 3.5), 7, rng(19))
    path = tmp_path / "samples.csv"
    write_samples_csv(samples, path)
    back = read_samples_csv(path)
    np.testing.assert_array_equal(back.values, samples.values)
    assert back.regime == samples.regime


def test_samples_csv_observational_round_trip(tmp_path):
    samples = collect_samples(chain_world(), None, 3, rng(20))
    path = tmp_path / "obs.csv"
    write_samples_csv(samples, path)
    assert read_samples_csv(path).regime is None


def test_sample_matrix_validation():
    with pytest.raises(ValueError):
        SampleMatrix(values=np.zeros(3))
    with pytest.raises(ValueError):
        SampleMatrix(values=np.zeros((0, 3)))
