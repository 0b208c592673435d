"""Confusion counting, F1 and SHD against a brute-force cell oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dodo.metrics import ConfusionCounts, confusion, f1_score, shd


def brute_force_confusion(truth, predicted):
    """Count every off-diagonal cell one by one."""
    n = truth.shape[0]
    tp = fp = fn = tn = 0
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            t, p = bool(truth[u, v]), bool(predicted[u, v])
            tp += t and p
            fp += (not t) and p
            fn += t and (not p)
            tn += (not t) and (not p)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def random_adjacency(n, rng):
    a = (rng.random((n, n)) < 0.4).astype(int)
    np.fill_diagonal(a, 0)
    return a


# --- confusion ---


def test_confusion_perfect_match():
    truth = np.zeros((4, 4), dtype=int)
    truth[0, 1] = truth[1, 2] = truth[0, 3] = 1
    c = confusion(truth, truth)
    assert (c.tp, c.fp, c.fn, c.tn) == (3, 0, 0, 9)


def test_confusion_empty_prediction():
    truth = np.zeros((5, 5), dtype=int)
    truth[0, 1] = truth[2, 3] = truth[4, 0] = 1
    c = confusion(truth, np.zeros((5, 5), dtype=int))
    assert (c.tp, c.fp, c.fn) == (0, 0, 3)


def test_confusion_reversed_edge():
    truth = np.zeros((3, 3), dtype=int)
    predicted = np.zeros((3, 3), dtype=int)
    truth[0, 1] = 1
    predicted[1, 0] = 1
    c = confusion(truth, predicted)
    assert (c.tp, c.fp, c.fn) == (0, 1, 1)


def test_confusion_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        confusion(np.zeros((3, 3)), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        confusion(np.zeros((3, 2)), np.zeros((3, 2)))


def test_confusion_rejects_nonzero_diagonal():
    with pytest.raises(ValueError):
        confusion(np.eye(3, dtype=int), np.zeros((3, 3), dtype=int))


def test_confusion_matches_brute_force():
    g = np.random.default_rng(0)
    for _ in range(200):
        n = int(g.integers(2, 9))
        truth = random_adjacency(n, g)
        predicted = random_adjacency(n, g)
        assert confusion(truth, predicted) == brute_force_confusion(truth, predicted)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_confusion_cells_sum_to_ordered_pairs(seed, n):
    g = np.random.default_rng(seed)
    c = confusion(random_adjacency(n, g), random_adjacency(n, g))
    assert c.tp + c.fp + c.fn + c.tn == n * (n - 1)


# --- f1_score ---


def test_f1_formula():
    assert f1_score(ConfusionCounts(tp=2, fp=1, fn=1, tn=5)) == pytest.approx(2 / 3)


def test_f1_perfect():
    assert f1_score(ConfusionCounts(tp=4, fp=0, fn=0, tn=8)) == 1.0


def test_f1_both_empty_convention():
    assert f1_score(ConfusionCounts(tp=0, fp=0, fn=0, tn=12)) == 1.0


def test_f1_all_wrong():
    assert f1_score(ConfusionCounts(tp=0, fp=3, fn=2, tn=7)) == 0.0


# --- shd ---


def test_shd_perfect():
    assert shd(ConfusionCounts(tp=3, fp=0, fn=0, tn=9)) == 0


def test_shd_one_extra_one_missing():
    assert shd(ConfusionCounts(tp=2, fp=1, fn=1, tn=8)) == 2


def test_shd_reversed_edge_costs_two():
    truth = np.zeros((3, 3), dtype=int)
    predicted = np.zeros((3, 3), dtype=int)
    truth[0, 1] = 1
    predicted[1, 0] = 1
    assert shd(confusion(truth, predicted)) == 2


def test_shd_symmetric_in_arguments():
    g = np.random.default_rng(1)
    for _ in range(50):
        a = random_adjacency(5, g)
        b = random_adjacency(5, g)
        assert shd(confusion(a, b)) == shd(confusion(b, a))


# --- joint invariants ---


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_metric_invariants(seed, n):
    g = np.random.default_rng(seed)
    truth = random_adjacency(n, g)
    predicted = random_adjacency(n, g)
    c = confusion(truth, predicted)
    f1 = f1_score(c)
    d = shd(c)
    assert 0.0 <= f1 <= 1.0
    assert 0 <= d <= n * (n - 1)
    if truth.any():
        assert (d == 0) == (f1 == 1.0) == np.array_equal(truth, predicted)


def test_accepts_float_and_bool_matrices():
    truth = np.zeros((3, 3))
    truth[0, 1] = 1.0
    c = confusion(truth.astype(bool), truth)
    assert c.tp == 1 and shd(c) == 0
