"""Structural accuracy scores for directed graph estimates.

All metrics treat the ordered off-diagonal cells of the adjacency matrix
as independent binary decisions: an edge u -> v is a separate cell from
v -> u, so a reversed edge costs one false positive plus one false
negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    """Directed-edge confusion counts over ordered node pairs."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def pairs(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _as_binary_adjacency(a, name: str) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must be binary")
    if np.any(np.diag(arr) != 0):
        raise ValueError(f"{name} has nonzero diagonal entries")
    return arr.astype(bool)


def confusion(truth, predicted) -> ConfusionCounts:
    """Count edge decisions of ``predicted`` against ``truth``.

    Both arguments are square binary adjacency matrices of the same size
    with zero diagonals. Only off-diagonal cells are counted, so the four
    counts always sum to n * (n - 1).
    """
    t = _as_binary_adjacency(truth, "truth")
    p = _as_binary_adjacency(predicted, "predicted")
    if t.shape != p.shape:
        raise ValueError(f"shape mismatch: truth {t.shape} vs predicted {p.shape}")
    off = ~np.eye(t.shape[0], dtype=bool)
    tp = int(np.sum(t & p & off))
    fp = int(np.sum(~t & p & off))
    fn = int(np.sum(t & ~p & off))
    tn = int(np.sum(~t & ~p & off))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def f1_score(counts: ConfusionCounts) -> float:
    """Directed-edge F1. Both graphs empty counts as a perfect score."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 1.0
    return 2.0 * counts.tp / denom


def shd(counts: ConfusionCounts) -> int:
    """Structural Hamming distance: false positives plus false negatives."""
    return counts.fp + counts.fn
