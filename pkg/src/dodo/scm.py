"""Linear-Gaussian structural causal models with hard interventions.

A world couples a weighted DAG with per-node parameters. In every epoch
each source node ``v`` takes the value ``gamma_v + eps_v`` where
``gamma_v ~ N(mu_v, sigma_v^2)`` is redrawn per epoch and
``eps_v ~ N(0, lambda_v^2)`` is measurement noise. A non-source node is
the weighted sum of its parents plus its own noise term. A hard
intervention ``do(v = value)`` clamps node ``v`` to the value exactly,
noise included, while the rest of the world evolves as usual.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .graphs import WeightedDag, topological_order

MU_LOW = -50.0
MU_HIGH = 50.0
SIGMA_LOW = 1.0
SIGMA_HIGH = 2.0
FIXED_STD_MEASURE = 2.0


@dataclass(frozen=True)
class Intervention:
    """Hard intervention: clamp ``target`` to ``value`` for an epoch."""

    target: int
    value: float


@dataclass(frozen=True, eq=False)
class ScmParams:
    """A sampled world: topology plus per-node distribution parameters.

    Arrays have length ``dag.n`` and are frozen after construction.
    ``noise_std`` is the per-node measurement noise scale ``lambda_v``.
    """

    dag: WeightedDag
    mu: np.ndarray
    sigma: np.ndarray
    noise_std: np.ndarray

    def __post_init__(self) -> None:
        for name in ("mu", "sigma", "noise_std"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.dag.n,):
                raise ValueError(f"{name} must have shape ({self.dag.n},), got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.sigma < 0.0) or np.any(self.noise_std < 0.0):
            raise ValueError("scale parameters must be non-negative")

    @property
    def n(self) -> int:
        return self.dag.n


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``(k, n)`` matrix of epoch samples under a single regime.

    ``regime`` is None for observational data, otherwise the intervention
    that was active for every row.
    """

    values: np.ndarray
    regime: Intervention | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"values must be a (k, n) matrix with k, n >= 1, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def column(self, v: int) -> np.ndarray:
        return self.values[:, v]


def init_scm(
    dag: WeightedDag,
    noise_coefficient: float,
    rng: np.random.Generator,
    std_measure: float = FIXED_STD_MEASURE,
) -> ScmParams:
    """Draw per-node parameters for a world on the given topology.

    ``mu_v ~ U(-50, 50)`` and ``sigma_v ~ U(1, 2)`` are drawn for every
    node (parents keep theirs unused, which keeps the stream layout
    independent of the topology). The noise scale is the same for all
    nodes: ``lambda = noise_coefficient * std_measure``.
    """
    if noise_coefficient < 0.0:
        raise ValueError(f"noise coefficient must be non-negative, got {noise_coefficient}")
    if std_measure < 0.0:
        raise ValueError(f"std_measure must be non-negative, got {std_measure}")
    mu = rng.uniform(MU_LOW, MU_HIGH, size=dag.n)
    sigma = rng.uniform(SIGMA_LOW, SIGMA_HIGH, size=dag.n)
    noise_std = np.full(dag.n, noise_coefficient * std_measure)
    return ScmParams(dag=dag, mu=mu, sigma=sigma, noise_std=noise_std)


def _evaluate(
    scm: ScmParams,
    gamma: np.ndarray,
    eps: np.ndarray,
    regime: Intervention | None,
) -> np.ndarray:
    """Propagate exogenous draws through the DAG in topological order."""
    x = np.empty_like(gamma)
    parents = {v: scm.dag.parents(v) for v in range(scm.n)}
    for v in topological_order(scm.dag):
        if regime is not None and regime.target == v:
            x[:, v] = regime.value
            continue
        pa = parents[v]
        if not pa:
            x[:, v] = gamma[:, v] + eps[:, v]
        else:
            acc = eps[:, v].copy()
            for u, w in pa:
                acc += w * x[:, u]
            x[:, v] = acc
    return x


def collect_samples(
    scm: ScmParams,
    regime: Intervention | None,
    k: int,
    rng: np.random.Generator,
) -> SampleMatrix:
    """Sample ``k`` epochs under one regime.

    Per epoch, fresh ``gamma`` and ``eps`` vectors are drawn for all
    nodes (clamped nodes burn their draws; the stream position therefore
    depends only on ``k`` and ``n``, never on the regime). Raises
    ValueError for ``k < 1`` or an out-of-range intervention target.
    """
    if k < 1:
        raise ValueError(f"need at least one epoch, got k={k}")
    if regime is not None and not (0 <= regime.target < scm.n):
        raise ValueError(f"intervention target {regime.target} out of range for n={scm.n}")
    gamma = rng.normal(scm.mu, scm.sigma, size=(k, scm.n))
    eps = rng.normal(0.0, scm.noise_std, size=(k, scm.n))
    return SampleMatrix(values=_evaluate(scm, gamma, eps, regime), regime=regime)


def sample_observational_epoch(scm: ScmParams, rng: np.random.Generator) -> np.ndarray:
    """One observational epoch as a length-``n`` vector."""
    return collect_samples(scm, None, 1, rng).values[0]


def sample_interventional_epoch(
    scm: ScmParams, target: int, value: float, rng: np.random.Generator
) -> np.ndarray:
    """One epoch under ``do(target = value)`` as a length-``n`` vector."""
    return collect_samples(scm, Intervention(target, value), 1, rng).values[0]


def regime_label(regime: Intervention | None) -> str:
    if regime is None:
        return "observational"
    return f"do({regime.target}={regime.value!r})"


def write_samples_csv(samples: SampleMatrix, path: str | Path) -> None:
    """Write a sample matrix as CSV with a regime comment line.

    Layout: ``# regime=...`` sidecar line, a header of column indices,
    then one row per epoch. Floats are written with repr so a read-back
    is bit-exact.
    """
    with open(path, "w", newline="") as fh:
        fh.write(f"# regime={regime_label(samples.regime)}\n")
        writer = csv.writer(fh)
        writer.writerow(range(samples.n))
        for row in samples.values:
            writer.writerow([repr(float(x)) for x in row])


def read_samples_csv(path: str | Path) -> SampleMatrix:
    """Read a matrix written by :func:`write_samples_csv`."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# regime="):
        raise ValueError(f"{path}: expected '# regime=' sidecar line")
    label = text[0][len("# regime=") :]
    regime: Intervention | None = None
    if label != "observational":
        if not (label.startswith("do(") and label.endswith(")")):
            raise ValueError(f"{path}: malformed regime label {label!r}")
        target_s, value_s = label[3:-1].split("=")
        regime = Intervention(int(target_s), float(value_s))
    rows = [r for r in csv.reader(text[1:]) if r]
    values = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float)
    return SampleMatrix(values=values, regime=regime)


def stack_matrices(matrices: Iterable[SampleMatrix]) -> np.ndarray:
    """Row-stack the raw values of several sample matrices."""
    return np.vstack([m.values for m in matrices])
