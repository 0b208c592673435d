"""Shared builders for small hand-specified worlds."""

import numpy as np

from dodo.graphs import WeightedDag
from dodo.scm import ScmParams


def dag_from(n, edges):
    """WeightedDag from (cause, effect, weight) triples."""
    return WeightedDag(n=n, edges=tuple(edges))


def world_from(dag, mu=None, sigma=None, lam=0.0):
    """ScmParams with explicit parameters (defaults: mu=0, sigma=1)."""
    n = dag.n
    mu = np.zeros(n) if mu is None else np.asarray(mu, dtype=float)
    sigma = np.ones(n) if sigma is None else np.asarray(sigma, dtype=float)
    return ScmParams(dag=dag, mu=mu, sigma=sigma, noise_std=np.full(n, float(lam)))


def chain_world(weights=(2.0, 3.0), mu=(10.0, 0.0, 0.0), sigma=(1.0, 1.0, 1.0), lam=0.0):
    """Three-node chain 0 -> 1 -> 2 with the given edge weights."""
    dag = dag_from(3, [(0, 1, weights[0]), (1, 2, weights[1])])
    return world_from(dag, mu=mu, sigma=sigma, lam=lam)


def collider_world(weights=(2.0, -3.0), lam=0.5):
    """Collider 0 -> 2 <- 1."""
    dag = dag_from(3, [(0, 2, weights[0]), (1, 2, weights[1])])
    return world_from(dag, mu=(0.0, 0.0, 0.0), sigma=(1.0, 1.0, 1.0), lam=lam)
