"""Budgeted interventional causal discovery on linear-Gaussian worlds.

The package is organised around a small pipeline:

- :mod:`dodo.graphs` random weighted DAGs and graph utilities
- :mod:`dodo.scm` linear-Gaussian structural causal models and sampling
- :mod:`dodo.stats` hypothesis tests used by both discovery algorithms
- :mod:`dodo.agent` the interventional discovery agent
- :mod:`dodo.pc` the observational PC baseline
- :mod:`dodo.metrics` structural accuracy scores
- :mod:`dodo.harness` seeded benchmark grids and CSV reporting
- :mod:`dodo.cli` command line entry points
"""

__version__ = "0.1.0"
