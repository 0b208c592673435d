"""Seeded benchmark grids: scenario fan-out, scoring, CSV reporting.

Every run is identified by a scenario (world shape, budget, algorithm)
plus two seeds. The topology seed drives graph generation, the init seed
drives world parameters and every sampled epoch; the two feed disjoint
generator streams, so changing one never perturbs the other's draws.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .agent import DEFAULT_P_CRIT, InfeasibleBudgetError, run_dodo
from .graphs import WeightedDag, random_weighted_dag
from .metrics import confusion, f1_score, shd
from .pc import run_pc
from .scm import FIXED_STD_MEASURE, ScmParams, collect_samples, init_scm

log = logging.getLogger(__name__)

# Stream tags keeping topology draws and world/noise draws disjoint.
_TOPOLOGY_STREAM = 0x746F706F
_INIT_STREAM = 0x696E6974

DEFAULT_NS = (5, 10, 20)
DEFAULT_EDGE_PROBS = (0.15, 0.30, 0.50)
DEFAULT_NOISES = (0.0001, 0.5, 1.0)
DEFAULT_BUDGETS = tuple(range(100, 1001, 100))
DEFAULT_ALGORITHMS = ("dodo", "pc")
DEFAULT_ALPHAS = (0.001, 0.01, 0.05)
DEFAULT_SEED_COUNT = 30


@dataclass(frozen=True)
class Scenario:
    """One cell of the benchmark grid."""

    n: int
    edge_prob: float
    noise: float
    budget: int
    algorithm: str
    p_crit: float = DEFAULT_P_CRIT
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    std_measure: float = FIXED_STD_MEASURE
    prune_on: str = "observational"
    undirected_policy: str = "both"
    max_cond_size: int | None = None

    def sort_key(self) -> tuple:
        return (self.algorithm, self.n, self.edge_prob, self.noise, self.budget)

    def group_key(self) -> tuple:
        return (self.n, self.edge_prob, self.noise, self.budget, self.algorithm)


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one (scenario, topology seed, init seed) run.

    ``f1``/``shd`` are None when the run could not execute (infeasible
    budget). PC records keep the scores of every swept alpha in
    ``alpha_metrics`` as (alpha, f1, shd) triples so the harness can pick
    one alpha per scenario after all runs finish.
    """

    scenario: Scenario
    topology_seed: int
    init_seed: int
    f1: float | None
    shd: int | None
    epochs_used: int
    flags: tuple[str, ...] = ()
    alpha_metrics: tuple[tuple[float, float, int], ...] | None = None

    def included(self) -> bool:
        """True when the run counts toward headline aggregates."""
        return (
            self.f1 is not None
            and "infeasible_budget" not in self.flags
            and "empty_truth" not in self.flags
        )


@dataclass(frozen=True)
class AggregateRow:
    """Per-scenario summary with normal-approximation confidence bounds."""

    scenario: Scenario
    params: str
    mean_f1: float
    ci95_f1: float
    mean_shd: float
    ci95_shd: float
    count: int
    excluded: int


@dataclass(frozen=True)
class GridConfig:
    """Fully resolved experiment grid."""

    ns: tuple[int, ...] = DEFAULT_NS
    edge_probs: tuple[float, ...] = DEFAULT_EDGE_PROBS
    noises: tuple[float, ...] = DEFAULT_NOISES
    budgets: tuple[int, ...] = DEFAULT_BUDGETS
    algorithms: tuple[str, ...] = DEFAULT_ALGORITHMS
    p_crit: float = DEFAULT_P_CRIT
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    topology_seeds: tuple[int, ...] = tuple(range(DEFAULT_SEED_COUNT))
    init_seeds: tuple[int, ...] = tuple(range(DEFAULT_SEED_COUNT))
    std_measure: float = FIXED_STD_MEASURE
    prune_on: str = "observational"
    undirected_policy: str = "both"
    max_cond_size: int | None = None
    workers: int = 1

    def scenarios(self) -> list[Scenario]:
        out = []
        for algorithm in self.algorithms:
            for n in self.ns:
                for p in self.edge_probs:
                    for noise in self.noises:
                        for budget in self.budgets:
                            out.append(
                                Scenario(
                                    n=n,
                                    edge_prob=p,
                                    noise=noise,
                                    budget=budget,
                                    algorithm=algorithm,
                                    p_crit=self.p_crit,
                                    alphas=self.alphas,
                                    std_measure=self.std_measure,
                                    prune_on=self.prune_on,
                                    undirected_policy=self.undirected_policy,
                                    max_cond_size=self.max_cond_size,
                                )
                            )
        return out


class ConfigError(ValueError):
    """Config file rejected; the message names the offending key."""


def _seed_list(value, key: str) -> tuple[int, ...]:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected an integer count or list of seeds")
    if isinstance(value, int):
        if value < 1:
            raise ConfigError(f"{key}: seed count must be positive, got {value}")
        return tuple(range(value))
    if isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        if not value:
            raise ConfigError(f"{key}: seed list must be nonempty")
        return tuple(value)
    raise ConfigError(f"{key}: expected an integer count or list of seeds, got {value!r}")


def _number_list(value, key: str, lo: float, hi: float, integral: bool = False) -> tuple:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key}: expected a nonempty list, got {value!r}")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key}: expected numbers, got {v!r}")
        if integral and not isinstance(v, int):
            raise ConfigError(f"{key}: expected integers, got {v!r}")
        if not lo <= v <= hi:
            raise ConfigError(f"{key}: value {v} outside [{lo}, {hi}]")
        out.append(int(v) if integral else float(v))
    return tuple(out)


_CONFIG_KEYS = {
    "ns",
    "edge_probs",
    "noise_coefficients",
    "budgets",
    "algorithms",
    "p_crit",
    "alphas",
    "topology_seeds",
    "init_seeds",
    "std_measure",
    "prune_on",
    "undirected_policy",
    "max_cond_size",
    "workers",
}


def load_config(path: str | Path | None) -> GridConfig:
    """Load a JSON grid config; None or an empty file yields the default
    grid (the full 3 x 3 x 3 x 10 sweep with 30 x 30 seeds per scenario).

    Keys mirror the GridConfig fields; unknown keys are rejected by name.
    Seed keys accept either an integer count (seeds 0..count-1) or an
    explicit list.
    """
    if path is None:
        return GridConfig()
    text = Path(path).read_text().strip()
    if not text:
        return GridConfig()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")

    kwargs = {}
    if "ns" in raw:
        kwargs["ns"] = _number_list(raw["ns"], "ns", 1, 10_000, integral=True)
    if "edge_probs" in raw:
        kwargs["edge_probs"] = _number_list(raw["edge_probs"], "edge_probs", 0.0, 1.0)
    if "noise_coefficients" in raw:
        kwargs["noises"] = _number_list(
            raw["noise_coefficients"], "noise_coefficients", 0.0, math.inf
        )
    if "budgets" in raw:
        kwargs["budgets"] = _number_list(raw["budgets"], "budgets", 1, 10**9, integral=True)
    if "algorithms" in raw:
        algos = raw["algorithms"]
        if (
            not isinstance(algos, list)
            or not algos
            or any(a not in ("dodo", "pc") for a in algos)
        ):
            raise ConfigError(f"algorithms: expected a nonempty subset of ['dodo', 'pc'], got {algos!r}")
        kwargs["algorithms"] = tuple(algos)
    if "p_crit" in raw:
        (kwargs["p_crit"],) = _number_list([raw["p_crit"]], "p_crit", 0.0, 1.0)
        if not 0.0 < kwargs["p_crit"] < 1.0:
            raise ConfigError(f"p_crit: must lie strictly inside (0, 1), got {raw['p_crit']}")
    if "alphas" in raw:
        kwargs["alphas"] = _number_list(raw["alphas"], "alphas", 0.0, 1.0)
        if any(not 0.0 < a < 1.0 for a in kwargs["alphas"]):
            raise ConfigError(f"alphas: must lie strictly inside (0, 1), got {raw['alphas']}")
    if "topology_seeds" in raw:
        kwargs["topology_seeds"] = _seed_list(raw["topology_seeds"], "topology_seeds")
    if "init_seeds" in raw:
        kwargs["init_seeds"] = _seed_list(raw["init_seeds"], "init_seeds")
    if "std_measure" in raw:
        (kwargs["std_measure"],) = _number_list([raw["std_measure"]], "std_measure", 0.0, math.inf)
    if "prune_on" in raw:
        if raw["prune_on"] not in ("observational", "pooled"):
            raise ConfigError(f"prune_on: expected 'observational' or 'pooled', got {raw['prune_on']!r}")
        kwargs["prune_on"] = raw["prune_on"]
    if "undirected_policy" in raw:
        if raw["undirected_policy"] not in ("both", "skip"):
            raise ConfigError(
                f"undirected_policy: expected 'both' or 'skip', got {raw['undirected_policy']!r}"
            )
        kwargs["undirected_policy"] = raw["undirected_policy"]
    if "max_cond_size" in raw and raw["max_cond_size"] is not None:
        v = raw["max_cond_size"]
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ConfigError(f"max_cond_size: expected a non-negative integer or null, got {v!r}")
        kwargs["max_cond_size"] = v
    if "workers" in raw:
        v = raw["workers"]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"workers: expected a positive integer, got {v!r}")
        kwargs["workers"] = v
    return GridConfig(**kwargs)


def topology_rng(topology_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_TOPOLOGY_STREAM, topology_seed]))


def init_rng(init_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_INIT_STREAM, init_seed]))


def make_world(
    scenario: Scenario, topology_seed: int, init_seed: int
) -> tuple[WeightedDag, ScmParams, np.random.Generator]:
    """Build the ground-truth world for a run.

    The topology seed determines structure and edge weights; the init
    seed determines node parameters and, through the returned generator,
    every epoch sampled afterwards.
    """
    dag = random_weighted_dag(scenario.n, scenario.edge_prob, topology_rng(topology_seed))
    rng = init_rng(init_seed)
    world = init_scm(dag, scenario.noise, rng, std_measure=scenario.std_measure)
    return dag, world, rng


def _pick_alpha(metrics: dict[float, tuple[float, int]], alphas: tuple[float, ...]) -> float:
    """Highest F1 wins; ties go to the smallest alpha."""
    best = None
    for alpha in sorted(alphas):
        f1 = metrics[alpha][0]
        if best is None or f1 > metrics[best][0]:
            best = alpha
    return best


def run_scenario(scenario: Scenario, topology_seed: int, init_seed: int) -> RunRecord:
    """Execute one seeded run and score it against the ground truth.

    Infeasible budgets produce a flagged record rather than an exception
    so sweeps can show the feasibility cliff. PC runs are scored under
    every alpha in the scenario's sweep; the headline f1/shd carry the
    per-run best until a per-scenario choice replaces them.
    """
    dag, world, rng = make_world(scenario, topology_seed, init_seed)
    truth = dag.adjacency()
    flags: list[str] = []
    if not dag.edges:
        flags.append("empty_truth")

    if scenario.algorithm == "dodo":
        try:
            graph = run_dodo(
                world,
                scenario.budget,
                rng,
                p_crit=scenario.p_crit,
                prune_on=scenario.prune_on,
            )
        except InfeasibleBudgetError:
            return RunRecord(
                scenario=scenario,
                topology_seed=topology_seed,
                init_seed=init_seed,
                f1=None,
                shd=None,
                epochs_used=0,
                flags=tuple(["infeasible_budget", *flags]),
            )
        counts = confusion(truth, graph.adjacency())
        flags.extend(graph.flags)
        return RunRecord(
            scenario=scenario,
            topology_seed=topology_seed,
            init_seed=init_seed,
            f1=f1_score(counts),
            shd=shd(counts),
            epochs_used=int(graph.info["epochs_used"]),
            flags=tuple(flags),
        )

    if scenario.algorithm != "pc":
        raise ValueError(f"unknown algorithm {scenario.algorithm!r}")
    data = collect_samples(world, None, scenario.budget, rng)
    metrics: dict[float, tuple[float, int]] = {}
    for alpha in sorted(scenario.alphas):
        graph = run_pc(
            data,
            alpha,
            max_cond_size=scenario.max_cond_size,
            undirected_policy=scenario.undirected_policy,
        )
        counts = confusion(truth, graph.adjacency())
        metrics[alpha] = (f1_score(counts), shd(counts))
    best = _pick_alpha(metrics, scenario.alphas)
    return RunRecord(
        scenario=scenario,
        topology_seed=topology_seed,
        init_seed=init_seed,
        f1=metrics[best][0],
        shd=metrics[best][1],
        epochs_used=scenario.budget,
        flags=tuple(flags),
        alpha_metrics=tuple((a, metrics[a][0], metrics[a][1]) for a in sorted(metrics)),
    )


def select_pc_alphas(records: list[RunRecord]) -> list[RunRecord]:
    """Rewrite PC records so each scenario reports one alpha.

    For every PC scenario the alpha with the best mean F1 over included
    runs is chosen (ties to the smallest alpha) and all records of that
    scenario are rewritten to carry its scores, tagged ``alpha=<value>``.
    Records of other algorithms pass through unchanged.
    """
    groups: dict[tuple, list[int]] = {}
    for pos, record in enumerate(records):
        if record.scenario.algorithm == "pc" and record.alpha_metrics:
            groups.setdefault(record.scenario.group_key(), []).append(pos)

    out = list(records)
    for positions in groups.values():
        group = [records[p] for p in positions]
        basis = [r for r in group if "empty_truth" not in r.flags] or group
        alphas = sorted({a for r in basis for a, _, _ in r.alpha_metrics})
        means = {
            alpha: float(np.mean([dict((a, f) for a, f, _ in r.alpha_metrics)[alpha] for r in basis]))
            for alpha in alphas
        }
        best = None
        for alpha in alphas:
            if best is None or means[alpha] > means[best]:
                best = alpha
        for p in positions:
            record = records[p]
            per_alpha = {a: (f, s) for a, f, s in record.alpha_metrics}
            f1, shd_value = per_alpha[best]
            out[p] = replace(
                record,
                f1=f1,
                shd=shd_value,
                flags=tuple([f"alpha={best:g}", *record.flags]),
            )
    return out


def _ci95(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return 1.96 * float(np.std(values, ddof=1)) / math.sqrt(len(values))


def aggregate(records: list[RunRecord]) -> list[AggregateRow]:
    """Per-scenario means and 95% confidence bounds over included runs.

    Flagged failures and empty-truth runs are excluded from the means;
    their count appears in the ``excluded`` column. Scenarios with no
    included run at all are omitted with a log diagnostic.
    """
    groups: dict[tuple, list[RunRecord]] = {}
    order: list[tuple] = []
    for record in records:
        key = record.scenario.group_key()
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(record)

    rows = []
    for key in sorted(order):
        group = groups[key]
        included = [r for r in group if r.included()]
        excluded = len(group) - len(included)
        scenario = group[0].scenario
        if not included:
            log.warning("scenario %s: no scoreable runs (%d excluded), omitted", key, excluded)
            continue
        if scenario.algorithm == "pc":
            alpha_flags = [f for f in included[0].flags if f.startswith("alpha=")]
            params = alpha_flags[0] if alpha_flags else "alphas=" + "/".join(f"{a:g}" for a in scenario.alphas)
        else:
            params = f"p_crit={scenario.p_crit:g}"
        f1s = [float(r.f1) for r in included]
        shds = [float(r.shd) for r in included]
        rows.append(
            AggregateRow(
                scenario=scenario,
                params=params,
                mean_f1=float(np.mean(f1s)),
                ci95_f1=_ci95(f1s),
                mean_shd=float(np.mean(shds)),
                ci95_shd=_ci95(shds),
                count=len(included),
                excluded=excluded,
            )
        )
    return rows


RUNS_COLUMNS = (
    "n",
    "edge_prob",
    "noise",
    "budget",
    "algorithm",
    "topology_seed",
    "init_seed",
    "f1",
    "shd",
    "flags",
)

AGGREGATES_COLUMNS = (
    "n",
    "edge_prob",
    "noise",
    "budget",
    "algorithm",
    "params",
    "mean_f1",
    "ci95_f1",
    "mean_shd",
    "ci95_shd",
    "count",
    "excluded",
)


def run_row(record: RunRecord) -> list[str]:
    s = record.scenario
    flags = [f"epochs={record.epochs_used}", *record.flags]
    return [
        str(s.n),
        repr(float(s.edge_prob)),
        repr(float(s.noise)),
        str(s.budget),
        s.algorithm,
        str(record.topology_seed),
        str(record.init_seed),
        "" if record.f1 is None else f"{record.f1:.6f}",
        "" if record.shd is None else str(record.shd),
        "|".join(flags),
    ]


def write_results(rows: list[AggregateRow], records: list[RunRecord], out_dir: str | Path) -> None:
    """Write ``runs.csv`` and ``aggregates.csv`` under ``out_dir``.

    Rows are sorted by scenario and seeds before writing, so reruns of
    the same configuration produce byte-identical files regardless of
    execution order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ordered = sorted(records, key=lambda r: (r.scenario.sort_key(), r.topology_seed, r.init_seed))
    with open(out / "runs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNS_COLUMNS)
        for record in ordered:
            writer.writerow(run_row(record))

    with open(out / "aggregates.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATES_COLUMNS)
        for row in sorted(rows, key=lambda r: r.scenario.sort_key()):
            s = row.scenario
            writer.writerow(
                [
                    str(s.n),
                    repr(float(s.edge_prob)),
                    repr(float(s.noise)),
                    str(s.budget),
                    s.algorithm,
                    row.params,
                    f"{row.mean_f1:.6f}",
                    f"{row.ci95_f1:.6f}",
                    f"{row.mean_shd:.6f}",
                    f"{row.ci95_shd:.6f}",
                    str(row.count),
                    str(row.excluded),
                ]
            )


def _run_item(item: tuple[Scenario, int, int]) -> RunRecord:
    scenario, topology_seed, init_seed = item
    return run_scenario(scenario, topology_seed, init_seed)


def run_grid(config: GridConfig, progress=None) -> tuple[list[RunRecord], list[AggregateRow]]:
    """Execute every (scenario, seed pair) in the grid and aggregate.

    Runs are independent; with ``config.workers > 1`` they execute in a
    process pool. Results are deterministic for a given config no matter
    the worker count. ``progress``, if given, is called with
    (done_count, total_count) after every run.
    """
    work = [
        (scenario, t, i)
        for scenario in config.scenarios()
        for t in config.topology_seeds
        for i in config.init_seeds
    ]
    records: list[RunRecord] = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for record in pool.map(_run_item, work, chunksize=16):
                records.append(record)
                if progress is not None:
                    progress(len(records), len(work))
    else:
        for item in work:
            records.append(_run_item(item))
            if progress is not None:
                progress(len(records), len(work))
    records = select_pc_alphas(records)
    return records, aggregate(records)
