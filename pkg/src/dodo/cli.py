"""Command line interface.

Subcommands: ``generate`` (emit a random world topology), ``run`` (one
seeded scenario), ``sweep`` (a full grid), ``eval`` (score an edge-list
file against a truth file). Exit codes: 0 on success, 2 on usage errors,
1 on runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from pathlib import Path

from .agent import DEFAULT_P_CRIT, InfeasibleBudgetError, run_dodo
from .graphs import (
    InferredGraph,
    edge_list_text,
    random_weighted_dag,
    read_adjacency,
    write_edge_list,
)
from .harness import (
    DEFAULT_ALPHAS,
    ConfigError,
    Scenario,
    load_config,
    make_world,
    run_grid,
    run_row,
    topology_rng,
    write_results,
)
from .metrics import confusion, f1_score, shd
from .pc import run_pc
from .scm import collect_samples, write_samples_csv

OUT_DIR_ENV = "DODO_OUT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dodo",
        description="Budgeted interventional causal discovery benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="emit a random weighted DAG as an edge list")
    gen.add_argument("--n", type=int, required=True, help="node count")
    gen.add_argument("--p", type=float, required=True, help="edge probability")
    gen.add_argument("--seed", type=int, default=0, help="topology seed")
    gen.add_argument("--out", type=Path, default=None, help="output file (default stdout)")

    run = sub.add_parser("run", help="run one seeded scenario and print its record")
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--p", type=float, required=True, help="edge probability")
    run.add_argument("--noise", type=float, required=True, help="noise coefficient")
    run.add_argument("--budget", type=int, required=True, help="total epoch budget")
    run.add_argument("--algo", choices=("dodo", "pc"), required=True)
    run.add_argument(
        "--seed",
        type=str,
        default="0,0",
        help="topology and init seeds as 'T,I' (default 0,0)",
    )
    run.add_argument("--p-crit", type=float, default=DEFAULT_P_CRIT)
    run.add_argument(
        "--alpha",
        type=float,
        action="append",
        default=None,
        help="PC significance level; repeat to sweep (default sweeps 0.001, 0.01, 0.05)",
    )
    run.add_argument(
        "--out",
        type=Path,
        default=None,
        help="directory for truth.edges, inferred.edges and diagnostics.csv",
    )
    run.add_argument(
        "--dump-samples",
        type=Path,
        default=None,
        help="directory for the collected sample matrices as CSV",
    )

    sweep = sub.add_parser("sweep", help="run a whole grid and write CSV results")
    sweep.add_argument(
        "--grid",
        type=str,
        default="paper",
        help="JSON config path, or 'paper' for the full default grid",
    )
    sweep.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"output directory (default ${OUT_DIR_ENV} or ./results)",
    )
    sweep.add_argument("--workers", type=int, default=None, help="parallel worker count")

    ev = sub.add_parser("eval", help="score an inferred edge list against a truth edge list")
    ev.add_argument("truth", type=Path)
    ev.add_argument("predicted", type=Path)

    return parser


def _parse_seed_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'T,I' seed pair, got {text!r}")
    return int(parts[0]), int(parts[1])


def _write_diagnostics(graph: InferredGraph, path: Path) -> None:
    """Per-pair trace: detection p, pruning p, final decision."""
    pairs = sorted(set(graph.detection_p) | set(graph.pruning_p) | set(graph.decisions))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cause", "effect", "detection_p", "pruning_p", "decision"])
        for pair in pairs:
            det = graph.detection_p.get(pair)
            pru = graph.pruning_p.get(pair)
            decision = graph.decisions.get(pair)
            if decision is None:
                decision = "kept" if pair in graph.edges else "not a candidate"
            writer.writerow(
                [
                    pair[0],
                    pair[1],
                    "" if det is None else f"{det:.6g}",
                    "" if pru is None else f"{pru:.6g}",
                    decision,
                ]
            )


def _cmd_generate(args: argparse.Namespace) -> int:
    dag = random_weighted_dag(args.n, args.p, topology_rng(args.seed))
    if args.out is None:
        sys.stdout.write(edge_list_text(dag))
    else:
        write_edge_list(dag, args.out)
        print(f"wrote {len(dag.edges)} edges to {args.out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    topology_seed, init_seed = _parse_seed_pair(args.seed)
    alphas = tuple(sorted(args.alpha)) if args.alpha else DEFAULT_ALPHAS
    scenario = Scenario(
        n=args.n,
        edge_prob=args.p,
        noise=args.noise,
        budget=args.budget,
        algorithm=args.algo,
        p_crit=args.p_crit,
        alphas=alphas,
    )
    dag, world, rng = make_world(scenario, topology_seed, init_seed)
    truth = dag.adjacency()

    sink = None
    if args.dump_samples is not None:
        args.dump_samples.mkdir(parents=True, exist_ok=True)

        def sink(label, samples):
            write_samples_csv(samples, args.dump_samples / f"{label}.csv")

    if args.algo == "dodo":
        graph = run_dodo(
            world, args.budget, rng, p_crit=args.p_crit, sample_sink=sink
        )
        chosen = f"p_crit={args.p_crit:g}"
        flags = list(graph.flags)
        epochs = int(graph.info["epochs_used"])
    else:
        data = collect_samples(world, None, args.budget, rng)
        if sink is not None:
            sink("observational", data)
        best = None
        graph = None
        for alpha in alphas:
            candidate = run_pc(data, alpha)
            score = f1_score(confusion(truth, candidate.adjacency()))
            if best is None or score > best[0]:
                best = (score, alpha)
                graph = candidate
        chosen = f"alpha={best[1]:g}"
        flags = [chosen, *graph.flags]
        epochs = args.budget

    counts = confusion(truth, graph.adjacency())
    if not dag.edges:
        flags.append("empty_truth")
    print(
        f"n={args.n} p={args.p:g} noise={args.noise:g} budget={args.budget} "
        f"algo={args.algo} seeds={topology_seed},{init_seed} {chosen}"
    )
    print(
        f"f1={f1_score(counts):.6f} shd={shd(counts)} epochs={epochs} "
        f"flags={'|'.join(flags) if flags else '-'}"
    )

    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_edge_list(dag, args.out / "truth.edges")
        write_edge_list(graph, args.out / "inferred.edges")
        _write_diagnostics(graph, args.out / "diagnostics.csv")
        print(f"wrote truth.edges, inferred.edges, diagnostics.csv to {args.out}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(None if args.grid == "paper" else args.grid)
    if args.workers is not None:
        if args.workers < 1:
            raise ValueError(f"workers must be positive, got {args.workers}")
        config = dataclasses.replace(config, workers=args.workers)
    out_dir = args.out or Path(os.environ.get(OUT_DIR_ENV, "results"))

    total_scenarios = len(config.scenarios())
    runs_per_scenario = len(config.topology_seeds) * len(config.init_seeds)
    print(
        f"sweeping {total_scenarios} scenarios x {runs_per_scenario} runs "
        f"({total_scenarios * runs_per_scenario} total) with {config.workers} worker(s)",
        file=sys.stderr,
    )

    step = max(1, total_scenarios * runs_per_scenario // 100)

    def progress(done: int, total: int) -> None:
        if done % step == 0 or done == total:
            print(f"  {done}/{total} runs", file=sys.stderr)

    records, rows = run_grid(config, progress=progress)
    write_results(rows, records, out_dir)
    print(f"wrote {len(records)} runs and {len(rows)} aggregate rows to {out_dir}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    truth = read_adjacency(args.truth)
    predicted = read_adjacency(args.predicted)
    counts = confusion(truth, predicted)
    print(f"f1={f1_score(counts):.6f} shd={shd(counts)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "eval": _cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, InfeasibleBudgetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
