"""Command-line entry point: ``hemtsim simulate | probcheck | scenarios list``."""

from __future__ import annotations

import argparse
import csv
import math
import sys

from .scenario import ScenarioError, list_scenarios, load_scenario, run_experiment, write_results
from .storage import StorageConfig, estimate_collisions_mc, prob_diff_block

PROBCHECK_COLUMNS = ("n", "r", "p1", "p2", "p1_hat", "p2_hat", "trials", "seed", "within_3se")


def probcheck(n: int, r: int, trials: int = 100_000, seed: int = 0) -> dict:
    """Closed-form collision probabilities next to Monte Carlo estimates."""
    if r < 1 or n < r:
        raise ValueError(f"need n >= r >= 1, got n={n}, r={r}")
    cfg = StorageConfig(n, r, 1.0, 1)
    exact = prob_diff_block(cfg)
    p1_hat, p2_hat = estimate_collisions_mc(cfg, trials, seed)
    ok = all(abs(hat - p) <= 3 * math.sqrt(p * (1 - p) / trials) + 1e-15
             for hat, p in ((p1_hat, exact.p1), (p2_hat, exact.p2)))
    return {"n": n, "r": r, "p1": exact.p1, "p2": exact.p2, "p1_hat": p1_hat,
            "p2_hat": p2_hat, "trials": trials, "seed": seed, "within_3se": ok}


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_experiment(scenario, seed=args.seed, reps=args.reps, with_tasks=args.tasks)
    for path in write_results(result, args.out):
        print(path)
    for row in result.summary:
        k = "" if row.k is None else f" k={row.k}"
        print(f"{row.strategy}{k}: {row.mean:.3f} s +/- {row.sd:.3f} (n={row.reps})",
              file=sys.stderr)
    return 0


def _cmd_probcheck(args) -> int:
    row = probcheck(args.n, args.r, args.trials, args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(PROBCHECK_COLUMNS)
    w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                for c in PROBCHECK_COLUMNS])
    if not row["within_3se"]:
        print("warning: Monte Carlo estimate outside 3 standard errors", file=sys.stderr)
    return 0


def _cmd_scenarios(args) -> int:
    for name in list_scenarios():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hemtsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario file or shipped scenario")
    sim.add_argument("scenario", help="path to a scenario YAML file, or a shipped name")
    sim.add_argument("--out", default=".", help="output directory for CSVs")
    sim.add_argument("--seed", type=int, default=None, help="override the base seed")
    sim.add_argument("--reps", type=int, default=None, help="override replications")
    sim.add_argument("--tasks", action="store_true", help="also write per-task records")
    sim.set_defaults(func=_cmd_simulate)

    pc = sub.add_parser("probcheck", help="datanode collision probabilities vs Monte Carlo")
    pc.add_argument("--n", type=int, required=True, help="number of datanodes")
    pc.add_argument("--r", type=int, required=True, help="replication factor")
    pc.add_argument("--trials", type=int, default=100_000)
    pc.add_argument("--seed", type=int, default=0)
    pc.set_defaults(func=_cmd_probcheck)

    sc = sub.add_parser("scenarios", help="shipped scenario library")
    sc_sub = sc.add_subparsers(dest="action", required=True)
    sc_sub.add_parser("list", help="list shipped scenario names").set_defaults(
        func=_cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"hemtsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
