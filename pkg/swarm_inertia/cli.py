"""
CLI Module
Command-line entry point: run, trace, bench-suite and verify
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

from swarm_inertia.config import BUNDLED_TABLES, bundled_table_path, load_experiment_config
from swarm_inertia.exceptions import SwarmError
from swarm_inertia.harness import run_batch, trace_trial
from swarm_inertia.verify import run_verify

logger = logging.getLogger("swarm_inertia")


def init_logging(verbose: bool) -> logging.Logger:
    """Configure the 'swarm_inertia' logger with a single stdout handler."""
    level = logging.DEBUG if verbose else logging.INFO
    logger.setLevel(level)
    logger.propagate = False
    for h in list(logger.handlers):
        logger.removeHandler(h)
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter("[%(asctime)s] [%(levelname)s] %(message)s", "%H:%M:%S"))
    handler.setLevel(level)
    logger.addHandler(handler)
    return logger


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", default=None, help="YAML experiment config.")
    common.add_argument("--seed", type=int, default=None, help="Master seed (overrides the config).")
    common.add_argument("-t", "--threads", type=int, default=None, help="Worker processes for trials.")
    common.add_argument("-o", "--out", default=None, help="Output directory.")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override a config entry, e.g. --set swarm.h=0.25 (repeatable).",
    )
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="swarm_inertia",
        description="Swarm-based inertial optimizers: Monte-Carlo success-rate experiments and invariant checks.",
    )
    verbs = parser.add_subparsers(dest="verb", required=True)

    verbs.add_parser("run", parents=[common], help="Run every (d, method, N) cell of a config.")

    trace = verbs.add_parser("trace", parents=[common], help="Run one trial and write its full trace.")
    trace.add_argument("--dim", type=int, default=None, help="Dimension (default: first configured).")
    trace.add_argument("--method", default=None, help="Method label (default: first configured).")
    trace.add_argument("-N", "--agents", type=int, default=None, help="Swarm size (default: first configured).")
    trace.add_argument("--trial", type=int, default=0, help="Trial index used for seed splitting (default: 0).")
    trace.add_argument("--trial-seed", type=int, default=None, help="Replay a recorded trial seed directly.")

    bench = verbs.add_parser("bench-suite", parents=[common], help="Reproduce a bundled table.")
    bench.add_argument("--table", required=True, choices=BUNDLED_TABLES)
    bench.add_argument("-r", "--runs", type=int, default=None, help="Trials per cell (default: from the table).")
    bench.add_argument("--max-dim", type=int, default=None, help="Drop dimensions above this value.")

    verify = verbs.add_parser("verify", parents=[common], help="Run the invariant suite.")
    verify.add_argument("--quick", action="store_true", help="Smaller trajectory counts.")
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config, args.overrides, args.seed, args.threads, args.out)
    run_batch(cfg)
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config, args.overrides, args.seed, args.threads, args.out)
    record, result = trace_trial(
        cfg, dim=args.dim, label=args.method, n_agents=args.agents, trial=args.trial, seed=args.trial_seed
    )
    logger.info(
        "Trial seed %d: best F %.10g at %s after %d iteration(s) (+%d fallback), %d event(s), success=%s",
        record.seed, record.final_f, list(record.final_x), record.iterations,
        record.inner_iterations, len(result.events), record.success,
    )
    return 0


def cmd_bench_suite(args: argparse.Namespace) -> int:
    overrides = list(args.overrides)
    if args.runs is not None:
        overrides.append(f"runs={args.runs}")
    cfg = load_experiment_config(
        bundled_table_path(args.table),
        overrides,
        args.seed,
        args.threads,
        args.out or os.path.join("results", args.table),
    )
    if args.max_dim is not None:
        cfg.dims = [d for d in cfg.dims if d <= args.max_dim]
        if not cfg.dims:
            logger.error("No dimension of table '%s' is <= %d", args.table, args.max_dim)
            return 2
    run_batch(cfg)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_verify(seed=args.seed or 0, quick=args.quick)
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error("Invariant checks failed: %s", ", ".join(failed))
        return 1
    logger.info("Successfully passed %d invariant check(s)", len(results))
    return 0


COMMANDS = {
    "run": cmd_run,
    "trace": cmd_trace,
    "bench-suite": cmd_bench_suite,
    "verify": cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    init_logging(args.verbose)
    try:
        return COMMANDS[args.verb](args)
    except SwarmError as exc:
        logger.error("Fatal: %s", exc)
        return 2
