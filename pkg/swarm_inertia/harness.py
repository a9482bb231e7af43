"""
Harness Module
Seeded swarm initialization, single trials and Monte-Carlo batches over (d, method, N) cells
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import re
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from swarm_inertia import __version__
from swarm_inertia.config import (
    BOX_KEYS,
    ExperimentConfig,
    MethodSpec,
    SuccessCriterion,
    SuccessMode,
    experiment_config_to_dict,
    resolve_box,
)
from swarm_inertia.diagnostics import EnergyLedger, write_trace
from swarm_inertia.exceptions import ConfigurationError, SingularUpdateError
from swarm_inertia.lifecycle import RunResult, run
from swarm_inertia.objectives import LipschitzEstimate, Objective, estimate_lipschitz, get_objective, inflate_box
from swarm_inertia.report import CellSummary, ExperimentReport, TrialRecord, emit_report
from swarm_inertia.schemes import SchemeKind
from swarm_inertia.swarm_state import SwarmConfig, SwarmState

logger = logging.getLogger(__name__)

WILSON_Z = 1.96
Box = Tuple[np.ndarray, np.ndarray]


def trial_seed(master_seed: int, dim: int, n_agents: int, label: str, trial: int) -> int:
    """
    Seed of one trial, split from the master seed

    SeedSequence([master, d, N, crc32(label), trial]) yields one uint64 state
    word; the trial generator is default_rng(that word), so any trial can be
    replayed from the integer stored in its record.
    """
    entropy = [int(master_seed), int(dim), int(n_agents), zlib.crc32(label.encode("utf-8")), int(trial)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion; (0, 1) when there are no trials."""
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    z2 = z * z
    denominator = 1.0 + z2 / trials
    centre = (p + z2 / (2.0 * trials)) / denominator
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denominator
    return max(0.0, centre - half), min(1.0, centre + half)


def default_success(obj: Objective) -> SuccessCriterion:
    if obj.known_min is None or obj.default_success_tol is None:
        raise ConfigurationError(f"Objective '{obj.name}' has no known minimum; set success.mode and success.tol")
    return SuccessCriterion(SuccessMode.F_GAP, obj.default_success_tol)


def classify_success(final_x, obj: Objective, crit: SuccessCriterion) -> bool:
    """
    Decide whether a trial found the global minimum

    Args:
        final_x: Reported minimizer
        obj: Objective with a known minimum
        crit: f_gap compares F(final_x) - F*, x_distance the sup-norm distance to x*

    Returns:
        True when the gap is below crit.tol
    """
    if obj.known_min is None:
        raise ConfigurationError(f"Objective '{obj.name}' has no known minimum to classify against")
    x_star, f_star = obj.known_min
    x = np.asarray(final_x, dtype=float)
    if not np.all(np.isfinite(x)):
        return False
    if crit.mode == SuccessMode.F_GAP:
        return bool(float(obj.value(x)) - f_star < crit.tol)
    return bool(np.max(np.abs(x - x_star)) < crit.tol)


def method_parameters(cfg: ExperimentConfig, method: MethodSpec) -> Dict:
    params = dict(cfg.swarm)
    params.update({k: v for k, v in method.overrides.items() if k not in BOX_KEYS})
    return params


def resolve_lipschitz(cfg: ExperimentConfig, obj: Objective, dim: int) -> LipschitzEstimate:
    """
    L for one dimension of an experiment

    A configured `lipschitz.value` is used as-is; otherwise the Hessian is
    sampled over `lipschitz.box` when set, else over the position box
    inflated by `lipschitz.inflate` (default 2).
    """
    settings = cfg.lipschitz
    if settings.get("value") is not None:
        return estimate_lipschitz(obj, user_value=float(settings["value"]))
    if settings.get("box") is not None:
        domain = resolve_box(settings["box"], dim, "lipschitz.box")
    else:
        domain = inflate_box(*cfg.box_for("position_box", dim), factor=float(settings.get("inflate", 2.0)))
    return estimate_lipschitz(
        obj,
        samples=int(settings.get("samples", 1000)),
        seed=int(settings.get("seed", 0)),
        domain=domain,
        safety_factor=float(settings.get("safety_factor", 1.5)),
    )


def build_swarm_config(cfg: ExperimentConfig, method: MethodSpec, lipschitz: LipschitzEstimate) -> SwarmConfig:
    params = method_parameters(cfg, method)
    if params.get("kappa") == "auto":
        params["kappa"] = lipschitz.value
    try:
        return SwarmConfig(lipschitz=lipschitz, **params)
    except TypeError as e:
        raise ConfigurationError(f"invalid swarm parameters for method '{method.label}': {e}") from e


def _json_ready(data):
    return json.loads(json.dumps(data, sort_keys=True))


def swarm_parameters(swarm_cfg: SwarmConfig) -> Dict:
    """SwarmConfig as plain JSON data, recorded with every cell."""
    return _json_ready(dataclasses.asdict(swarm_cfg))


def draw_swarm(
    n_agents: int,
    seed: int,
    position_box: Box,
    velocity_box: Box,
    obj: Objective,
    weights,
) -> SwarmState:
    """Uniform positions and velocities from default_rng(seed); masses 1/N."""
    rng = np.random.default_rng(seed)
    lower, upper = position_box
    dim = len(lower)
    x = rng.uniform(lower, upper, size=(n_agents, dim))
    v = rng.uniform(velocity_box[0], velocity_box[1], size=(n_agents, dim))
    return SwarmState(
        x=x,
        v=v,
        m=np.full(n_agents, 1.0 / n_agents),
        f=obj.value(x),
        w=weights,
        ids=np.arange(n_agents),
        rng=rng,
    )


def initialize_swarm(
    cfg: ExperimentConfig,
    n_agents: int,
    trial_seed: int,
    dim: Optional[int] = None,
    method: Optional[MethodSpec] = None,
) -> SwarmState:
    """
    Initial swarm of one trial

    Args:
        cfg: Experiment config providing the boxes and weights
        n_agents: Swarm size N
        trial_seed: Integer from trial_seed()
        dim: Dimension (defaults to the first configured one)
        method: Method whose box or weight overrides apply (defaults to the first)

    Returns:
        SwarmState with x ~ U(position box), v ~ U(velocity box), m = 1/N
    """
    dim = int(cfg.dims[0] if dim is None else dim)
    method = cfg.methods[0] if method is None else method
    obj = get_objective(cfg.objective, dim)
    weights = SwarmConfig(w=method_parameters(cfg, method).get("w", SwarmConfig.w)).weights(n_agents)
    return draw_swarm(
        n_agents,
        trial_seed,
        cfg.box_for("position_box", dim, method),
        cfg.box_for("velocity_box", dim, method),
        obj,
        weights,
    )


@dataclass(frozen=True)
class TrialTask:
    """Everything one worker needs to run a trial; picklable."""

    objective: str
    dim: int
    method: str
    scheme: SchemeKind
    n_agents: int
    trial: int
    seed: int
    swarm: SwarmConfig
    position_box: Box
    velocity_box: Box
    success: SuccessCriterion
    trace_dir: Optional[str] = None

    @property
    def stem(self) -> str:
        label = re.sub(r"[^A-Za-z0-9]+", "-", self.method).strip("-").lower()
        return f"d{self.dim}_{label}_N{self.n_agents}_t{self.trial}"


def execute_trial(task: TrialTask) -> Tuple[TrialRecord, RunResult]:
    start = time.perf_counter()
    obj = get_objective(task.objective, task.dim)
    state = draw_swarm(
        task.n_agents, task.seed, task.position_box, task.velocity_box, obj, task.swarm.weights(task.n_agents)
    )
    ledger = EnergyLedger(dim=task.dim, epsilon=task.swarm.epsilon) if task.trace_dir else None
    try:
        result = run(state, task.swarm, obj, task.scheme, ledger=ledger, position_box=task.position_box)
    except SingularUpdateError as e:
        logger.warning("Trial %s failed: %s", task.stem, e)
        best = state.best_index
        result = RunResult(state.x[best].copy(), float(state.f[best]), 0, 0, False, True, state.n_agents)
    if ledger is not None:
        write_trace(ledger, result.events, task.trace_dir, task.stem)

    success = not result.diverged and classify_success(result.best_x, obj, task.success)
    record = TrialRecord(
        dim=task.dim,
        method=task.method,
        n_agents=task.n_agents,
        trial=task.trial,
        seed=task.seed,
        final_x=tuple(float(v) for v in result.best_x),
        final_f=float(result.best_f),
        success=success,
        diverged=result.diverged,
        iterations=result.iterations,
        inner_iterations=result.inner_iterations,
        final_agents=result.n_agents,
        wall_time=time.perf_counter() - start,
    )
    return record, result


def run_trial(task: TrialTask) -> TrialRecord:
    return execute_trial(task)[0]


@dataclass(frozen=True)
class _Cell:
    dim: int
    method: MethodSpec
    n_agents: int
    swarm: SwarmConfig


def make_task(
    cfg: ExperimentConfig,
    cell: _Cell,
    trial: int,
    success: SuccessCriterion,
    trace_dir: Optional[str] = None,
    seed: Optional[int] = None,
) -> TrialTask:
    return TrialTask(
        objective=cfg.objective,
        dim=cell.dim,
        method=cell.method.label,
        scheme=cell.method.scheme,
        n_agents=cell.n_agents,
        trial=trial,
        seed=trial_seed(cfg.seed, cell.dim, cell.n_agents, cell.method.label, trial) if seed is None else seed,
        swarm=cell.swarm,
        position_box=cfg.box_for("position_box", cell.dim, cell.method),
        velocity_box=cfg.box_for("velocity_box", cell.dim, cell.method),
        success=success,
        trace_dir=trace_dir,
    )


def _log_step_bound(cell: _Cell) -> None:
    if cell.method.scheme != SchemeKind.SBI_IMEX:
        return
    bound = cell.swarm.imex_step_bound(cell.swarm.weights(cell.n_agents))
    if cell.swarm.h > bound:
        logger.warning(
            "d=%d %s N=%d: h=%g exceeds the IMEX dissipation bound %.6g",
            cell.dim, cell.method.label, cell.n_agents, cell.swarm.h, bound,
        )
    else:
        logger.info("d=%d %s N=%d: h=%g within the IMEX bound %.6g", cell.dim, cell.method.label, cell.n_agents, cell.swarm.h, bound)


def plan_cells(cfg: ExperimentConfig) -> Tuple[List[_Cell], Dict[int, LipschitzEstimate], Dict[int, SuccessCriterion]]:
    """Cells in (d, method, N) order with the per-dimension L and success criterion."""
    cells, lipschitz, success = [], {}, {}
    for dim in (int(d) for d in cfg.dims):
        obj = get_objective(cfg.objective, dim)
        lipschitz[dim] = resolve_lipschitz(cfg, obj, dim)
        success[dim] = cfg.success if cfg.success is not None else default_success(obj)
        logger.info("%s d=%d: L estimate %.6g", cfg.objective, dim, lipschitz[dim].value)
        for method in cfg.methods:
            swarm_cfg = build_swarm_config(cfg, method, lipschitz[dim])
            for n in (int(n) for n in cfg.swarm_sizes):
                cell = _Cell(dim, method, n, swarm_cfg)
                _log_step_bound(cell)
                cells.append(cell)
    return cells, lipschitz, success


def _execute(tasks: List[TrialTask], threads: int) -> List[TrialRecord]:
    if threads <= 1 or len(tasks) <= 1:
        return [run_trial(task) for task in tasks]
    chunksize = max(1, len(tasks) // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_trial, tasks, chunksize=chunksize))


def summarize_cell(cell: _Cell, records: List[TrialRecord]) -> CellSummary:
    successes = sum(1 for r in records if r.success)
    trials = len(records)
    low, high = wilson_interval(successes, trials)
    return CellSummary(
        dim=cell.dim,
        method=cell.method.label,
        scheme=cell.method.scheme.value,
        n_agents=cell.n_agents,
        successes=successes,
        trials=trials,
        rate=successes / trials,
        ci_low=low,
        ci_high=high,
        mean_iterations=float(np.mean([r.iterations for r in records])),
        parameters=swarm_parameters(cell.swarm),
        mean_wall_time=float(np.mean([r.wall_time for r in records])),
    )


def report_header(
    cfg: ExperimentConfig, lipschitz: Dict[int, LipschitzEstimate], success: Dict[int, SuccessCriterion]
) -> Dict:
    return _json_ready(
        {
            "version": __version__,
            "config": experiment_config_to_dict(cfg),
            "lipschitz": {str(d): est.value for d, est in lipschitz.items()},
            "success": {str(d): {"mode": crit.mode.value, "tol": crit.tol} for d, crit in success.items()},
        }
    )


def run_batch(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """
    Run every (d, method, N) cell of an experiment

    Trials are independent and seeded from (master seed, d, N, method label,
    trial index), and results are collected in task order, so the report does
    not depend on `cfg.threads`. A diverged trial counts as a failure.

    Args:
        cfg: Experiment config
        write: Write report files to cfg.out_dir

    Returns:
        ExperimentReport
    """
    cells, lipschitz, success = plan_cells(cfg)
    tasks = []
    for cell in cells:
        for trial in range(cfg.runs):
            trace_dir = cfg.out_dir if cfg.trace and trial == 0 else None
            tasks.append(make_task(cfg, cell, trial, success[cell.dim], trace_dir))

    logger.info("Running %d trial(s) over %d cell(s) with %d worker(s)", len(tasks), len(cells), cfg.threads)
    start = time.perf_counter()
    records = _execute(tasks, cfg.threads)
    logger.info("Finished %d trial(s) in %.2fs", len(records), time.perf_counter() - start)

    summaries = [
        summarize_cell(cell, records[k * cfg.runs : (k + 1) * cfg.runs]) for k, cell in enumerate(cells)
    ]
    for summary in summaries:
        logger.info(
            "d=%d %-28s N=%-4d success %5.1f%% [%.1f, %.1f]",
            summary.dim, summary.method, summary.n_agents,
            100 * summary.rate, 100 * summary.ci_low, 100 * summary.ci_high,
        )
    report = ExperimentReport(header=report_header(cfg, lipschitz, success), cells=summaries, records=records)
    if write:
        emit_report(report, cfg.out_dir)
    return report


def find_cell(cfg: ExperimentConfig, dim: int, label: str, n_agents: int) -> Tuple[_Cell, SuccessCriterion]:
    methods = [m for m in cfg.methods if m.label == label]
    if not methods:
        raise ConfigurationError(f"unknown method '{label}'; configured: {[m.label for m in cfg.methods]}")
    obj = get_objective(cfg.objective, dim)
    lipschitz = resolve_lipschitz(cfg, obj, dim)
    success = cfg.success if cfg.success is not None else default_success(obj)
    cell = _Cell(dim, methods[0], n_agents, build_swarm_config(cfg, methods[0], lipschitz))
    _log_step_bound(cell)
    return cell, success


def trace_trial(
    cfg: ExperimentConfig,
    dim: Optional[int] = None,
    label: Optional[str] = None,
    n_agents: Optional[int] = None,
    trial: int = 0,
    seed: Optional[int] = None,
    trace_dir: Optional[str] = None,
) -> Tuple[TrialRecord, RunResult]:
    """
    Run one trial with a full trace

    The trial seed is derived exactly as in run_batch unless `seed` is given,
    so a recorded trial can be replayed from its report entry.
    """
    dim = int(cfg.dims[0] if dim is None else dim)
    label = cfg.methods[0].label if label is None else label
    n_agents = int(cfg.swarm_sizes[0] if n_agents is None else n_agents)
    cell, success = find_cell(cfg, dim, label, n_agents)
    task = make_task(cfg, cell, trial, success, trace_dir or cfg.out_dir, seed)
    return execute_trial(task)


def replay_records(cfg: ExperimentConfig, records: Iterable[TrialRecord]) -> List[TrialRecord]:
    """Rerun recorded trials from their stored seeds."""
    replayed = []
    for record in records:
        cell, success = find_cell(cfg, record.dim, record.method, record.n_agents)
        replayed.append(run_trial(make_task(cfg, cell, record.trial, success, seed=record.seed)))
    return replayed
