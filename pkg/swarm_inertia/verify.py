"""
Verify Module
Seeded invariant checks: gradients, known minima, mass bounds, dissipation, closed form vs oracle
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from swarm_inertia.diagnostics import check_dissipation
from swarm_inertia.exceptions import DivergenceError
from swarm_inertia.objectives import Objective, estimate_lipschitz, get_objective
from swarm_inertia.schemes import SchemeKind, solve_simex_oracle, step_imex, step_simex
from swarm_inertia.swarm_state import SwarmConfig, SwarmState, update_masses

logger = logging.getLogger(__name__)

GRADIENT_TOL = 1e-6
FD_STEP = 1e-6
MASS_TOL = 1e-12
DISSIPATION_SLACK = 1e-9
ORACLE_TOL = 1e-10
REDUCTION_TOL = 1e-14
BENCHMARK_DIMS = (("rastrigin", 2), ("rastrigin", 5), ("rosenbrock", 2), ("rosenbrock", 6),
                  ("styblinski_tang", 3), ("exp_sin_1d", 1), ("oscillatory_1d", 1))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def finite_difference_gradient(obj: Objective, points: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    grad = np.empty_like(points)
    for j in range(obj.dim):
        forward = points.copy()
        backward = points.copy()
        forward[:, j] += step
        backward[:, j] -= step
        grad[:, j] = (obj.value(forward) - obj.value(backward)) / (2.0 * step)
    return grad


def gradient_error(obj: Objective, points: np.ndarray) -> np.ndarray:
    """Relative error |fd - g| / max(|g|, 1) of the analytic gradient at each point."""
    analytic = obj.gradient(points)
    numeric = finite_difference_gradient(obj, points)
    scale = np.maximum(np.linalg.norm(analytic, axis=1), 1.0)
    return np.linalg.norm(numeric - analytic, axis=1) / scale


def quadratic_objective(dim: int, rng: np.random.Generator) -> Objective:
    """F(x) = 1/2 sum a_j x_j^2 with a_j in [0.5, 5]; L = max a_j exactly."""
    a = rng.uniform(0.5, 5.0, size=dim)
    return Objective(
        name="quadratic",
        dim=dim,
        func=lambda x: 0.5 * np.sum(a * x * x, axis=-1),
        grad_func=lambda x: a * x,
        lower=np.full(dim, -5.0),
        upper=np.full(dim, 5.0),
        known_min=(np.zeros(dim), 0.0),
        default_success_tol=0.5,
    )


def random_swarm(
    obj: Objective, rng: np.random.Generator, n_agents: int, w: float = 1e-4, speed: float = 4.0
) -> SwarmState:
    x = rng.uniform(obj.lower, obj.upper, size=(n_agents, obj.dim))
    v = rng.uniform(-speed, speed, size=(n_agents, obj.dim))
    return SwarmState(
        x=x,
        v=v,
        m=np.full(n_agents, 1.0 / n_agents),
        f=obj.value(x),
        w=np.full(n_agents, w),
        ids=np.arange(n_agents),
        rng=rng,
    )


def check_gradients(rng: np.random.Generator, points: int = 100) -> CheckResult:
    worst = []
    for name, dim in BENCHMARK_DIMS:
        obj = get_objective(name, dim)
        sample = rng.uniform(obj.lower, obj.upper, size=(points, dim))
        worst.append((float(np.max(gradient_error(obj, sample))), f"{name}(d={dim})"))
    error, where = max(worst)
    return CheckResult("gradients", error < GRADIENT_TOL, f"max relative error {error:.3e} on {where}")


def check_known_minima(rng: np.random.Generator, points: int = 2000) -> CheckResult:
    failures = []
    for name, dim in BENCHMARK_DIMS:
        obj = get_objective(name, dim)
        x_star, f_star = obj.known_min
        stationary = float(np.linalg.norm(obj.gradient(x_star)))
        sample = rng.uniform(obj.lower, obj.upper, size=(points, dim))
        if stationary > 1e-6 or np.min(obj.value(sample)) < f_star:
            failures.append(f"{name}(d={dim}) |grad|={stationary:.2e}")
    return CheckResult("known_minima", not failures, "; ".join(failures) or "all minima stationary and lowest")


def check_mass_bounds(rng: np.random.Generator, swarms: int = 500, steps: int = 1000) -> CheckResult:
    worst_total = 0.0
    out_of_range = 0
    for _ in range(swarms):
        n = int(rng.integers(2, 51))
        cfg = SwarmConfig(h=float(rng.uniform(0.05, 1.0)), p=float(rng.choice([1.0, 2.0])))
        state = SwarmState(
            x=np.zeros((n, 1)), v=np.zeros((n, 1)), m=np.full(n, 1.0 / n),
            f=rng.normal(size=n), w=np.full(n, 1e-4), ids=np.arange(n), rng=rng,
        )
        for _ in range(steps):
            masses = update_masses(state, cfg).new_masses
            out_of_range += int(np.sum((masses < 0.0) | (masses > 1.0)))
            worst_total = max(worst_total, abs(float(np.sum(masses)) - 1.0))
            state = state.evolve(m=masses, f=rng.normal(size=n))
    passed = out_of_range == 0 and worst_total < MASS_TOL
    return CheckResult("mass_bounds", passed, f"{out_of_range} mass(es) outside [0,1], max |sum m - 1| {worst_total:.2e}")


def _dissipation_runs(
    scheme: SchemeKind,
    make_cfg: Callable[[Objective, float], List[SwarmConfig]],
    rng: np.random.Generator,
    trajectories: int,
    steps: int,
) -> Tuple[int, int, int]:
    """
    Step random swarms and count bound violations

    A trajectory that leaves the floating-point range is stopped and counted
    separately; the bound allows energy growth once an agent's mass is small
    enough, so losing agents of an IMEX swarm may run off without violating it.

    Returns:
        (violations, agent-steps checked, trajectories stopped on divergence)
    """
    violations = checked = stopped = 0
    stepper = step_imex if scheme == SchemeKind.SBI_IMEX else step_simex
    for k in range(trajectories):
        obj = quadratic_objective(int(rng.integers(1, 5)), rng) if k % 2 == 0 else get_objective("rastrigin", int(rng.integers(1, 4)))
        if obj.name == "quadratic":
            lipschitz = estimate_lipschitz(obj, user_value=float(np.max(obj.gradient(np.ones(obj.dim)))))
        else:
            lipschitz = estimate_lipschitz(obj, samples=200, seed=int(rng.integers(1 << 31)))
        for cfg in make_cfg(obj, lipschitz.value):
            cfg = cfg.replace(lipschitz=lipschitz)
            state = random_swarm(obj, rng, int(rng.integers(2, 11)))
            with np.errstate(over="ignore", invalid="ignore"):
                for _ in range(steps):
                    try:
                        outcome = stepper(state, cfg, obj)
                    except DivergenceError:
                        stopped += 1
                        break
                    violations += len(check_dissipation(outcome, cfg, scheme, slack=DISSIPATION_SLACK, kinds=("bound",)))
                    checked += state.n_agents
                    state = outcome.new_state
    return violations, checked, stopped


def _dissipation_result(name: str, counts: Tuple[int, int, int]) -> CheckResult:
    violations, checked, stopped = counts
    detail = f"{violations} violation(s) in {checked} agent-steps, {stopped} trajectory(ies) stopped on divergence"
    return CheckResult(name, violations == 0 and checked > 0, detail)


def check_imex_dissipation(rng: np.random.Generator, trajectories: int = 100, steps: int = 200) -> CheckResult:
    def configs(obj: Objective, lip: float) -> List[SwarmConfig]:
        h = 0.9 * min(2.0 * 1.0 / (1e-4 * lip), 1.0)
        return [SwarmConfig(h=h, R=1.0, w=1e-4)]

    return _dissipation_result("imex_dissipation", _dissipation_runs(SchemeKind.SBI_IMEX, configs, rng, trajectories, steps))


def check_simex_dissipation(rng: np.random.Generator, trajectories: int = 100, steps: int = 200) -> CheckResult:
    def configs(obj: Objective, lip: float) -> List[SwarmConfig]:
        return [SwarmConfig(h=h, kappa=1.1 * lip, w=1e-4) for h in (0.5, 1.0)]

    return _dissipation_result("simex_dissipation", _dissipation_runs(SchemeKind.SBI_SIMEX, configs, rng, trajectories, steps))


def check_closed_form(rng: np.random.Generator, cases: int = 1000) -> CheckResult:
    oracle_gap = reduction_gap = 0.0
    for _ in range(cases):
        name, dim = BENCHMARK_DIMS[int(rng.integers(len(BENCHMARK_DIMS)))]
        obj = get_objective(name, dim)
        state = random_swarm(obj, rng, int(rng.integers(1, 8)), w=float(rng.uniform(1e-5, 1e-3)))
        cfg = SwarmConfig(h=float(rng.uniform(0.05, 1.0)), kappa=float(rng.uniform(0.0, 50.0)), w=1e-4)
        closed = step_simex(state, cfg, obj).new_state
        oracle = solve_simex_oracle(state, cfg, obj).new_state
        scale = np.maximum(1.0, np.abs(oracle.v))
        oracle_gap = max(oracle_gap, float(np.max(np.abs(closed.v - oracle.v) / scale)),
                         float(np.max(np.abs(closed.x - oracle.x) / np.maximum(1.0, np.abs(oracle.x)))))
        flat = cfg.replace(kappa=0.0)
        reduction_gap = max(reduction_gap, float(np.max(np.abs(step_simex(state, flat, obj).new_state.x
                                                               - step_imex(state, flat, obj).new_state.x))))
    passed = oracle_gap < ORACLE_TOL and reduction_gap < REDUCTION_TOL
    return CheckResult("closed_form", passed, f"oracle gap {oracle_gap:.2e}, kappa=0 gap {reduction_gap:.2e}")


CHECKS = (
    check_gradients,
    check_known_minima,
    check_mass_bounds,
    check_imex_dissipation,
    check_simex_dissipation,
    check_closed_form,
)


def run_verify(seed: int = 0, quick: bool = False) -> List[CheckResult]:
    """
    Run every invariant check on seeded random instances

    Args:
        seed: Master seed; each check gets its own child generator
        quick: Shrink trajectory counts for a fast smoke run

    Returns:
        One CheckResult per check, in CHECKS order
    """
    children = np.random.SeedSequence(seed).spawn(len(CHECKS))
    results = []
    for check, child in zip(CHECKS, children):
        rng = np.random.default_rng(child)
        if quick and check in (check_imex_dissipation, check_simex_dissipation):
            result = check(rng, trajectories=10, steps=50)
        elif quick and check is check_mass_bounds:
            result = check(rng, swarms=10, steps=200)
        elif quick and check is check_closed_form:
            result = check(rng, cases=100)
        else:
            result = check(rng)
        log = logger.info if result.passed else logger.error
        log("[%s] %s: %s", "PASS" if result.passed else "FAIL", result.name, result.detail)
        results.append(result)
    return results
