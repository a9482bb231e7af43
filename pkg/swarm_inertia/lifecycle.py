"""
Lifecycle Module
Swarm management around the scheme steps: merging, removal, single-agent fallback
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from swarm_inertia.diagnostics import EnergyLedger, check_dissipation, record_trace
from swarm_inertia.exceptions import DivergenceError
from swarm_inertia.objectives import Objective
from swarm_inertia.schemes import SchemeKind, step
from swarm_inertia.swarm_state import AgentState, SwarmConfig, SwarmState, UnderweightAction

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    MERGE = "merge"
    REMOVE = "remove"
    RELOCATE = "relocate"
    FALLBACK_ENTERED = "fallback_entered"
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class LifecycleEvent:
    kind: EventKind
    iteration: int
    agents_involved: Tuple[int, ...]
    detail: float


@dataclass
class DescentResult:
    agent: AgentState
    converged: bool
    iterations: int
    diverged: bool = False


@dataclass
class RunResult:
    """Outcome of one trial: best surviving agent plus the event log."""

    best_x: np.ndarray
    best_f: float
    iterations: int
    inner_iterations: int
    converged: bool
    diverged: bool
    n_agents: int
    events: List[LifecycleEvent] = field(default_factory=list)
    final_state: Optional[SwarmState] = None


def merge_agents(state: SwarmState, tol_merge: float, obj: Objective) -> Tuple[SwarmState, List[LifecycleEvent]]:
    """
    Fuse agents closer than tol_merge

    Pairs are scanned in (i, j), i < j order; the first qualifying pair is
    replaced by one agent at the midpoint with the mean velocity and summed
    mass, and the scan restarts until no pair qualifies.

    Args:
        state: Current swarm
        tol_merge: Euclidean distance threshold
        obj: Objective used to refresh F at merged positions

    Returns:
        (new state, merge events)
    """
    x, v, m, w, ids = state.x.copy(), state.v.copy(), state.m.copy(), state.w.copy(), state.ids.copy()
    touched = np.zeros(len(m), dtype=bool)
    events = []
    while len(m) > 1:
        distances = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
        close = np.argwhere(np.triu(distances <= tol_merge, k=1))
        if close.size == 0:
            break
        i, j = (int(k) for k in close[0])
        events.append(LifecycleEvent(EventKind.MERGE, state.iteration, (int(ids[i]), int(ids[j])), float(distances[i, j])))
        x[i] = 0.5 * (x[i] + x[j])
        v[i] = 0.5 * (v[i] + v[j])
        m[i] = m[i] + m[j]
        w[i] = 0.5 * (w[i] + w[j])
        touched[i] = True
        keep = np.arange(len(m)) != j
        x, v, m, w, ids, touched = x[keep], v[keep], m[keep], w[keep], ids[keep], touched[keep]

    if not events:
        return state, events
    f = state.f[np.isin(state.ids, ids)].copy()
    if np.any(touched):
        f[touched] = obj.value(x[touched])
    return state.evolve(x=x, v=v, m=m, f=f, w=w, ids=ids), events


def _underweight(state: SwarmState, tol_m: float) -> np.ndarray:
    under = state.m < tol_m / state.n_agents
    under[state.best_index] = False
    return under


def remove_underweight(
    state: SwarmState, tol_m: float, conserve_mass: bool = True
) -> Tuple[SwarmState, List[LifecycleEvent]]:
    """
    Drop agents lighter than tol_m / N

    The best agent is never removed, so at least one agent survives. Under
    mass conservation the removed mass goes to the best agent.

    Args:
        state: Current swarm
        tol_m: Relative mass tolerance
        conserve_mass: Reassign removed mass to the best agent

    Returns:
        (new state, removal events)
    """
    if state.n_agents < 2:
        return state, []
    under = _underweight(state, tol_m)
    if not np.any(under):
        return state, []

    events = [
        LifecycleEvent(EventKind.REMOVE, state.iteration, (int(state.ids[i]),), float(state.m[i]))
        for i in np.flatnonzero(under)
    ]
    masses = state.m.copy()
    if conserve_mass:
        masses[state.best_index] += np.sum(masses[under])
    keep = ~under
    new_state = state.evolve(
        x=state.x[keep], v=state.v[keep], m=masses[keep], f=state.f[keep], w=state.w[keep], ids=state.ids[keep]
    )
    return new_state, events


def relocate_underweight(
    state: SwarmState, tol_m: float, obj: Objective, lower: Sequence[float], upper: Sequence[float]
) -> Tuple[SwarmState, List[LifecycleEvent]]:
    """Redraw underweight agents uniformly in [lower, upper], keeping velocity and mass."""
    if state.n_agents < 2:
        return state, []
    under = _underweight(state, tol_m)
    if not np.any(under):
        return state, []

    x = state.x.copy()
    f = state.f.copy()
    x[under] = state.rng.uniform(lower, upper, size=(int(np.sum(under)), state.dim))
    f[under] = obj.value(x[under])
    events = [
        LifecycleEvent(EventKind.RELOCATE, state.iteration, (int(state.ids[i]),), float(state.m[i]))
        for i in np.flatnonzero(under)
    ]
    return state.evolve(x=x, f=f), events


def single_agent_descent(
    agent: AgentState, obj: Objective, h: float, tol_res: float, max_inner: int = 100_000
) -> DescentResult:
    """
    Plain gradient descent for a lone agent

    Runs x <- x - h grad F(x) until a step moves less than tol_res. When
    max_inner is reached first the best position seen is returned with
    converged = False.

    Args:
        agent: Starting agent
        obj: Objective
        h: Step size
        tol_res: Displacement tolerance
        max_inner: Iteration cap

    Returns:
        DescentResult whose agent has zero velocity and unit mass
    """
    x = np.asarray(agent.x, dtype=float).copy()
    best_x, best_f = x.copy(), float(obj.value(x))
    for k in range(1, max_inner + 1):
        x_new = x - h * obj.gradient(x)
        displacement = float(np.linalg.norm(x_new - x))
        x = x_new
        if not np.all(np.isfinite(x)):
            return DescentResult(AgentState(best_x, np.zeros_like(best_x), 1.0, best_f), False, k, diverged=True)
        f = float(obj.value(x))
        if f < best_f:
            best_x, best_f = x.copy(), f
        if displacement < tol_res:
            return DescentResult(AgentState(x, np.zeros_like(x), 1.0, f), True, k)
    logger.warning("Single-agent descent stopped after %d iterations without converging", max_inner)
    return DescentResult(AgentState(best_x, np.zeros_like(best_x), 1.0, best_f), False, max_inner)


def _descend_lone_agent(
    state: SwarmState, cfg: SwarmConfig, obj: Objective, fallback_h: float, events: List[LifecycleEvent]
) -> Tuple[SwarmState, DescentResult]:
    agent_id = (int(state.ids[0]),)
    events.append(LifecycleEvent(EventKind.FALLBACK_ENTERED, state.iteration, agent_id, fallback_h))
    descent = single_agent_descent(state.agent(0), obj, fallback_h, cfg.tol_res, cfg.max_inner)
    survivor = descent.agent
    state = state.evolve(x=survivor.x[None, :], v=survivor.v[None, :], m=[survivor.m], f=[survivor.f_cached])
    if descent.diverged:
        events.append(LifecycleEvent(EventKind.DIVERGED, state.iteration, agent_id, np.nan))
    elif descent.converged:
        events.append(LifecycleEvent(EventKind.CONVERGED, state.iteration, agent_id, survivor.f_cached))
    return state, descent


def run(
    state: SwarmState,
    cfg: SwarmConfig,
    obj: Objective,
    scheme,
    ledger: Optional[EnergyLedger] = None,
    position_box: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> RunResult:
    """
    Outer loop: step, prune, merge; hand a lone agent to gradient descent

    The fallback is also entered when the last lifecycle pass of the final
    outer iteration leaves a single agent.

    Args:
        state: Initial swarm
        cfg: Scheme and lifecycle parameters
        obj: Objective
        scheme: SchemeKind to step with
        ledger: Optional ledger receiving every iteration and dissipation audit
        position_box: Box used by underweight_action = relocate

    Returns:
        RunResult describing the best surviving agent
    """
    kind = SchemeKind(scheme)
    events: List[LifecycleEvent] = []
    inner = 0
    converged = diverged = False
    lipschitz = cfg.lipschitz_value
    fallback_h = min(cfg.h, 1.0 / lipschitz) if lipschitz > 0 else cfg.h
    if kind == SchemeKind.SBI_IMEX and cfg.h > cfg.imex_step_bound(state.w):
        logger.debug("h=%g exceeds the IMEX dissipation bound %g", cfg.h, cfg.imex_step_bound(state.w))
    if ledger is not None:
        record_trace(state, None, ledger)

    def lone() -> bool:
        return cfg.lifecycle_enabled and state.n_agents == 1

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.max_iter):
            if lone():
                break
            try:
                outcome = step(state, cfg, obj, kind)
            except DivergenceError as e:
                diverged = True
                events.append(LifecycleEvent(EventKind.DIVERGED, e.iteration, e.agent_ids, np.nan))
                logger.warning("Trial diverged at iteration %d (agents %s)", e.iteration, list(e.agent_ids))
                break
            state = outcome.new_state
            if ledger is not None:
                record_trace(state, outcome, ledger)
                check_dissipation(outcome, cfg, kind, ledger)

            if cfg.lifecycle_enabled:
                pass_events: List[LifecycleEvent] = []
                if cfg.underweight_action == UnderweightAction.RELOCATE and position_box is not None:
                    state, found = relocate_underweight(state, cfg.tol_m, obj, *position_box)
                else:
                    state, found = remove_underweight(state, cfg.tol_m, cfg.conserve_mass)
                pass_events.extend(found)
                state, found = merge_agents(state, cfg.tol_merge, obj)
                pass_events.extend(found)
                if pass_events:
                    events.extend(pass_events)
                    if ledger is not None:
                        ledger.retag(state)

        if not diverged and lone():
            state, descent = _descend_lone_agent(state, cfg, obj, fallback_h, events)
            inner = descent.iterations
            converged, diverged = descent.converged, descent.diverged
        elif not diverged:
            events.append(LifecycleEvent(EventKind.MAX_ITER, state.iteration, (), float(cfg.max_iter)))

    best = state.best_index
    return RunResult(
        best_x=state.x[best].copy(),
        best_f=float(state.f[best]),
        iterations=state.iteration,
        inner_iterations=inner,
        converged=converged,
        diverged=diverged,
        n_agents=state.n_agents,
        events=events,
        final_state=state,
    )
