"""
Schemes Module
One time step of SBI-IMEX, SBI-SIMEX, RSBI-SIMEX and the SBGD baseline
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from swarm_inertia.diagnostics import swarm_energy
from swarm_inertia.exceptions import DivergenceError, OracleError, SingularUpdateError, StepSizeError
from swarm_inertia.objectives import Objective
from swarm_inertia.swarm_state import SwarmConfig, SwarmState, compute_eta, update_masses

logger = logging.getLogger(__name__)

BACKTRACK_FLOOR = 1e-16


class SchemeKind(str, Enum):
    SBI_IMEX = "sbi_imex"
    SBI_SIMEX = "sbi_simex"
    RSBI_SIMEX = "rsbi_simex"
    SBGD = "sbgd"

    @property
    def is_energy_stable(self) -> bool:
        """Deterministic SBI schemes, the ones with a dissipation theorem."""
        return self in (SchemeKind.SBI_IMEX, SchemeKind.SBI_SIMEX)


@dataclass
class StepOutcome:
    """Result of one scheme step, with the energies on both sides of it."""

    old_state: SwarmState
    new_state: SwarmState
    energy_before: np.ndarray
    energy_after: np.ndarray
    accepted: np.ndarray
    lambda_: float
    warnings: List[str] = field(default_factory=list)


def _finish(old: SwarmState, new: SwarmState, cfg: SwarmConfig, lam: float, warnings=None) -> StepOutcome:
    with np.errstate(over="ignore", invalid="ignore"):
        energy_after = swarm_energy(new, cfg.epsilon)
    finite = (
        np.all(np.isfinite(new.x), axis=1)
        & np.all(np.isfinite(new.v), axis=1)
        & np.isfinite(new.f)
        & np.isfinite(energy_after)
    )
    if not np.all(finite):
        raise DivergenceError(new.ids[~finite], new.iteration)
    return StepOutcome(
        old_state=old,
        new_state=new,
        energy_before=swarm_energy(old, cfg.epsilon),
        energy_after=energy_after,
        accepted=np.ones(old.n_agents, dtype=bool),
        lambda_=lam,
        warnings=list(warnings or []),
    )


def _inertial_step(state: SwarmState, cfg: SwarmConfig, obj: Objective, kappa: float) -> StepOutcome:
    h = cfg.h
    update = update_masses(state, cfg)
    mu = state.m + cfg.epsilon
    grad = obj.gradient(state.x)

    bracket = 1.0 + h * cfg.R + (update.new_masses - state.m) / (2.0 * mu) + h * h * state.w * kappa / mu
    if np.any(bracket <= 0.0):
        bad = np.flatnonzero(bracket <= 0.0).tolist()
        raise SingularUpdateError(f"non-positive velocity bracket for agents {bad} at iteration {state.iteration}")

    v_new = (state.v - (h * state.w / mu)[:, None] * grad) / bracket[:, None]
    x_new = state.x + h * v_new
    new_state = state.evolve(
        x=x_new,
        v=v_new,
        m=update.new_masses,
        f=obj.value(x_new),
        iteration=state.iteration + 1,
    )
    return _finish(state, new_state, cfg, update.lambda_)


def step_imex(state: SwarmState, cfg: SwarmConfig, obj: Objective) -> StepOutcome:
    """
    SBI-IMEX step: masses explicitly, velocity implicitly in the friction and
    mass-change terms, position from the new velocity.
    """
    return _inertial_step(state, cfg, obj, 0.0)


def step_simex(state: SwarmState, cfg: SwarmConfig, obj: Objective) -> StepOutcome:
    """
    SBI-SIMEX step

    The stabilization term kappa*(x^{n+1} - x^n) is eliminated through
    x^{n+1} = x^n + h v^{n+1}, which adds h^2 w_i kappa / (m_i + eps) to the
    per-agent velocity bracket. kappa = 0 reproduces step_imex bit for bit.

    Args:
        state: Swarm at step n
        cfg: Scheme parameters; cfg.kappa is the stabilization constant
        obj: Objective providing F and its gradient

    Returns:
        StepOutcome for step n+1
    """
    return _inertial_step(state, cfg, obj, cfg.kappa)


def solve_simex_oracle(
    state: SwarmState,
    cfg: SwarmConfig,
    obj: Objective,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> StepOutcome:
    """
    Reference SBI-SIMEX step solved by relaxed fixed-point iteration on the
    coupled (x, v) system instead of the closed-form elimination.
    """
    h = cfg.h
    update = update_masses(state, cfg)
    mu = state.m + cfg.epsilon
    grad = obj.gradient(state.x)
    drag = h * cfg.R + (update.new_masses - state.m) / (2.0 * mu)
    pull = (h * state.w / mu)[:, None]

    def residual(x_new, v_new):
        rx = x_new - state.x - h * v_new
        rv = (v_new - state.v) + drag[:, None] * v_new + cfg.kappa * pull * (x_new - state.x) + pull * grad
        return np.maximum(np.max(np.abs(rx), axis=1), np.max(np.abs(rv), axis=1))

    scale = np.maximum(1.0, np.max(np.abs(np.hstack([state.v, pull * grad])), axis=1))
    v_new = state.v.copy()
    x_new = state.x + h * v_new
    theta = np.ones(state.n_agents)
    res = residual(x_new, v_new)
    for _ in range(max_iter):
        if np.all(res < tol * scale):
            break
        target = (state.v - pull * grad - cfg.kappa * pull * (x_new - state.x)) / (1.0 + drag)[:, None]
        cand_v = v_new + theta[:, None] * (target - v_new)
        cand_x = state.x + h * cand_v
        cand_res = residual(cand_x, cand_v)
        worse = cand_res > res
        theta[worse] *= 0.5
        keep = ~worse
        v_new[keep] = cand_v[keep]
        x_new[keep] = cand_x[keep]
        res[keep] = cand_res[keep]
    else:
        raise OracleError(f"fixed-point oracle did not converge in {max_iter} iterations (residual {res.max():.3e})")

    new_state = state.evolve(
        x=x_new,
        v=v_new,
        m=update.new_masses,
        f=obj.value(x_new),
        iteration=state.iteration + 1,
    )
    return _finish(state, new_state, cfg, update.lambda_)


def acceptance_probability(m, beta: float) -> np.ndarray:
    """P(m) = 1/2 - 1/2 tanh(1000 (m - beta))."""
    return 0.5 - 0.5 * np.tanh(1000.0 * (np.asarray(m, dtype=float) - beta))


def stochastic_accept(
    old: SwarmState,
    proposed: StepOutcome,
    cfg: SwarmConfig,
    rng: Optional[np.random.Generator] = None,
) -> StepOutcome:
    """
    Per-agent acceptance of a proposed step

    Improving moves are always kept. Other moves are kept when a uniform draw
    falls below P(m_i^{n+1}); a rejected agent returns to its old position
    but keeps the proposed velocity and mass. One draw is made per agent on
    every call so the generator advances identically whatever the outcome.

    Args:
        old: Swarm before the step
        proposed: Outcome of step_simex from `old`
        cfg: Scheme parameters (beta)
        rng: Generator; defaults to the swarm's own

    Returns:
        StepOutcome with rejected positions reverted and `accepted` filled in
    """
    rng = rng if rng is not None else old.rng
    new = proposed.new_state
    draws = rng.random(old.n_agents)
    probability = acceptance_probability(new.m, cfg.beta_for(old.n_agents))
    accepted = (new.f < old.f) | (draws < probability)

    reverted = new.evolve(
        x=np.where(accepted[:, None], new.x, old.x),
        f=np.where(accepted, new.f, old.f),
    )
    outcome = _finish(old, reverted, cfg, proposed.lambda_, proposed.warnings)
    outcome.accepted = accepted
    return outcome


def step_rsbi_simex(state: SwarmState, cfg: SwarmConfig, obj: Objective) -> StepOutcome:
    return stochastic_accept(state, step_simex(state, cfg, obj), cfg)


def step_sbgd(
    state: SwarmState,
    cfg: SwarmConfig,
    obj: Objective,
    lambda_armijo: Optional[float] = None,
    q: Optional[float] = None,
) -> StepOutcome:
    """
    Swarm-based gradient descent step

    Masses follow the SBGD redistribution (unregularized eta, the best agent
    takes whatever the others shed), then each agent backtracks from h_max
    until the Armijo-type condition scaled by its relative mass holds.

    Args:
        state: Swarm at step n
        cfg: Parameters; h drives the mass ODE, h_max/backtrack_factor the line search
        obj: Objective
        lambda_armijo: Sufficient-decrease constant (defaults to cfg.lambda_armijo)
        q: Exponent on the relative mass (defaults to cfg.q)

    Returns:
        StepOutcome with zero velocities
    """
    lam_armijo = cfg.lambda_armijo if lambda_armijo is None else lambda_armijo
    q = cfg.q if q is None else q
    if cfg.h > 1.0:
        raise StepSizeError(f"SBGD mass update needs h <= 1, got h={cfg.h}")

    phi = compute_eta(state.f, regularized=False) ** cfg.p
    best = state.best_index
    masses = (1.0 - cfg.h * phi) * state.m
    masses[best] = 0.0
    masses[best] = 1.0 - np.sum(masses)
    relative = masses / np.max(masses)
    decrease = lam_armijo * relative**q

    grad = obj.gradient(state.x)
    grad_sq = np.sum(grad * grad, axis=1)
    steps = np.full(state.n_agents, cfg.h_max)
    searching = grad_sq > 0.0
    warnings = []
    while np.any(searching):
        trial_f = obj.value(state.x - steps[:, None] * grad)
        satisfied = trial_f <= state.f - decrease * steps * grad_sq
        searching &= ~satisfied
        steps[searching] *= cfg.backtrack_factor
        underflow = searching & (steps < BACKTRACK_FLOOR)
        if np.any(underflow):
            for i in np.flatnonzero(underflow):
                message = f"backtracking underflow for agent {int(state.ids[i])} at iteration {state.iteration}"
                logger.warning(message)
                warnings.append(message)
            steps[underflow] = 0.0
            searching &= ~underflow

    x_new = state.x - steps[:, None] * grad
    new_state = state.evolve(
        x=x_new,
        v=np.zeros_like(state.v),
        m=masses,
        f=obj.value(x_new),
        iteration=state.iteration + 1,
    )
    return _finish(state, new_state, cfg, float(np.sum(phi * state.m)), warnings)


_STEPPERS = {
    SchemeKind.SBI_IMEX: step_imex,
    SchemeKind.SBI_SIMEX: step_simex,
    SchemeKind.RSBI_SIMEX: step_rsbi_simex,
    SchemeKind.SBGD: step_sbgd,
}


def step(state: SwarmState, cfg: SwarmConfig, obj: Objective, kind) -> StepOutcome:
    return _STEPPERS[SchemeKind(kind)](state, cfg, obj)
