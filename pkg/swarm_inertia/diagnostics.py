"""
Diagnostics Module
Discrete mechanical energy, dissipation checks and per-iteration trace files
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np
import pandas as pd

from swarm_inertia.exceptions import TrialIOError

if TYPE_CHECKING:
    from swarm_inertia.schemes import StepOutcome
    from swarm_inertia.swarm_state import AgentState, SwarmConfig, SwarmState

logger = logging.getLogger(__name__)

DISSIPATION_SLACK = 1e-9
FLOAT_FORMAT = "%.17g"
EVENT_COLUMNS = ["iteration", "kind", "agents_involved", "detail"]


def compute_energy(agent: "AgentState", w: float, epsilon: float, f_value: Optional[float] = None) -> float:
    """
    Discrete energy E = (m + eps)/2 |v|^2 + w F(x) of one agent

    Args:
        agent: Agent whose energy is computed
        w: Potential weight of the agent
        epsilon: Mass floor
        f_value: F(x); defaults to the agent's cached value

    Returns:
        Energy as a float
    """
    f = agent.f_cached if f_value is None else f_value
    v = np.asarray(agent.v, dtype=float)
    return float((agent.m + epsilon) / 2.0 * np.dot(v, v) + w * f)


def swarm_energy(state: "SwarmState", epsilon: float) -> np.ndarray:
    return (state.m + epsilon) / 2.0 * np.sum(state.v * state.v, axis=1) + state.w * state.f


@dataclass(frozen=True)
class Violation:
    iteration: int
    agent_id: int
    magnitude: float
    kind: str


def check_dissipation(
    outcome: "StepOutcome",
    cfg: "SwarmConfig",
    scheme,
    ledger: Optional["EnergyLedger"] = None,
    slack: float = DISSIPATION_SLACK,
    kinds: Tuple[str, ...] = ("bound", "monotonicity"),
) -> List[Violation]:
    """
    Compare one step's energy change with the dissipation bound of its scheme

    For sbi_imex the bound is
        -(m+eps)/2 |dv|^2 - h (R (m+eps) - h w L / 2) |v_new|^2,
    for sbi_simex it is -(m+eps)/2 |dv|^2. Both schemes are also checked for
    plain per-agent monotonicity. Other schemes are not checked.

    Args:
        outcome: Step to audit
        cfg: Parameters used for the step (h, R, epsilon, Lipschitz estimate)
        scheme: SchemeKind (or its string value)
        ledger: When given, violations are appended to it
        slack: Tolerance, scaled per agent by max(1, |E_before|, |E_after|)
        kinds: Which of "bound" and "monotonicity" to check

    Returns:
        Violations above the slack
    """
    kind = getattr(scheme, "value", scheme)
    if kind not in ("sbi_imex", "sbi_simex"):
        return []

    old, new = outcome.old_state, outcome.new_state
    mu = old.m + cfg.epsilon
    dv = new.v - old.v
    bound = -mu / 2.0 * np.sum(dv * dv, axis=1)
    if kind == "sbi_imex":
        speed_sq = np.sum(new.v * new.v, axis=1)
        bound -= cfg.h * (cfg.R * mu - 0.5 * cfg.h * old.w * cfg.lipschitz_value) * speed_sq
    change = outcome.energy_after - outcome.energy_before
    tolerance = slack * np.maximum(1.0, np.maximum(np.abs(outcome.energy_before), np.abs(outcome.energy_after)))

    violations = []
    for label, excess in (("bound", change - bound), ("monotonicity", change)):
        if label not in kinds:
            continue
        for i in np.flatnonzero(excess > tolerance):
            violations.append(Violation(new.iteration, int(old.ids[i]), float(excess[i]), label))
    if violations:
        logger.warning("%d dissipation violation(s) at iteration %d (%s)", len(violations), new.iteration, kind)
    if ledger is not None:
        ledger.dissipation_violations.extend(violations)
    return violations


@dataclass
class EnergyLedger:
    """
    Append-only per-trial record of positions, velocities, masses, F and energy.

    Rows are kept per iteration; an iteration re-recorded after a lifecycle
    pass is tagged and skipped by the total-energy monotonicity check.
    """

    dim: int
    epsilon: float
    dissipation_violations: List[Violation] = field(default_factory=list)
    lifecycle_iterations: Set[int] = field(default_factory=set)
    _blocks: Dict[int, pd.DataFrame] = field(default_factory=dict, repr=False)

    @property
    def columns(self) -> List[str]:
        return (
            ["iter", "agent_id"]
            + [f"x{k}" for k in range(self.dim)]
            + [f"v{k}" for k in range(self.dim)]
            + ["m", "F", "E", "w"]
        )

    def append(self, state: "SwarmState", energies: Optional[np.ndarray] = None) -> None:
        if energies is None:
            energies = swarm_energy(state, self.epsilon)
        n = state.n_agents
        data = np.column_stack(
            [
                np.full(n, state.iteration, dtype=float),
                state.ids.astype(float),
                state.x,
                state.v,
                state.m,
                state.f,
                energies,
                state.w,
            ]
        )
        block = pd.DataFrame(data, columns=self.columns)
        block = block.astype({"iter": int, "agent_id": int})
        self._blocks[state.iteration] = block

    def retag(self, state: "SwarmState") -> None:
        """Replace the rows of state.iteration after a lifecycle change and tag them."""
        self.append(state)
        self.lifecycle_iterations.add(state.iteration)

    def to_frame(self) -> pd.DataFrame:
        if not self._blocks:
            return pd.DataFrame(columns=self.columns)
        return pd.concat([self._blocks[k] for k in sorted(self._blocks)], ignore_index=True)

    @property
    def per_agent(self) -> pd.DataFrame:
        frame = self.to_frame()
        return frame.pivot(index="iter", columns="agent_id", values="E")

    @property
    def total(self) -> pd.Series:
        return self.to_frame().groupby("iter")["E"].sum()

    def total_is_monotone(self, slack: float = DISSIPATION_SLACK) -> bool:
        totals = self.total
        iterations = totals.index.tolist()
        values = totals.to_numpy()
        n_agents = self.to_frame().groupby("iter").size()
        for k in range(1, len(iterations)):
            if iterations[k] in self.lifecycle_iterations:
                continue
            if values[k] > values[k - 1] + n_agents.iloc[k] * slack:
                return False
        return True


def record_trace(state: "SwarmState", outcome: Optional["StepOutcome"], ledger: EnergyLedger) -> EnergyLedger:
    """
    Append one iteration to the ledger

    Args:
        state: State to record; the initial state when `outcome` is None
        outcome: Step that produced `state`, reused for its energies
        ledger: Ledger to update

    Returns:
        The same ledger
    """
    if outcome is not None and state is outcome.new_state:
        ledger.append(state, outcome.energy_after)
    else:
        ledger.append(state)
    return ledger


def _events_frame(events: Iterable) -> pd.DataFrame:
    rows = [
        {
            "iteration": event.iteration,
            "kind": getattr(event.kind, "value", event.kind),
            "agents_involved": " ".join(str(i) for i in event.agents_involved),
            "detail": event.detail,
        }
        for event in events
    ]
    return pd.DataFrame(rows, columns=EVENT_COLUMNS)


def write_trace(ledger: EnergyLedger, events: Iterable, directory: str, stem: str) -> Tuple[str, str]:
    """
    Write the trace and events side-file as tab-separated text

    Args:
        ledger: Ledger holding the per-iteration rows
        events: Lifecycle events of the trial
        directory: Output directory (created if needed)
        stem: Name fragment; files are trace_<stem>.tsv and events_<stem>.tsv

    Returns:
        (trace path, events path)
    """
    trace_path = os.path.join(directory, f"trace_{stem}.tsv")
    events_path = os.path.join(directory, f"events_{stem}.tsv")
    try:
        os.makedirs(directory, exist_ok=True)
        ledger.to_frame().to_csv(trace_path, sep="\t", index=False, float_format=FLOAT_FORMAT)
        _events_frame(events).to_csv(events_path, sep="\t", index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        logger.error("Error writing trace files to %s: %s", directory, e)
        raise TrialIOError(directory, "could not write trace") from e
    logger.info("Successfully wrote trace (%d rows) to %s", len(ledger.to_frame()), trace_path)
    return trace_path, events_path


def read_trace(path: str, epsilon: float) -> EnergyLedger:
    """Rebuild a ledger from a trace file written by write_trace."""
    try:
        frame = pd.read_csv(path, sep="\t", float_precision="round_trip")
    except OSError as e:
        logger.error("Error reading trace file %s: %s", path, e)
        raise TrialIOError(path, "could not read trace") from e
    dim = sum(1 for c in frame.columns if c.startswith("x"))
    ledger = EnergyLedger(dim=dim, epsilon=epsilon)
    if not frame.empty:
        frame = frame.astype({"iter": int, "agent_id": int})
        for iteration, block in frame.groupby("iter", sort=True):
            ledger._blocks[int(iteration)] = block[ledger.columns].reset_index(drop=True)
    return ledger
