"""
swarm_inertia package
Energy-stable swarm-based inertial optimizers and the Monte-Carlo harness around them
"""
__version__ = "0.1.0"

from swarm_inertia.exceptions import (
    ConfigurationError,
    DivergenceError,
    InvalidArgumentError,
    OracleError,
    SingularUpdateError,
    StepSizeError,
    SwarmError,
    TrialIOError,
)
from swarm_inertia.objectives import (
    LipschitzEstimate,
    Objective,
    estimate_lipschitz,
    eval_gradient,
    eval_objective,
    get_objective,
    register_objective,
)
from swarm_inertia.swarm_state import AgentState, MassUpdate, SwarmConfig, SwarmState
from swarm_inertia.schemes import SchemeKind, StepOutcome, step
from swarm_inertia.lifecycle import LifecycleEvent, RunResult, run
from swarm_inertia.config import ExperimentConfig, MethodSpec, SuccessCriterion, load_experiment_config
from swarm_inertia.report import ExperimentReport, emit_report, load_report
from swarm_inertia.harness import classify_success, initialize_swarm, run_batch, wilson_interval

__all__ = [
    "AgentState",
    "ConfigurationError",
    "DivergenceError",
    "ExperimentConfig",
    "ExperimentReport",
    "InvalidArgumentError",
    "LifecycleEvent",
    "LipschitzEstimate",
    "MassUpdate",
    "MethodSpec",
    "Objective",
    "OracleError",
    "RunResult",
    "SchemeKind",
    "SingularUpdateError",
    "StepOutcome",
    "StepSizeError",
    "SuccessCriterion",
    "SwarmConfig",
    "SwarmError",
    "SwarmState",
    "TrialIOError",
    "classify_success",
    "emit_report",
    "estimate_lipschitz",
    "eval_gradient",
    "eval_objective",
    "get_objective",
    "initialize_swarm",
    "load_experiment_config",
    "load_report",
    "register_objective",
    "run",
    "run_batch",
    "step",
    "wilson_interval",
]
