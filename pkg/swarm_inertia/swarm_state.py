"""
Swarm State Module
Collective swarm state, scheme parameters and the shared mass dynamics
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np

from swarm_inertia.exceptions import ConfigurationError, InvalidArgumentError, StepSizeError
from swarm_inertia.objectives import LipschitzEstimate

logger = logging.getLogger(__name__)


class AlphaPolicy(str, Enum):
    BEST_AGENT = "best_agent"


class UnderweightAction(str, Enum):
    REMOVE = "remove"
    RELOCATE = "relocate"


@dataclass
class AgentState:
    """One agent: position, velocity, mass and the cached objective value at x."""

    x: np.ndarray
    v: np.ndarray
    m: float
    f_cached: float


@dataclass(frozen=True)
class SwarmConfig:
    """
    Parameters shared by every scheme and by the lifecycle loop.

    `w` is either one shared weight or one weight per initial agent. `beta`
    left as None means 1/N for the current agent count.
    """

    R: float = 1.0
    w: Union[float, Sequence[float]] = 1e-4
    kappa: float = 10.0
    epsilon: float = 1e-8
    h: float = 0.5
    p: float = 1.0
    conserve_mass: bool = True
    alpha_policy: AlphaPolicy = AlphaPolicy.BEST_AGENT
    lipschitz: Optional[LipschitzEstimate] = None
    tol_m: float = 1e-4
    tol_merge: float = 1e-3
    tol_res: float = 1e-5
    beta: Optional[float] = None
    max_iter: int = 500
    lifecycle_enabled: bool = True
    underweight_action: UnderweightAction = UnderweightAction.REMOVE
    max_inner: int = 100_000
    # SBGD baseline
    h_max: float = 1.0
    backtrack_factor: float = 0.5
    lambda_armijo: float = 0.2
    q: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.h >= 0:
            raise ConfigurationError(f"h must be >= 0, got {self.h}")
        if not self.R > 0:
            raise ConfigurationError(f"R must be > 0, got {self.R}")
        if np.any(np.asarray(self.w, dtype=float) <= 0):
            raise ConfigurationError(f"all weights w must be > 0, got {self.w}")
        if self.kappa < 0:
            raise ConfigurationError(f"kappa must be >= 0, got {self.kappa}")
        if not self.p > 0:
            raise ConfigurationError(f"p must be > 0, got {self.p}")
        for name in ("tol_m", "tol_merge", "tol_res", "h_max", "lambda_armijo", "q"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigurationError(f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}")
        if self.max_iter < 0 or self.max_inner < 1:
            raise ConfigurationError("max_iter must be >= 0 and max_inner >= 1")
        object.__setattr__(self, "alpha_policy", AlphaPolicy(self.alpha_policy))
        object.__setattr__(self, "underweight_action", UnderweightAction(self.underweight_action))

    def weights(self, n_agents: int) -> np.ndarray:
        w = np.asarray(self.w, dtype=float)
        if w.ndim == 0:
            return np.full(n_agents, float(w))
        if w.shape != (n_agents,):
            raise ConfigurationError(f"w has {w.size} entries but the swarm has {n_agents} agents")
        return w.copy()

    @property
    def lipschitz_value(self) -> float:
        return 0.0 if self.lipschitz is None else self.lipschitz.value

    def beta_for(self, n_agents: int) -> float:
        return 1.0 / n_agents if self.beta is None else float(self.beta)

    def imex_step_bound(self, weights: np.ndarray) -> float:
        """min(min_i 2R/(w_i L), 1); the IMEX dissipation guarantee needs h below it."""
        lip = self.lipschitz_value
        if lip <= 0:
            return 1.0
        return float(min(np.min(2.0 * self.R / (np.asarray(weights) * lip)), 1.0))

    def replace(self, **changes) -> "SwarmConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class SwarmState:
    """
    Array-of-agents view of the swarm.

    Rows of `x`, `v`, `m`, `f`, `w` and `ids` describe the same agent. `rng`
    is shared by every state derived from this one within a trial.
    """

    x: np.ndarray
    v: np.ndarray
    m: np.ndarray
    f: np.ndarray
    w: np.ndarray
    ids: np.ndarray
    iteration: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        self.m = np.asarray(self.m, dtype=float).reshape(-1)
        self.f = np.asarray(self.f, dtype=float).reshape(-1)
        self.w = np.asarray(self.w, dtype=float).reshape(-1)
        self.ids = np.asarray(self.ids, dtype=int).reshape(-1)
        n = self.x.shape[0]
        if n == 0:
            raise InvalidArgumentError("a swarm needs at least one agent")
        for name in ("v", "m", "f", "w", "ids"):
            if getattr(self, name).shape[0] != n:
                raise InvalidArgumentError(f"'{name}' has {getattr(self, name).shape[0]} rows, expected {n}")
        if self.v.shape != self.x.shape:
            raise InvalidArgumentError(f"velocity shape {self.v.shape} differs from position shape {self.x.shape}")

    @property
    def n_agents(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.m))

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.f))

    def agent(self, i: int) -> AgentState:
        return AgentState(self.x[i].copy(), self.v[i].copy(), float(self.m[i]), float(self.f[i]))

    @property
    def agents(self) -> List[AgentState]:
        return [self.agent(i) for i in range(self.n_agents)]

    def evolve(self, **changes) -> "SwarmState":
        """Copy of the state with some arrays replaced; the generator is shared."""
        fields = {
            "x": self.x,
            "v": self.v,
            "m": self.m,
            "f": self.f,
            "w": self.w,
            "ids": self.ids,
            "iteration": self.iteration,
        }
        fields.update(changes)
        return SwarmState(rng=self.rng, **{k: np.array(v, copy=True) if isinstance(v, np.ndarray) else v for k, v in fields.items()})

    @classmethod
    def from_agents(
        cls,
        agents: Sequence[AgentState],
        weights: Union[float, Sequence[float]] = 1e-4,
        rng: Optional[np.random.Generator] = None,
        iteration: int = 0,
    ) -> "SwarmState":
        if not agents:
            raise InvalidArgumentError("a swarm needs at least one agent")
        n = len(agents)
        w = np.asarray(weights, dtype=float)
        return cls(
            x=np.stack([np.atleast_1d(np.asarray(a.x, dtype=float)) for a in agents]),
            v=np.stack([np.atleast_1d(np.asarray(a.v, dtype=float)) for a in agents]),
            m=np.array([a.m for a in agents], dtype=float),
            f=np.array([a.f_cached for a in agents], dtype=float),
            w=np.full(n, float(w)) if w.ndim == 0 else w,
            ids=np.arange(n),
            iteration=iteration,
            rng=rng if rng is not None else np.random.default_rng(),
        )


@dataclass(frozen=True)
class MassUpdate:
    new_masses: np.ndarray
    lambda_: float


def compute_eta(f_values, epsilon: float = 1e-8, regularized: bool = True) -> np.ndarray:
    """
    Normalized rank of each objective value between the best and worst agent

    Args:
        f_values: Objective values of the agents
        epsilon: Regularization added to numerator and denominator
        regularized: False gives the plain SBGD form without epsilon

    Returns:
        eta in (0, 1] (regularized) or [0, 1] (plain); 1 for the worst agent
    """
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if f.size == 0:
        raise InvalidArgumentError("compute_eta needs at least one value")
    f_min = np.min(f)
    spread = np.max(f) - f_min
    eps = epsilon if regularized else 0.0
    denominator = spread + eps
    if denominator == 0.0:
        return np.ones_like(f) if regularized else np.zeros_like(f)
    return (f - f_min + eps) / denominator


def select_alpha(f_values) -> np.ndarray:
    """One-hot weights on the best agent; ties go to the lowest index."""
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if f.size == 0:
        raise InvalidArgumentError("select_alpha needs at least one value")
    alpha = np.zeros_like(f)
    alpha[int(np.argmin(f))] = 1.0
    return alpha


def update_masses(state: SwarmState, cfg: SwarmConfig) -> MassUpdate:
    """
    Explicit Euler step of the mass dynamics

    With conservation the mass shed by every agent is rerouted to the
    alpha-designated agent through the Lagrange multiplier
    lambda = sum_j phi_p(eta_j) m_j; without it every mass simply decays.

    Args:
        state: Current swarm (uses f and m)
        cfg: Scheme parameters (h, p, epsilon, conserve_mass)

    Returns:
        MassUpdate with the new masses and lambda
    """
    h = cfg.h
    if cfg.conserve_mass and h > 1.0:
        raise StepSizeError(f"mass conservation needs h <= 1, got h={h}")

    eta = compute_eta(state.f, cfg.epsilon)
    phi = eta**cfg.p
    lam = float(np.sum(phi * state.m))
    decayed = (1.0 - h * phi) * state.m
    if cfg.conserve_mass:
        alpha = select_alpha(state.f)
        # rounding can push the winner a few ulps past 1
        new_masses = np.clip(decayed + h * alpha * lam, 0.0, 1.0)
    else:
        new_masses = decayed
    return MassUpdate(new_masses=new_masses, lambda_=lam)
