"""
Exceptions Module
Error types raised by the optimizers and the experiment harness
"""


class SwarmError(Exception):
    """Base class for every error raised by swarm_inertia."""


class InvalidArgumentError(SwarmError, ValueError):
    """An argument has the wrong shape or an out-of-range value."""


class ConfigurationError(SwarmError):
    """A configuration file, key or combination of settings is unusable."""


class StepSizeError(SwarmError):
    """The time step breaks a bound the mass update relies on (h <= 1)."""


class SingularUpdateError(SwarmError):
    """The implicit velocity bracket is not positive for some agent."""


class OracleError(SwarmError):
    """The fixed-point reference solver did not converge."""


class TrialIOError(SwarmError, OSError):
    """Writing or reading a trace or report file failed."""

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{message}: {self.path}")


class DivergenceError(SwarmError, ArithmeticError):
    """A step produced a non-finite position, velocity, F value or energy."""

    def __init__(self, agent_ids, iteration: int):
        self.agent_ids = tuple(int(i) for i in agent_ids)
        self.iteration = int(iteration)
        super().__init__(f"non-finite state for agents {list(self.agent_ids)} at iteration {self.iteration}")
