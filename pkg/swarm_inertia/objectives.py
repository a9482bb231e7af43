"""
Objectives Module
Objective-function abstraction, benchmark registry and Lipschitz estimation
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from swarm_inertia.exceptions import ConfigurationError, InvalidArgumentError

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

HALF_PI = 0.5 * math.pi

# Minimizers refined past the 4-6 digits usually quoted for these functions.
STYBLINSKI_TANG_ARGMIN = -2.903534027771177
EXP_SIN_ARGMIN = 1.535498830125
OSCILLATORY_ARGMIN = 21.5627373414


@dataclass(frozen=True, eq=False)
class Objective:
    """
    Scalar field with analytic gradient, search box and optional known minimum.

    `func` maps (..., dim) arrays to (...) values and `grad_func` maps them to
    (..., dim) gradients, so a whole swarm is evaluated in one call.
    """

    name: str
    dim: int
    func: ArrayFn
    grad_func: ArrayFn
    lower: np.ndarray
    upper: np.ndarray
    known_min: Optional[Tuple[np.ndarray, float]] = None
    default_success_tol: Optional[float] = None

    def value(self, x) -> np.ndarray:
        return eval_objective(self, x)

    def gradient(self, x) -> np.ndarray:
        return eval_gradient(self, x)

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))


class LipschitzMethod(str, Enum):
    USER_SUPPLIED = "user_supplied"
    HESSIAN_SAMPLING = "hessian_sampling"


@dataclass(frozen=True)
class LipschitzEstimate:
    """Upper-bound estimate of L = max ||D^2 F|| over a box."""

    value: float
    samples: int
    method: LipschitzMethod
    raw_max: float = 0.0


def _as_points(obj: Objective, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != obj.dim:
        raise InvalidArgumentError(
            f"Objective '{obj.name}' expects points of length {obj.dim}, got shape {arr.shape}"
        )
    return arr


def eval_objective(obj: Objective, x) -> np.ndarray:
    """
    Evaluate F at one point (shape (dim,)) or a stack of points (shape (N, dim))

    Args:
        obj: Objective to evaluate
        x: Point or array of points

    Returns:
        Scalar array for a single point, shape (N,) for a stack
    """
    return obj.func(_as_points(obj, x))


def eval_gradient(obj: Objective, x) -> np.ndarray:
    """Analytic gradient of F, same leading shape as `x`."""
    return obj.grad_func(_as_points(obj, x))


def objective_hessian(obj: Objective, x, step: float = 1e-5) -> np.ndarray:
    """
    Central finite-difference Hessian built from the analytic gradient

    Args:
        obj: Objective whose curvature is sampled
        x: Point (dim,) or stack of points (N, dim)
        step: Difference step, scaled by max(1, |x_j|) per coordinate

    Returns:
        Symmetrized Hessian, shape (dim, dim) or (N, dim, dim)
    """
    pts = _as_points(obj, x)
    hess = np.empty(pts.shape + (obj.dim,))
    for j in range(obj.dim):
        delta = step * np.maximum(1.0, np.abs(pts[..., j]))
        forward = pts.copy()
        backward = pts.copy()
        forward[..., j] += delta
        backward[..., j] -= delta
        column = (obj.grad_func(forward) - obj.grad_func(backward)) / (2.0 * delta[..., None])
        hess[..., :, j] = column
    return 0.5 * (hess + np.swapaxes(hess, -1, -2))


def estimate_lipschitz(
    obj: Objective,
    samples: int = 1000,
    seed: int = 0,
    *,
    domain: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    safety_factor: float = 1.5,
    user_value: Optional[float] = None,
) -> LipschitzEstimate:
    """
    Estimate the gradient Lipschitz constant of an objective

    Samples uniform points in the box, takes the spectral norm of the
    finite-difference Hessian at each and inflates the maximum by
    `safety_factor`. A user value short-circuits the sampling.

    Args:
        obj: Objective to analyse
        samples: Number of sample points (>= 1)
        seed: Seed for the sampling generator
        domain: Optional (lower, upper) box replacing obj's own domain
        safety_factor: Inflation applied to the sampled maximum
        user_value: Known L; returned as-is when given

    Returns:
        LipschitzEstimate
    """
    if user_value is not None:
        if user_value < 0:
            raise ConfigurationError(f"Lipschitz constant must be >= 0, got {user_value}")
        return LipschitzEstimate(float(user_value), 0, LipschitzMethod.USER_SUPPLIED, float(user_value))
    if samples < 1:
        raise InvalidArgumentError(f"samples must be >= 1, got {samples}")

    lower, upper = domain if domain is not None else (obj.lower, obj.upper)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (obj.dim,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (obj.dim,))
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ConfigurationError(
            f"Cannot sample curvature of '{obj.name}' on an unbounded domain; supply lipschitz.value"
        )

    rng = np.random.default_rng(seed)
    points = rng.uniform(lower, upper, size=(samples, obj.dim))
    hessians = objective_hessian(obj, points)
    norms = np.linalg.norm(hessians, ord=2, axis=(1, 2))
    raw = float(np.max(norms))
    logger.debug("Sampled Lipschitz estimate for %s (d=%d): %.6g over %d points", obj.name, obj.dim, raw, samples)
    return LipschitzEstimate(safety_factor * raw, samples, LipschitzMethod.HESSIAN_SAMPLING, raw)


def inflate_box(lower, upper, factor: float = 2.0) -> Tuple[np.ndarray, np.ndarray]:
    """Scale a box about its centre by `factor`."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    centre = 0.5 * (lower + upper)
    half = 0.5 * (upper - lower) * factor
    return centre - half, centre + half


# ----------------------------------------------------------------------------
# Benchmarks
# ----------------------------------------------------------------------------

def rastrigin(x: np.ndarray) -> np.ndarray:
    return 10.0 * x.shape[-1] + np.sum(x**2 - 10.0 * np.cos(2.0 * np.pi * x), axis=-1)


def rastrigin_grad(x: np.ndarray) -> np.ndarray:
    return 2.0 * x + 20.0 * np.pi * np.sin(2.0 * np.pi * x)


def rosenbrock(x: np.ndarray) -> np.ndarray:
    head = x[..., :-1]
    tail = x[..., 1:]
    return np.sum(100.0 * (tail - head**2) ** 2 + (1.0 - head) ** 2, axis=-1)


def rosenbrock_grad(x: np.ndarray) -> np.ndarray:
    head = x[..., :-1]
    tail = x[..., 1:]
    inner = tail - head**2
    grad = np.zeros_like(x)
    grad[..., :-1] += -400.0 * head * inner - 2.0 * (1.0 - head)
    grad[..., 1:] += 200.0 * inner
    return grad


def styblinski_tang(x: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(x**4 - 16.0 * x**2 + 5.0 * x, axis=-1)


def styblinski_tang_grad(x: np.ndarray) -> np.ndarray:
    return 2.0 * x**3 - 16.0 * x + 2.5


def exp_sin_1d(x: np.ndarray) -> np.ndarray:
    t = x[..., 0]
    return np.exp(np.sin(2.0 * t**2)) + (t - HALF_PI) ** 2 / 10.0


def exp_sin_1d_grad(x: np.ndarray) -> np.ndarray:
    t = x[..., 0]
    s = 2.0 * t**2
    return (np.exp(np.sin(s)) * np.cos(s) * 4.0 * t + (t - HALF_PI) / 5.0)[..., None]


def oscillatory_1d(x: np.ndarray) -> np.ndarray:
    t = x[..., 0]
    return (
        t * np.sin(t) * np.cos(2.0 * t)
        - 2.0 * t * np.sin(3.0 * t)
        + 3.0 * t * np.sin(4.0 * t)
        + 0.1 * t**2
    )


def oscillatory_1d_grad(x: np.ndarray) -> np.ndarray:
    t = x[..., 0]
    grad = (
        np.sin(t) * np.cos(2.0 * t)
        + t * np.cos(t) * np.cos(2.0 * t)
        - 2.0 * t * np.sin(t) * np.sin(2.0 * t)
        - 2.0 * np.sin(3.0 * t)
        - 6.0 * t * np.cos(3.0 * t)
        + 3.0 * np.sin(4.0 * t)
        + 12.0 * t * np.cos(4.0 * t)
        + 0.2 * t
    )
    return grad[..., None]


def _box(dim: int, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    return np.full(dim, lo), np.full(dim, hi)


def _with_minimum(name, dim, func, grad, box, point, tol) -> Objective:
    point = np.asarray(point, dtype=float)
    return Objective(
        name=name,
        dim=dim,
        func=func,
        grad_func=grad,
        lower=box[0],
        upper=box[1],
        known_min=(point, float(func(point))),
        default_success_tol=tol,
    )


def make_rastrigin(dim: int) -> Objective:
    return _with_minimum("rastrigin", dim, rastrigin, rastrigin_grad, _box(dim, -5.12, 5.12), np.zeros(dim), 0.5)


def make_rosenbrock(dim: int) -> Objective:
    if dim < 2:
        raise InvalidArgumentError("rosenbrock needs dim >= 2")
    return _with_minimum("rosenbrock", dim, rosenbrock, rosenbrock_grad, _box(dim, -2.048, 2.048), np.ones(dim), 1.85)


def make_styblinski_tang(dim: int) -> Objective:
    return _with_minimum(
        "styblinski_tang",
        dim,
        styblinski_tang,
        styblinski_tang_grad,
        _box(dim, -5.0, 5.0),
        np.full(dim, STYBLINSKI_TANG_ARGMIN),
        7.068,
    )


def _one_dimensional(name: str, func, grad, lo, hi, argmin, tol):
    def factory(dim: int) -> Objective:
        if dim != 1:
            raise InvalidArgumentError(f"{name} is one-dimensional, got dim={dim}")
        return _with_minimum(name, 1, func, grad, _box(1, lo, hi), [argmin], tol)

    return factory


# ----------------------------------------------------------------------------
# Registry
# ----------------------------------------------------------------------------

_REGISTRY: Dict[str, Callable[[int], Objective]] = {}


def register_objective(name: str, factory: Callable[[int], Objective], replace: bool = False) -> None:
    """
    Register an objective factory under a name used by experiment configs

    Args:
        name: Registry key
        factory: Callable taking the dimension and returning an Objective
        replace: Allow overwriting an existing entry
    """
    if name in _REGISTRY and not replace:
        raise ConfigurationError(f"Objective '{name}' is already registered")
    _REGISTRY[name] = factory


def get_objective(name: str, dim: int = 1) -> Objective:
    if name not in _REGISTRY:
        raise ConfigurationError(f"Unknown objective '{name}'. Available: {sorted(_REGISTRY)}")
    if dim < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    return _REGISTRY[name](dim)


def available_objectives() -> list:
    return sorted(_REGISTRY)


register_objective("rastrigin", make_rastrigin)
register_objective("rosenbrock", make_rosenbrock)
register_objective("styblinski_tang", make_styblinski_tang)
register_objective(
    "exp_sin_1d", _one_dimensional("exp_sin_1d", exp_sin_1d, exp_sin_1d_grad, -4.0, 4.0, EXP_SIN_ARGMIN, 0.0297)
)
register_objective(
    "oscillatory_1d",
    _one_dimensional("oscillatory_1d", oscillatory_1d, oscillatory_1d_grad, 0.0, 30.0, OSCILLATORY_ARGMIN, 1.019),
)
