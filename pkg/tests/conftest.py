import logging
import os
import sys
from contextlib import contextmanager

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from swarm_inertia.config import ExperimentConfig, MethodSpec  # noqa: E402
from swarm_inertia.objectives import Objective  # noqa: E402
from swarm_inertia.swarm_state import SwarmState  # noqa: E402


@contextmanager
def suppress_logging(namespace):
    logger = logging.getLogger(namespace)
    old_value = logger.disabled
    logger.disabled = True
    try:
        yield
    finally:
        logger.disabled = old_value


def polynomial_objective(name, dim, func, grad, lower=-5.0, upper=5.0, known_min=None):
    return Objective(
        name=name,
        dim=dim,
        func=func,
        grad_func=grad,
        lower=np.full(dim, lower),
        upper=np.full(dim, upper),
        known_min=known_min,
        default_success_tol=None if known_min is None else 0.5,
    )


@pytest.fixture
def quadratic():
    """F(x) = |x|^2 / 2 in one dimension."""
    return polynomial_objective(
        "half_square", 1,
        lambda x: 0.5 * np.sum(x * x, axis=-1),
        lambda x: np.array(x, dtype=float),
        known_min=(np.zeros(1), 0.0),
    )


@pytest.fixture
def linear():
    """F(x) = x, constant unit gradient."""
    return polynomial_objective("linear", 1, lambda x: x[..., 0].copy(), lambda x: np.ones_like(x))


@pytest.fixture
def constant():
    return polynomial_objective("constant", 1, lambda x: np.full(x.shape[:-1], 3.0), lambda x: np.zeros_like(x))


def make_state(x, v, m, obj, w=1e-4, seed=0):
    x = np.asarray(x, dtype=float).reshape(len(m), -1)
    return SwarmState(
        x=x,
        v=np.asarray(v, dtype=float).reshape(x.shape),
        m=np.asarray(m, dtype=float),
        f=obj.value(x),
        w=np.broadcast_to(np.asarray(w, dtype=float), (len(m),)).copy(),
        ids=np.arange(len(m)),
        rng=np.random.default_rng(seed),
    )


@pytest.fixture
def small_experiment(tmp_path):
    """A tiny one-dimensional batch: two swarm sizes, two methods, three runs."""
    return ExperimentConfig(
        objective="exp_sin_1d",
        dims=[1],
        methods=[
            MethodSpec("SBI-SIMEX", "sbi_simex"),
            MethodSpec("SBI-IMEX", "sbi_imex", {"conserve_mass": False}),
        ],
        swarm_sizes=[3, 5],
        runs=3,
        position_box=[-3.0, -1.0],
        velocity_box=[1.0, 5.0],
        swarm={"w": 1e-4, "R": 1.0, "kappa": 10.0, "h": 0.5, "max_iter": 60},
        lipschitz={"samples": 200, "seed": 0},
        seed=7,
        out_dir=str(tmp_path / "results"),
    )
