import numpy as np
import pytest

from conftest import suppress_logging
from swarm_inertia.objectives import get_objective
from swarm_inertia.verify import (
    check_imex_dissipation,
    check_mass_bounds,
    check_simex_dissipation,
    random_swarm,
)


def test_random_swarm_masses_are_uniform():
    state = random_swarm(get_objective("rastrigin", 2), np.random.default_rng(0), 7)
    assert np.allclose(state.m, 1.0 / 7)
    assert np.all(state.x >= -5.12) and np.all(state.x <= 5.12)


@pytest.mark.parametrize("check", [check_imex_dissipation, check_simex_dissipation], ids=["imex", "simex"])
def test_full_size_dissipation_checks_pass(check):
    with suppress_logging("swarm_inertia"):
        result = check(np.random.default_rng(0))
    assert result.passed, result.detail
    assert result.detail.startswith("0 violation(s)")


@pytest.mark.slow
def test_full_size_mass_bounds_pass():
    result = check_mass_bounds(np.random.default_rng(0))
    assert result.passed, result.detail
