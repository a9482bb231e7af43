import numpy as np
import pytest

from conftest import make_state, suppress_logging
from swarm_inertia.diagnostics import EnergyLedger
from swarm_inertia.exceptions import ConfigurationError, InvalidArgumentError, StepSizeError
from swarm_inertia.lifecycle import run
from swarm_inertia.objectives import estimate_lipschitz, get_objective
from swarm_inertia.schemes import SchemeKind
from swarm_inertia.swarm_state import (
    AgentState,
    SwarmConfig,
    SwarmState,
    compute_eta,
    select_alpha,
    update_masses,
)


@pytest.mark.parametrize(
    "f,epsilon,regularized,expected",
    [
        ((1.0, 2.0), 1e-8, True, (1e-8, 1.0)),
        ((4.0, 4.0, 4.0), 1e-8, True, (1.0, 1.0, 1.0)),
        ((3.0, 1.0, 5.0), 1e-8, False, (0.5, 0.0, 1.0)),
        ((2.0, 2.0), 1e-8, False, (0.0, 0.0)),
    ],
)
def test_compute_eta(f, epsilon, regularized, expected):
    assert np.allclose(compute_eta(f, epsilon, regularized), expected, rtol=1e-7, atol=1e-15)


def test_compute_eta_range():
    f = np.random.default_rng(0).normal(size=40)
    eta = compute_eta(f)
    assert np.all(eta > 0.0) and np.all(eta <= 1.0)
    assert eta[np.argmax(f)] == pytest.approx(1.0)


@pytest.mark.parametrize(
    "f,expected",
    [((3.0, 1.0, 5.0), (0, 1, 0)), ((7.0,), (1,)), ((2.0, 2.0), (1, 0))],
)
def test_select_alpha(f, expected):
    assert np.array_equal(select_alpha(f), expected)


def _two_agents(quadratic):
    state = make_state([[0.0], [0.0]], [[0.0], [0.0]], [0.5, 0.5], quadratic)
    return state.evolve(f=[1.0, 2.0])


def test_update_masses_conserved(quadratic):
    update = update_masses(_two_agents(quadratic), SwarmConfig(h=0.5, epsilon=1e-12))
    assert np.allclose(update.new_masses, [0.75, 0.25], atol=1e-9)
    assert update.lambda_ == pytest.approx(0.5, abs=1e-9)


def test_update_masses_unconstrained(quadratic):
    update = update_masses(_two_agents(quadratic), SwarmConfig(h=0.5, epsilon=1e-12, conserve_mass=False))
    assert np.allclose(update.new_masses, [0.5, 0.25], atol=1e-9)


def test_update_masses_zero_step(quadratic):
    state = _two_agents(quadratic)
    update = update_masses(state, SwarmConfig(h=0.0))
    assert np.array_equal(update.new_masses, state.m)
    assert update.lambda_ == pytest.approx(np.sum(compute_eta(state.f) * state.m))


def test_update_masses_rejects_large_step(quadratic):
    with pytest.raises(StepSizeError):
        update_masses(_two_agents(quadratic), SwarmConfig(h=1.5))
    update_masses(_two_agents(quadratic), SwarmConfig(h=1.5, conserve_mass=False))


def test_mass_bounds_and_total_over_random_swarms():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(1, 51))
        cfg = SwarmConfig(h=float(rng.uniform(0.0, 1.0)), p=float(rng.choice([1.0, 2.0, 3.0])))
        state = SwarmState(
            x=np.zeros((n, 1)), v=np.zeros((n, 1)), m=rng.dirichlet(np.ones(n)),
            f=rng.normal(size=n), w=np.full(n, 1e-4), ids=np.arange(n),
        )
        for _ in range(200):
            masses = update_masses(state, cfg).new_masses
            assert np.all(masses >= 0.0) and np.all(masses <= 1.0)
            assert abs(np.sum(masses) - 1.0) < 1e-12
            state = state.evolve(m=masses, f=rng.normal(size=n))


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_update_masses_ordering_pressure(p):
    rng = np.random.default_rng(11)
    n = 8
    state = SwarmState(
        x=np.zeros((n, 1)), v=np.zeros((n, 1)), m=np.full(n, 1.0 / n),
        f=rng.permutation(np.arange(n, dtype=float)), w=np.full(n, 1e-4), ids=np.arange(n),
    )
    ranking = np.argsort(state.f)
    best, others = ranking[0], ranking[1:]
    cfg = SwarmConfig(h=0.5, p=p)
    for _ in range(30):
        masses = update_masses(state, cfg).new_masses
        assert masses[best] >= state.m[best]
        assert np.all(masses[others] <= state.m[others])
        # a worse-ranked agent never gains on a better-ranked one
        before = state.m[ranking[1:]] / state.m[ranking[:-1]]
        after = masses[ranking[1:]] / masses[ranking[:-1]]
        assert np.all(after <= before * (1.0 + 1e-12))
        state = state.evolve(m=masses)
    assert abs(np.sum(state.m) - 1.0) < 1e-12


def test_unconstrained_masses_decay_with_lifecycle_off():
    obj = get_objective("exp_sin_1d")
    rng = np.random.default_rng(3)
    state = make_state(rng.uniform(-3, -1, (6, 1)), rng.uniform(1, 5, (6, 1)), np.full(6, 1 / 6), obj, seed=3)
    cfg = SwarmConfig(
        conserve_mass=False, lifecycle_enabled=False, kappa=1000.0, max_iter=60,
        lipschitz=estimate_lipschitz(obj, user_value=900.0),
    )
    ledger = EnergyLedger(dim=1, epsilon=cfg.epsilon)
    with suppress_logging("swarm_inertia"):
        run(state, cfg, obj, SchemeKind.SBI_SIMEX, ledger=ledger)
    masses = ledger.to_frame().pivot(index="iter", columns="agent_id", values="m").to_numpy()
    assert masses.shape[0] > 1
    assert np.all(np.diff(masses, axis=0) <= 0.0)
    assert np.all(masses >= 0.0)
    assert masses[-1].sum() < masses[0].sum()


def test_swarm_config_validation():
    with pytest.raises(ConfigurationError):
        SwarmConfig(epsilon=0.0)
    with pytest.raises(ConfigurationError):
        SwarmConfig(w=[1e-4, -1.0])
    with pytest.raises(ConfigurationError):
        SwarmConfig(backtrack_factor=1.0)
    with pytest.raises(ValueError):
        SwarmConfig(underweight_action="teleport")


def test_swarm_config_helpers():
    cfg = SwarmConfig(w=[1e-4, 2e-4])
    assert np.array_equal(cfg.weights(2), [1e-4, 2e-4])
    with pytest.raises(ConfigurationError):
        cfg.weights(3)
    assert SwarmConfig().beta_for(4) == 0.25
    assert SwarmConfig(beta=0.1).beta_for(4) == 0.1
    assert SwarmConfig().imex_step_bound(np.full(3, 1e-4)) == 1.0


def test_state_validation(quadratic):
    with pytest.raises(InvalidArgumentError):
        SwarmState(x=np.zeros((2, 1)), v=np.zeros((3, 1)), m=[0.5, 0.5], f=[0, 0], w=[1, 1], ids=[0, 1])
    with pytest.raises(InvalidArgumentError):
        SwarmState.from_agents([])


def test_evolve_copies_arrays_and_shares_rng(quadratic):
    state = make_state([[1.0], [2.0]], [[0.0], [1.0]], [0.5, 0.5], quadratic)
    child = state.evolve(iteration=3)
    child.x[0, 0] = 10.0
    assert state.x[0, 0] == 1.0
    assert child.rng is state.rng
    assert child.iteration == 3


def test_from_agents_round_trip():
    agents = [AgentState(np.array([1.0, 2.0]), np.zeros(2), 0.25, 4.0), AgentState(np.array([0.0, 0.0]), np.ones(2), 0.75, 1.0)]
    state = SwarmState.from_agents(agents, weights=1e-3)
    assert state.n_agents == 2 and state.dim == 2
    assert state.total_mass == pytest.approx(1.0)
    assert state.best_index == 1
    assert np.array_equal(state.agents[0].x, agents[0].x)
    assert np.array_equal(state.w, [1e-3, 1e-3])
