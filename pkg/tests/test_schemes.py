import numpy as np
import pytest

from conftest import make_state
from swarm_inertia.exceptions import DivergenceError, StepSizeError
from swarm_inertia.objectives import get_objective
from swarm_inertia.schemes import (
    SchemeKind,
    acceptance_probability,
    solve_simex_oracle,
    step,
    step_imex,
    step_rsbi_simex,
    step_sbgd,
    step_simex,
    stochastic_accept,
)
from swarm_inertia.swarm_state import SwarmConfig
from swarm_inertia.verify import random_swarm

EXACT = dict(epsilon=1e-12, R=1.0, h=0.5, w=1.0)


def lone_agent(obj, x, v):
    # a single agent keeps its mass: the whole outflow comes straight back
    return make_state([[x]], [[v]], [0.5], obj, w=1.0)


def test_imex_scalar_example(linear):
    outcome = step_imex(lone_agent(linear, 2.0, 1.0), SwarmConfig(**EXACT), linear)
    assert outcome.new_state.m[0] == pytest.approx(0.5)
    assert outcome.new_state.v[0, 0] == pytest.approx(0.0, abs=1e-9)
    assert outcome.new_state.x[0, 0] == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("v0,v1,dx", [(1.0, 0.0, 0.0), (2.0, 0.4, 0.2)])
def test_simex_scalar_examples(linear, v0, v1, dx):
    outcome = step_simex(lone_agent(linear, 2.0, v0), SwarmConfig(kappa=2.0, **EXACT), linear)
    assert outcome.new_state.v[0, 0] == pytest.approx(v1, abs=1e-9)
    assert outcome.new_state.x[0, 0] == pytest.approx(2.0 + dx, abs=1e-9)


def test_force_free_step_is_pure_damping(constant):
    state = make_state([[0.0]], [[3.0]], [1.0], constant)
    outcome = step_imex(state, SwarmConfig(h=0.5, R=1.0), constant)
    assert np.allclose(outcome.new_state.m, state.m)
    assert np.allclose(outcome.new_state.v, state.v / 1.5)
    assert np.all(outcome.energy_after < outcome.energy_before)


def test_zero_step_leaves_state_unchanged():
    obj = get_objective("rastrigin", 2)
    state = random_swarm(obj, np.random.default_rng(1), 6)
    for stepper in (step_imex, step_simex, solve_simex_oracle):
        new = stepper(state, SwarmConfig(h=0.0), obj).new_state
        assert np.array_equal(new.x, state.x)
        assert np.allclose(new.v, state.v)
        assert new.iteration == state.iteration + 1


def test_kappa_zero_reproduces_imex():
    obj = get_objective("styblinski_tang", 3)
    rng = np.random.default_rng(4)
    for _ in range(50):
        state = random_swarm(obj, rng, 5)
        cfg = SwarmConfig(h=float(rng.uniform(0.1, 1.0)), kappa=0.0)
        a = step_simex(state, cfg, obj).new_state
        b = step_imex(state, cfg, obj).new_state
        assert np.max(np.abs(a.x - b.x)) <= 1e-14
        assert np.max(np.abs(a.v - b.v)) <= 1e-14


@pytest.mark.parametrize("name,dim", [("rastrigin", 2), ("rosenbrock", 3), ("exp_sin_1d", 1)])
def test_closed_form_matches_oracle(name, dim):
    obj = get_objective(name, dim)
    rng = np.random.default_rng(dim)
    for _ in range(100):
        state = random_swarm(obj, rng, int(rng.integers(1, 6)), w=float(rng.uniform(1e-5, 1e-3)))
        cfg = SwarmConfig(h=float(rng.uniform(0.05, 1.0)), kappa=float(rng.uniform(0.0, 50.0)))
        closed = step_simex(state, cfg, obj).new_state
        oracle = solve_simex_oracle(state, cfg, obj).new_state
        assert np.allclose(closed.v, oracle.v, rtol=0.0, atol=1e-10 * max(1.0, np.max(np.abs(oracle.v))))
        assert np.allclose(closed.x, oracle.x, rtol=1e-10, atol=1e-10)
        assert np.array_equal(closed.m, oracle.m)


def test_acceptance_probability_values():
    assert acceptance_probability(0.2, 0.2) == pytest.approx(0.5)
    assert acceptance_probability(0.21, 0.2) == pytest.approx(0.5 - 0.5 * np.tanh(10.0))
    assert acceptance_probability(0.21, 0.2) == pytest.approx(2.061e-9, rel=1e-3)
    assert acceptance_probability(0.0, 0.5) == pytest.approx(1.0)


def test_improving_moves_are_always_accepted(quadratic):
    state = make_state([[1.0], [2.0], [-3.0]], [[-1.0], [-1.0], [1.0]], [0.9, 0.05, 0.05], quadratic)
    cfg = SwarmConfig(h=0.5, w=1e-4, kappa=0.0, beta=0.0)
    proposed = step_simex(state, cfg, quadratic)
    assert np.all(proposed.new_state.f < state.f)
    outcome = stochastic_accept(state, proposed, cfg, rng=np.random.default_rng(0))
    assert outcome.accepted.all()
    assert np.array_equal(outcome.new_state.x, proposed.new_state.x)


def test_rejected_agents_keep_old_position(quadratic):
    state = make_state([[0.0], [0.5]], [[1.0], [1.0]], [0.6, 0.4], quadratic)
    cfg = SwarmConfig(h=0.5, w=1e-4, kappa=0.0, beta=0.0)
    outcome = stochastic_accept(state, step_simex(state, cfg, quadratic), cfg, rng=np.random.default_rng(0))
    assert not outcome.accepted.any()
    assert np.array_equal(outcome.new_state.x, state.x)
    assert np.array_equal(outcome.new_state.f, state.f)
    assert not np.array_equal(outcome.new_state.v, state.v)


def test_rsbi_draws_from_swarm_generator(quadratic):
    a = make_state([[0.0], [0.5]], [[1.0], [1.0]], [0.5, 0.5], quadratic, seed=11)
    b = make_state([[0.0], [0.5]], [[1.0], [1.0]], [0.5, 0.5], quadratic, seed=11)
    cfg = SwarmConfig(h=0.5, w=1e-4)
    assert np.array_equal(step_rsbi_simex(a, cfg, quadratic).accepted, step_rsbi_simex(b, cfg, quadratic).accepted)
    assert a.rng.random() == b.rng.random()


def test_sbgd_single_agent_quadratic(quadratic):
    state = make_state([[1.0]], [[0.0]], [1.0], quadratic)
    outcome = step_sbgd(state, SwarmConfig(h=0.5, h_max=1.0), quadratic, lambda_armijo=0.25, q=1.0)
    assert outcome.new_state.x[0, 0] == pytest.approx(0.0)
    assert outcome.new_state.m[0] == pytest.approx(1.0)
    assert np.all(outcome.new_state.v == 0.0)


def test_sbgd_stationary_agent_does_not_move(quadratic):
    state = make_state([[0.0], [2.0]], [[0.0], [0.0]], [0.5, 0.5], quadratic)
    outcome = step_sbgd(state, SwarmConfig(h=0.5), quadratic)
    assert outcome.new_state.x[0, 0] == 0.0


def test_sbgd_best_agent_collects_mass(quadratic):
    state = make_state([[1.0], [2.0]], [[0.0], [0.0]], [0.5, 0.5], quadratic).evolve(f=[1.0, 2.0])
    h = 0.3
    outcome = step_sbgd(state, SwarmConfig(h=h), quadratic)
    assert outcome.new_state.m[0] == pytest.approx(1.0 - (1.0 - h) * 0.5)
    assert outcome.new_state.m[1] == pytest.approx((1.0 - h) * 0.5)


def test_sbgd_rejects_large_step(quadratic):
    with pytest.raises(StepSizeError):
        step_sbgd(make_state([[1.0]], [[0.0]], [1.0], quadratic), SwarmConfig(h=2.0, conserve_mass=False), quadratic)


@pytest.mark.parametrize("kind", list(SchemeKind))
def test_step_dispatch_keeps_mass(kind):
    obj = get_objective("rastrigin", 2)
    state = random_swarm(obj, np.random.default_rng(9), 8)
    outcome = step(state, SwarmConfig(h=0.5, kappa=600.0), obj, kind)
    assert outcome.new_state.n_agents == 8
    assert outcome.new_state.total_mass == pytest.approx(1.0, abs=1e-12)
    assert outcome.new_state.iteration == state.iteration + 1


def test_energy_stable_flag():
    assert SchemeKind.SBI_IMEX.is_energy_stable and SchemeKind.SBI_SIMEX.is_energy_stable
    assert not SchemeKind.RSBI_SIMEX.is_energy_stable and not SchemeKind.SBGD.is_energy_stable


def test_light_agent_overflow_raises_divergence(quadratic):
    # m = 1e-6 turns the force coefficient h w / (m + eps) into ~5e5; x^2 then overflows
    state = make_state([[1e150]], [[0.0]], [1e-6], quadratic, w=1.0)
    with pytest.raises(DivergenceError) as excinfo:
        step_imex(state, SwarmConfig(h=0.5, R=1.0), quadratic)
    assert excinfo.value.agent_ids == (0,)
    assert excinfo.value.iteration == 1


def test_finite_steps_do_not_raise(quadratic):
    state = make_state([[1e3], [-2.0]], [[0.0], [1.0]], [0.5, 0.5], quadratic, w=1.0)
    outcome = step_imex(state, SwarmConfig(h=0.5, R=1.0), quadratic)
    assert np.all(np.isfinite(outcome.energy_after))
