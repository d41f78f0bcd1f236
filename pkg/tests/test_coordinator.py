import numpy as np
import pytest

from heatshift.coordinator import (CoordinationConfig, CoordinationRun, cost_decrement_audit, feasible_schedules,
                                   run_coordination, verify_equilibrium)
from heatshift.errors import CostAuditError, EnumerationTooLargeError, StateCorruptionError
from heatshift.market import SystemState
from heatshift.population import Population
from heatshift.thermal import ComfortSpec, ThermalParams, simulate

from oracles import random_population, random_state


def open_household(n, psi=0.9, gamma=1.0, rated=3.0, T0=20.0, half_width=50.0, eps=None):
    params = ThermalParams(psi, gamma, np.full(n, (1 - psi) * 20.0), rated)
    trace = simulate(T0, np.zeros(n) if eps is None else eps, params)
    comfort = ComfortSpec.from_bounds(trace - half_width, trace + half_width)
    return params, comfort, T0


def population(households, schedules):
    params, comforts, T0 = zip(*households)
    return Population.from_households(list(params), list(comforts), list(T0), np.array(schedules))


def test_single_household_at_fixed_point_is_left_alone():
    n = 4
    pop = population([open_household(n)], [[0, 0, 1, 1]])
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, [1.0, 1.0, 0.0, 0.0])
    run = run_coordination(pop, state)
    assert run.converged and run.pass_count == 1 and run.shift_count == [0]
    np.testing.assert_array_equal(pop.schedule, [[0, 0, 1, 1]])


def test_two_households_follow_each_other_to_the_valley():
    n = 4
    pop = population([open_household(n), open_household(n)], [[1, 1, 0, 0], [1, 1, 0, 0]])
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, [0.02, 0.02, 0.0, 0.0])
    run = run_coordination(pop, state)
    assert run.converged and run.pass_count <= 3
    assert run.total_cost[-1] < run.initial_cost
    np.testing.assert_array_equal(pop.schedule, [[0, 0, 1, 1], [0, 0, 1, 1]])
    assert sum(run.shift_count) == 4
    cost_decrement_audit(run)


def test_shift_cost_decrement_bound_example():
    # P = 3 kW, a = 0.03, dt = 0.25 -> a * P**2 * dt = 6.75e-8 GBP
    n = 2
    pop = population([open_household(n)], [[1, 0]])
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, [0.01, 0.0])
    run = run_coordination(pop, state)
    dec = cost_decrement_audit(run)
    assert dec.size == 1
    assert dec[0] >= 6.75e-8
    assert dec[0] == pytest.approx(0.03 * 0.003 * (0.013 - 0.0 - 0.003) * 0.25)


def test_audit_of_run_without_shifts_is_empty():
    run = CoordinationRun(initial_cost=1.0, a=0.03, shift_log=np.empty((0, 10)))
    assert cost_decrement_audit(run).size == 0


def test_audit_flags_insufficient_decrement():
    row = np.zeros((1, 10))
    row[0, 1] = 0.003  # rated MW
    row[0, 7], row[0, 8] = 100.0, 100.0  # cost before / after
    with pytest.raises(CostAuditError):
        cost_decrement_audit(CoordinationRun(initial_cost=100.0, a=0.03, shift_log=row))


def test_pass_cap_reports_non_convergence():
    n = 6
    pop = population([open_household(n)], [[1, 1, 1, 0, 0, 0]])
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, [0.05, 0.04, 0.03, 0.0, 0.0, 0.0])
    run = run_coordination(pop, state, CoordinationConfig(max_passes=1))
    assert not run.converged and run.pass_count == 1


def test_inconsistent_state_rejected():
    pop = population([open_household(3)], [[1, 0, 0]])
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, [0.1, 0.1, 0.1])
    state.aggregate_demand[0] += 1.0
    with pytest.raises(StateCorruptionError):
        run_coordination(pop, state)


def test_random_order_is_seeded(rng):
    pop = random_population(rng, 20, 24)
    state = random_state(rng, pop)
    results = []
    for _ in range(2):
        p, s = pop.copy(), state.copy()
        run_coordination(p, s, CoordinationConfig(order="random", seed=5))
        results.append((p.schedule.copy(), s.aggregate_demand.copy()))
    np.testing.assert_array_equal(results[0][0], results[1][0])
    np.testing.assert_array_equal(results[0][1], results[1][1])


def test_random_runs_keep_bounds_and_bookkeeping(rng):
    for _ in range(10):
        pop = random_population(rng, 30, 24)
        state = random_state(rng, pop)
        run = run_coordination(pop, state)
        assert run.violations == 0
        assert np.all(pop.bound_violations() == 0)
        np.testing.assert_allclose(pop.trace, pop.propagate(pop.schedule), atol=1e-9)
        rebuilt = SystemState.from_schedules(pop.schedule, pop.rated_power, state.non_heat_demand)
        np.testing.assert_allclose(state.aggregate_demand, rebuilt.aggregate_demand, rtol=1e-9, atol=1e-12)
        cost_decrement_audit(run)
        shifts_only = np.array(run.total_cost)
        assert run.converged == (run.shift_count[-1] == 0)
        assert np.all(np.isfinite(shifts_only))


def test_equilibrium_of_converged_single_household():
    n = 6
    pop = population([open_household(n)], [[1, 1, 0, 0, 0, 0]])
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, [0.10, 0.08, 0.06, 0.04, 0.02, 0.0])
    run = run_coordination(pop, state)
    assert run.converged
    np.testing.assert_array_equal(pop.schedule, [[0, 0, 0, 0, 1, 1]])
    assert verify_equilibrium(pop, state, 0)


def test_equilibrium_detects_improvable_schedule():
    n = 6
    pop = population([open_household(n)], [[1, 0, 0, 0, 0, 1]])
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, [0.10, 0.08, 0.06, 0.04, 0.02, 0.0])
    assert not verify_equilibrium(pop, state, 0)


def test_equilibrium_holds_vacuously_with_one_feasible_schedule():
    n = 6
    eps = np.array([1, 0, 1, 0, 0, 1])
    pop = population([open_household(n, eps=eps, half_width=0.01)], [eps])
    assert len(feasible_schedules(pop, 0, 3)) == 1
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, np.linspace(0.1, 0.0, n))
    assert verify_equilibrium(pop, state, 0)


def test_enumeration_size_guard():
    n = 40
    pop = population([open_household(n)], [np.r_[np.ones(20), np.zeros(20)]])
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, np.ones(n))
    with pytest.raises(EnumerationTooLargeError):
        verify_equilibrium(pop, state, 0)
