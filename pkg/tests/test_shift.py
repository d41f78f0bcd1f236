import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatshift import _kernels
from heatshift.errors import ContractError
from heatshift.market import price_difference_matrix
from heatshift.shift import (ShiftFeasibility, apply_shift, compose_and_price, select_best_shift,
                             shift_feasibility, sigma_cost_saving, sigma_status, sigma_temperature)
from heatshift.thermal import ComfortSpec, ThermalParams, build_propagation_matrices, propagate

from oracles import oracle_best_shift, oracle_sigma, random_household, random_small_instance


def test_sigma_status_examples():
    assert not sigma_status(np.ones(4)).any()
    assert not sigma_status(np.zeros(4)).any()
    expected = np.zeros((3, 3), dtype=np.int8)
    expected[0, 1] = expected[2, 1] = 1
    np.testing.assert_array_equal(sigma_status([1, 0, 1]), expected)


def test_open_band_allows_every_pair():
    n = 5
    p = ThermalParams(0.9, 2.0, np.ones(n), 3.0)
    mats = build_propagation_matrices(p)
    comfort = ComfortSpec(np.full(n, -np.inf), np.full(n, np.inf), np.zeros(n), np.ones(n, bool))
    trace = propagate(18.0, np.zeros(n), mats)
    np.testing.assert_array_equal(sigma_temperature(trace, comfort, mats.Gamma), 1 - np.eye(n, dtype=np.int8))


def test_moving_load_earlier_into_upper_bound_is_infeasible():
    n = 4
    p = ThermalParams(0.9, 2.0, np.zeros(n), 3.0)
    mats = build_propagation_matrices(p)
    eps = np.array([0, 0, 0, 1])
    trace = propagate(20.0, eps, mats)
    lower = trace - 5.0
    upper = trace + 5.0
    upper[1] = trace[1]  # no headroom at step 1
    sb = sigma_temperature(trace, ComfortSpec.from_bounds(lower, upper), mats.Gamma)
    assert sb[3, 0] == 0
    assert sb[3, 2] == 1


def test_sigma_cost_saving_examples():
    assert sigma_cost_saving([10.0, 10.0], 3.0)[0, 1] == 0
    sc = sigma_cost_saving([10.0, 9.99], 3.0)
    assert sc[0, 1] == 1 and sc[1, 0] == 0
    assert sigma_cost_saving([9.0, 10.0], 3.0)[0, 1] == 0


def test_compose_and_price_examples():
    zero = np.zeros((2, 2), dtype=np.int8)
    one = np.array([[0, 1], [0, 0]], dtype=np.int8)
    Pi = price_difference_matrix([12.0, 42.0])
    f = compose_and_price(one, one, zero, Pi, 3.0, 0.25)
    assert not f.sigma.any() and not f.savings.any()
    f = compose_and_price(one, one, one, Pi, 3.0, 0.25)
    assert f.savings[0, 1] == pytest.approx(-0.0225)
    assert select_best_shift(f) is None


def _feas(savings):
    savings = np.asarray(savings, dtype=float)
    sigma = (savings != 0).astype(np.int8)
    return ShiftFeasibility(sigma, sigma, sigma, sigma, savings)


def test_select_best_shift_examples():
    assert select_best_shift(_feas(np.full((3, 3), -1.0))) is None
    s = np.zeros((40, 40))
    s[30, 10] = 0.5
    s[2, 3] = 0.1
    assert select_best_shift(_feas(s)) == (30, 10)
    s = np.zeros((8, 8))
    s[5, 2] = s[7, 2] = 0.3
    assert select_best_shift(_feas(s)) == (5, 2)


def test_apply_shift_and_reverse_restore_state():
    p = ThermalParams(0.8, 1.5, np.full(2, 0.5), 3.0)
    mats = build_propagation_matrices(p)
    eps = np.array([1, 0])
    trace = propagate(18.0, eps, mats)
    eps2, trace2 = apply_shift(eps, trace, mats, 0, 1)
    np.testing.assert_array_equal(eps2, [0, 1])
    np.testing.assert_allclose(trace2, propagate(18.0, eps2, mats), atol=1e-12)
    eps3, trace3 = apply_shift(eps2, trace2, mats, 1, 0)
    np.testing.assert_array_equal(eps3, eps)
    np.testing.assert_allclose(trace3, trace, atol=1e-9)
    with pytest.raises(ContractError):
        apply_shift(eps, trace, mats, 1, 0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 30))
def test_shift_preserves_on_count(seed, n):
    rng = np.random.default_rng(seed)
    params, comfort, T0, eps = random_household(rng, n)
    if eps.all() or not eps.any():
        return
    mats = build_propagation_matrices(params)
    t1 = int(rng.choice(np.flatnonzero(eps)))
    t2 = int(rng.choice(np.flatnonzero(eps == 0)))
    new, trace = apply_shift(eps, propagate(T0, eps, mats), mats, t1, t2)
    assert new.sum() == eps.sum()
    np.testing.assert_allclose(trace, propagate(T0, new, mats), atol=1e-9)


def test_matrix_form_matches_oracle(rng):
    for _ in range(200):
        pop, state = random_small_instance(rng)
        for j in range(pop.n_households):
            params, comfort = pop.household(j)
            mats = pop.matrices(j)
            f = shift_feasibility(pop.schedule[j], pop.trace[j], comfort, mats, state.aggregate_demand,
                                  state.price, params.rated_power, pop.dt)
            ref = oracle_sigma(params, comfort, pop.T0[j], pop.schedule[j], state.aggregate_demand)
            np.testing.assert_array_equal(f.sigma, ref)
            assert np.all(f.sigma == f.sigma_a * f.sigma_b * f.sigma_c)
            assert np.all(np.diag(f.sigma) == 0)
            assert np.all(f.sigma[f.savings > 0] == 1)


def test_kernel_matches_matrix_selection(rng):
    for _ in range(300):
        pop, state = random_small_instance(rng, n=int(rng.integers(6, 30)))
        use_c = bool(rng.integers(2))
        for j in range(pop.n_households):
            params, comfort = pop.household(j)
            f = shift_feasibility(pop.schedule[j], pop.trace[j], comfort, pop.matrices(j),
                                  state.aggregate_demand, state.price, params.rated_power, pop.dt, use_c)
            pw = _kernels._powers(pop.psi[j], pop.n_steps)
            t1, t2, s = _kernels.best_shift(pop.schedule[j], pop.trace[j], pop.lower[j], pop.upper[j], pw,
                                            pop.gamma[j], state.aggregate_demand, state.price,
                                            pop.rated_power[j], pop.dt, use_c, 1e-9)
            expected = select_best_shift(f)
            assert (None if t1 < 0 else (t1, t2)) == expected
            if expected:
                assert s == pytest.approx(f.savings[expected])


def test_price_order_preserved_after_shift(rng):
    for _ in range(200):
        pop, state = random_small_instance(rng)
        j = 0
        params, comfort = pop.household(j)
        f = shift_feasibility(pop.schedule[j], pop.trace[j], comfort, pop.matrices(j), state.aggregate_demand,
                              state.price, params.rated_power, pop.dt)
        pick = select_best_shift(f)
        if pick is None:
            continue
        t1, t2 = pick
        p = params.rated_power * 1e-3
        D = state.aggregate_demand.copy()
        D[t1] -= p
        D[t2] += p
        assert 0.03 * D[t1] + 12 >= 0.03 * D[t2] + 12
        ref_pick, ref_saving = oracle_best_shift(f.sigma, state.price, params.rated_power, pop.dt)
        assert pick == ref_pick and f.savings[pick] == pytest.approx(ref_saving) and ref_saving > 0
