"""Sequential best-response coordination of household heating schedules.

Households are visited one after another; each makes at most one demand
shift (plus at most one compensating ON step) against the current marginal
price, and the system demand is updated before the next household moves.
The loop stops after a pass in which nobody shifted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from . import _kernels
from .errors import CostAuditError, EnumerationTooLargeError, StateCorruptionError
from .market import KW_TO_MW, SystemState, heating_demand_mw
from .population import Population
from .thermal import BOUND_TOL

log = logging.getLogger(__name__)

LOG_COLUMNS = ("household", "t1", "t2", "t0", "saving", "cost_before", "cost_after", "violations")


@dataclass
class CoordinationConfig:
    max_passes: int = 100
    order: str = "fixed"  # or "random": seeded permutation per pass
    seed: int = 0
    compensation: bool = True
    flexibility: str = "time-varying"  # or "constant"
    use_sigma_c: bool = True
    record_shifts: bool = True
    tol: float = BOUND_TOL


@dataclass
class CoordinationRun:
    initial_cost: float
    total_cost: list[float] = field(default_factory=list)
    shift_count: list[int] = field(default_factory=list)
    compensation_count: list[int] = field(default_factory=list)
    converged: bool = False
    order: str = "fixed"
    violations: int = 0
    a: float = 0.0
    dt: float = 0.25
    shift_log: np.ndarray | None = None  # rows: pass, rated_mw, *LOG_COLUMNS

    @property
    def pass_count(self) -> int:
        return len(self.total_cost)

    def convergence_rows(self):
        for ell, (cost, s, c) in enumerate(zip(self.total_cost, self.shift_count, self.compensation_count), 1):
            yield ell, cost, s, c


def comfort_weight_matrix(pop: Population, flexibility: str = "time-varying") -> np.ndarray:
    if flexibility == "time-varying":
        flex = 1.0 / (pop.upper - pop.lower)
    elif flexibility == "constant":
        flex = np.ones(pop.upper.shape)
    else:
        raise ValueError(f"unknown flexibility mode {flexibility!r}")
    return np.ascontiguousarray(flex * pop.at_home)


def _check_consistency(pop: Population, state: SystemState, rtol: float = 1e-9) -> None:
    D = heating_demand_mw(pop.schedule, pop.rated_power) + state.net_demand
    scale = max(1.0, float(np.abs(D).max()))
    if np.max(np.abs(D - state.aggregate_demand)) > rtol * scale:
        raise StateCorruptionError("incremental aggregate demand drifted from the batch rebuild")
    if not state.allow_negative and np.any(D < -1e-9):
        raise StateCorruptionError("aggregate demand became negative")


def run_coordination(pop: Population, state: SystemState, config: CoordinationConfig | None = None) -> CoordinationRun:
    """Run passes until no household shifts; mutates ``pop`` schedules/traces and ``state``."""
    config = config or CoordinationConfig()
    if pop.schedule is None:
        raise ValueError("population has no initial schedules")
    _check_consistency(pop, state)
    H = pop.n_households
    w = comfort_weight_matrix(pop, config.flexibility)
    rng = np.random.default_rng(config.seed)
    run = CoordinationRun(initial_cost=state.total_cost(), order=config.order, a=state.coeffs.a, dt=state.dt)
    logs = []
    for ell in range(1, config.max_passes + 1):
        order = rng.permutation(H) if config.order == "random" else np.arange(H)
        pass_log = np.empty((H, len(LOG_COLUMNS)))
        shifts, comps, viol = _kernels.coordination_pass(
            order.astype(np.int64), pop.schedule, pop.trace, pop.lower, pop.upper, pop.reference, w,
            pop.psi, pop.gamma, pop.rated_power, state.aggregate_demand, state.price,
            state.coeffs.a, state.coeffs.b, state.dt, config.use_sigma_c, config.compensation, config.tol,
            pass_log)
        _check_consistency(pop, state)
        run.total_cost.append(state.total_cost())
        run.shift_count.append(int(shifts))
        run.compensation_count.append(int(comps))
        run.violations += int(viol)
        if config.record_shifts and shifts:
            moved = pass_log[pass_log[:, 1] >= 0]
            hh = moved[:, 0].astype(int)
            logs.append(np.column_stack([np.full(len(moved), ell), pop.rated_power[hh] * KW_TO_MW, moved]))
        log.info("pass %d: cost %.2f, %d shifts, %d compensations", ell, run.total_cost[-1], shifts, comps)
        if shifts == 0:
            run.converged = True
            break
    else:
        log.warning("coordination stopped at the %d-pass cap without converging", config.max_passes)
    if config.record_shifts:
        run.shift_log = np.vstack(logs) if logs else np.empty((0, 2 + len(LOG_COLUMNS)))
    return run


def cost_decrement_audit(run: CoordinationRun, rtol: float = 1e-12) -> np.ndarray:
    """Total-cost decrement of every shift, checked against ``a * P**2 * dt``.

    Raises :class:`CostAuditError` listing the offending shifts.
    """
    if run.shift_log is None:
        raise ValueError("run was not recorded with record_shifts=True")
    sl = run.shift_log
    if len(sl) == 0:
        return np.empty(0)
    before = sl[:, 2 + LOG_COLUMNS.index("cost_before")]
    after = sl[:, 2 + LOG_COLUMNS.index("cost_after")]
    decrement = before - after
    bound = run.a * sl[:, 1] ** 2 * run.dt
    slack = rtol * np.maximum(1.0, np.abs(before))
    bad = np.flatnonzero(decrement < bound - slack)
    if bad.size:
        rows = [f"pass {int(sl[i, 0])} household {int(sl[i, 2])} shift {int(sl[i, 3])}->{int(sl[i, 4])}: "
                f"decrement {decrement[i]:.3e} < bound {bound[i]:.3e}" for i in bad[:10]]
        raise CostAuditError(f"{bad.size} shifts violate the decrement bound:\n" + "\n".join(rows))
    return decrement


def feasible_schedules(pop: Population, j: int, n_on: int, max_candidates: int = 200_000,
                       tol: float = BOUND_TOL) -> np.ndarray:
    """All bound-respecting schedules of household ``j`` with ``n_on`` ON steps."""
    n = pop.n_steps
    if comb(n, n_on) > max_candidates:
        raise EnumerationTooLargeError(f"C({n}, {n_on}) schedules exceed the {max_candidates} limit")
    cands = np.zeros((comb(n, n_on), n), dtype=np.int8)
    for row, on in enumerate(combinations(range(n), n_on)):
        cands[row, list(on)] = 1
    traces = np.empty(cands.shape)
    T = np.full(len(cands), pop.T0[j], dtype=float)
    for k in range(n):
        T = pop.psi[j] * T + pop.gamma[j] * cands[:, k] + pop.upsilon[j, k]
        traces[:, k] = T
    ok = np.all((traces >= pop.lower[j] - tol) & (traces <= pop.upper[j] + tol), axis=1)
    return cands[ok]


def unilateral_cost_changes(pop: Population, state: SystemState, j: int, candidates) -> np.ndarray:
    """Exact change in total cost if household ``j`` alone switched to each candidate."""
    p = pop.rated_power[j] * KW_TO_MW
    cur = pop.schedule[j].astype(float)
    D_other = state.aggregate_demand - p * cur
    diff = np.asarray(candidates, dtype=float) - cur
    a, b = state.coeffs.a, state.coeffs.b
    per_step = p * diff * (a * D_other + b + 0.5 * a * p * (np.asarray(candidates) + cur))
    return per_step.sum(axis=1) * state.dt


def verify_equilibrium(pop: Population, state: SystemState, j: int, max_candidates: int = 200_000,
                       rtol: float = 1e-9) -> bool:
    """True iff no feasible equal-energy schedule of household ``j`` lowers total cost."""
    n_on = int(pop.schedule[j].sum())
    cands = feasible_schedules(pop, j, n_on, max_candidates)
    if len(cands) <= 1:
        return True
    dC = unilateral_cost_changes(pop, state, j, cands)
    scale = pop.rated_power[j] * KW_TO_MW * float(np.max(np.abs(state.price))) * state.dt
    return bool(np.all(dC >= -rtol * scale))
