"""Demand shift: moving one ON step of a household to an OFF step.

All matrices are indexed ``[t1, t2]`` meaning "shift the heater load from
step ``t1`` to step ``t2``".  These full-matrix routines are the readable
reference path; :mod:`heatshift._kernels` holds the compiled search used in
large runs and is tested against them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .market import KW_TO_MW, price_difference_matrix
from .thermal import BOUND_TOL, ComfortSpec, PropagationMatrices


@dataclass(frozen=True)
class ShiftFeasibility:
    sigma_a: np.ndarray
    sigma_b: np.ndarray
    sigma_c: np.ndarray
    sigma: np.ndarray
    savings: np.ndarray  # GBP


def sigma_status(schedule) -> np.ndarray:
    eps = np.asarray(schedule).astype(np.int8)
    return np.maximum(0, eps[:, None] - eps[None, :]).astype(np.int8)


def shift_deltas(Gamma: np.ndarray) -> np.ndarray:
    """``delta[k, t1, t2] = Gamma[k, t2] - Gamma[k, t1]``: temperature change at
    trace index ``k`` caused by the shift ``t1 -> t2``."""
    return Gamma[:, None, :] - Gamma[:, :, None]


def sigma_temperature(trace, comfort: ComfortSpec, Gamma: np.ndarray, tol: float = BOUND_TOL) -> np.ndarray:
    """Temperature-bound feasibility of every shift, in ratio form.

    For each affected step the admissible margin is divided by the
    temperature change: headroom to the upper bound where the shift warms
    the room, margin to the lower bound where it cools it.  The shift is
    feasible when the smallest ratio is at least one.
    """
    trace = np.asarray(trace, dtype=float)
    delta = shift_deltas(np.asarray(Gamma, dtype=float))
    head = (comfort.upper - trace + tol)[:, None, None]
    foot = (comfort.lower - trace - tol)[:, None, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(delta > 0, head / delta, np.where(delta < 0, foot / delta, np.inf))
    sigma_hat = ratio.min(axis=0)
    out = (np.minimum(1.0, np.floor(sigma_hat)) >= 1.0).astype(np.int8)
    np.fill_diagonal(out, 0)
    return out


def sigma_cost_saving(aggregate_demand, rated_power_kw: float) -> np.ndarray:
    """Shifts that keep ``D[t1] >= D[t2]`` after the move (price order preserved)."""
    D = np.asarray(aggregate_demand, dtype=float)
    hat = (D[:, None] - D[None, :]) / (2.0 * rated_power_kw * KW_TO_MW)
    out = (np.floor(hat) >= 1.0).astype(np.int8)
    np.fill_diagonal(out, 0)
    return out


def compose_and_price(sigma_a, sigma_b, sigma_c, Pi, rated_power_kw: float, dt: float) -> ShiftFeasibility:
    sigma = (np.asarray(sigma_a) * np.asarray(sigma_b) * np.asarray(sigma_c)).astype(np.int8)
    savings = rated_power_kw * KW_TO_MW * (np.asarray(Pi, dtype=float) * sigma) * dt
    return ShiftFeasibility(np.asarray(sigma_a), np.asarray(sigma_b), np.asarray(sigma_c), sigma, savings)


def select_best_shift(feas: ShiftFeasibility) -> tuple[int, int] | None:
    """Argmax of the saving matrix; ``None`` if no strictly positive saving.

    Row-major argmax gives the smallest ``t1`` then smallest ``t2`` on ties.
    """
    flat = int(np.argmax(feas.savings))
    n = feas.savings.shape[1]
    if feas.savings.flat[flat] <= 0:
        return None
    return flat // n, flat % n


def apply_shift(schedule, trace, mats: PropagationMatrices, t1: int, t2: int):
    """Return ``(schedule, trace)`` after moving the load from ``t1`` to ``t2``."""
    eps = np.array(schedule, dtype=np.int8)
    if eps[t1] != 1 or eps[t2] != 0:
        raise ContractError(f"shift {t1}->{t2} needs ON at t1 and OFF at t2")
    eps[t1], eps[t2] = 0, 1
    new_trace = np.array(trace, dtype=float) + mats.Gamma[:, t2] - mats.Gamma[:, t1]
    return eps, new_trace


def shift_feasibility(schedule, trace, comfort: ComfortSpec, mats: PropagationMatrices, aggregate_demand,
                      price, rated_power_kw: float, dt: float, use_sigma_c: bool = True) -> ShiftFeasibility:
    """All four feasibility matrices plus the saving matrix for one household."""
    n = len(schedule)
    sa = sigma_status(schedule)
    sb = sigma_temperature(trace, comfort, mats.Gamma)
    sc = sigma_cost_saving(aggregate_demand, rated_power_kw) if use_sigma_c else 1 - np.eye(n, dtype=np.int8)
    return compose_and_price(sa, sb, sc, price_difference_matrix(price), rated_power_kw, dt)
