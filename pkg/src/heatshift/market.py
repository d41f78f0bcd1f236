"""Quadratic generation cost, marginal price and demand bookkeeping.

Household powers are in kW; every system-level quantity is in MW and the
conversion happens once, in :func:`heating_demand_mw`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, StateCorruptionError

KW_TO_MW = 1e-3


@dataclass(frozen=True)
class CostCoefficients:
    a: float = 0.03  # GBP / MW^2 h
    b: float = 12.0  # GBP / MWh

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise InvalidParameterError("cost coefficients must be non-negative")


def marginal_price(D, coeffs: CostCoefficients):
    """Price in GBP/MWh; no ``dt`` factor (that enters only energy costs)."""
    p = coeffs.a * np.asarray(D, dtype=float) + coeffs.b
    return float(p) if p.ndim == 0 else p


def total_cost(D, coeffs: CostCoefficients, dt: float) -> float:
    D = np.asarray(D, dtype=float)
    return float(np.sum(0.5 * coeffs.a * D * D + coeffs.b * D) * dt)


def price_difference_matrix(price) -> np.ndarray:
    """``Pi[t1, t2] = p[t1] - p[t2]``."""
    price = np.asarray(price, dtype=float)
    return price[:, None] - price[None, :]


def heating_demand_mw(schedules, rated_power_kw) -> np.ndarray:
    """Per-step heating demand in MW from an ``(H, N)`` schedule array."""
    schedules = np.atleast_2d(np.asarray(schedules))
    rated = np.asarray(rated_power_kw, dtype=float).reshape(-1)
    return (rated * KW_TO_MW) @ schedules.astype(float)


@dataclass
class SystemState:
    """Mutable system bookkeeping. Only the coordinator writes to it."""

    non_heat_demand: np.ndarray
    res_output: np.ndarray
    net_demand: np.ndarray
    aggregate_demand: np.ndarray
    price: np.ndarray
    coeffs: CostCoefficients
    dt: float = 0.25
    allow_negative: bool = False

    @classmethod
    def from_schedules(cls, schedules, rated_power_kw, non_heat_demand, res_output=None,
                       coeffs: CostCoefficients | None = None, dt: float = 0.25,
                       allow_negative: bool = False) -> "SystemState":
        """Batch evaluation of the demand balance over all households."""
        coeffs = coeffs or CostCoefficients()
        non_heat = np.asarray(non_heat_demand, dtype=float).copy()
        res = np.zeros_like(non_heat) if res_output is None else np.asarray(res_output, dtype=float).copy()
        net = non_heat - res
        heat = heating_demand_mw(schedules, rated_power_kw) if np.size(schedules) else np.zeros_like(net)
        D = heat + net
        if not allow_negative and np.any(D < 0):
            raise StateCorruptionError("aggregate demand is negative")
        return cls(non_heat, res, net, D, marginal_price(D, coeffs), coeffs, dt, allow_negative)

    @property
    def n_steps(self) -> int:
        return self.aggregate_demand.size

    def total_cost(self) -> float:
        return total_cost(self.aggregate_demand, self.coeffs, self.dt)

    def copy(self) -> "SystemState":
        return SystemState(self.non_heat_demand.copy(), self.res_output.copy(), self.net_demand.copy(),
                           self.aggregate_demand.copy(), self.price.copy(), self.coeffs, self.dt,
                           self.allow_negative)


def update_after_schedule_change(state: SystemState, t_indices, power_deltas) -> SystemState:
    """Add ``power_deltas`` (MW) at ``t_indices`` and reprice only those steps.

    Mutates and returns ``state``.
    """
    idx = np.atleast_1d(np.asarray(t_indices, dtype=np.intp))
    deltas = np.broadcast_to(np.asarray(power_deltas, dtype=float), idx.shape)
    new = state.aggregate_demand.copy()
    np.add.at(new, idx, deltas)
    if not state.allow_negative and np.any(new[idx] < -1e-9):
        bad = idx[new[idx] < -1e-9]
        raise StateCorruptionError(f"aggregate demand would become negative at steps {bad.tolist()}")
    state.aggregate_demand[idx] = new[idx]
    state.price[idx] = state.coeffs.a * state.aggregate_demand[idx] + state.coeffs.b
    return state
