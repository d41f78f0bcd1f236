"""Thermal comfort index and post-shift comfort compensation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InvalidParameterError
from .market import KW_TO_MW
from .thermal import BOUND_TOL, ComfortSpec, PropagationMatrices


@dataclass(frozen=True)
class ComfortAssessment:
    flexibility: np.ndarray
    index: float
    theta_a: np.ndarray
    theta_b: np.ndarray
    theta: np.ndarray
    comp_cost: np.ndarray  # GBP


def comfort_flexibility(comfort: ComfortSpec) -> np.ndarray:
    """Reciprocal of the allowed band width: narrow band, strict comfort."""
    width = np.asarray(comfort.upper, dtype=float) - np.asarray(comfort.lower, dtype=float)
    if np.any(~(width > 0)):
        raise InvalidParameterError("comfort band must have positive width")
    return 1.0 / width


def constant_flexibility(comfort: ComfortSpec, value: float = 1.0) -> np.ndarray:
    return np.full(comfort.n_steps, float(value))


def comfort_weights(comfort: ComfortSpec, flexibility) -> np.ndarray:
    """Flexibility masked to occupied steps; the reference is inactive when away."""
    return np.asarray(flexibility, dtype=float) * comfort.at_home


def comfort_index(trace, comfort: ComfortSpec, flexibility) -> float:
    """Negative weighted mean absolute deviation from the reference (<= 0)."""
    w = comfort_weights(comfort, flexibility)
    dev = np.abs(np.asarray(trace, dtype=float) - comfort.reference)
    return -float(np.sum(w * dev)) / len(w)


def theta_feasibility(schedule, trace, comfort: ComfortSpec, Gamma, tol: float = BOUND_TOL):
    """Where one extra ON step fits: heater OFF there and no later upper-bound breach.

    Returns ``(theta_a, theta_b, theta)``.
    """
    eps = np.asarray(schedule).astype(np.int8)
    Gamma = np.asarray(Gamma, dtype=float)
    theta_a = (1 - eps).astype(np.int8)
    head = (comfort.upper - np.asarray(trace, dtype=float) + tol)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(Gamma > 0, head / Gamma, np.inf)
    theta_hat = ratio.min(axis=0)
    theta_b = (np.minimum(1.0, np.floor(theta_hat)) >= 1.0).astype(np.int8)
    return theta_a, theta_b, (theta_a * theta_b).astype(np.int8)


def compensation_cost(price, theta, rated_power_kw: float, dt: float) -> np.ndarray:
    return rated_power_kw * KW_TO_MW * (np.asarray(price, dtype=float) * theta) * dt


def comfort_gains(trace, comfort: ComfortSpec, flexibility, Gamma) -> np.ndarray:
    """Comfort index change for switching the heater on at each step.

    The temperature at trace index ``k`` rises by ``Gamma[k, t0]``.
    """
    trace = np.asarray(trace, dtype=float)
    w = comfort_weights(comfort, flexibility)[:, None]
    ref = comfort.reference[:, None]
    before = np.abs(trace[:, None] - ref)
    after = np.abs(trace[:, None] + np.asarray(Gamma, dtype=float) - ref)
    return np.sum(w * (before - after), axis=0) / len(trace)


def comfort_gain(trace, comfort: ComfortSpec, flexibility, Gamma, t0: int) -> float:
    return float(comfort_gains(trace, comfort, flexibility, np.asarray(Gamma)[:, [t0]])[0])


def select_compensation(theta, comp_cost, shift_saving: float, gains) -> int | None:
    """Most comfort gained per pound among affordable, feasible, improving steps."""
    theta = np.asarray(theta)
    comp_cost = np.asarray(comp_cost, dtype=float)
    gains = np.asarray(gains, dtype=float)
    ok = (theta == 1) & (comp_cost < shift_saving) & (gains > 0)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(comp_cost > 0, gains / comp_cost, np.inf)
    ratio = np.where(ok, ratio, -np.inf)
    return int(np.argmax(ratio))


def apply_compensation(schedule, trace, mats: PropagationMatrices, t0: int):
    eps = np.array(schedule, dtype=np.int8)
    if eps[t0] != 0:
        raise ContractError(f"compensation at {t0} needs the heater OFF there")
    eps[t0] = 1
    return eps, np.array(trace, dtype=float) + mats.Gamma[:, t0]


def assess(schedule, trace, comfort: ComfortSpec, mats: PropagationMatrices, price, rated_power_kw: float,
           dt: float, flexibility=None) -> ComfortAssessment:
    if flexibility is None:
        flexibility = comfort_flexibility(comfort)
    ta, tb, th = theta_feasibility(schedule, trace, comfort, mats.Gamma)
    return ComfortAssessment(
        flexibility=np.asarray(flexibility, dtype=float),
        index=comfort_index(trace, comfort, flexibility),
        theta_a=ta, theta_b=tb, theta=th,
        comp_cost=compensation_cost(price, th, rated_power_kw, dt),
    )
