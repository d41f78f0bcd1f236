"""First-order thermal model of a heated household.

Indexing convention used throughout the package: ``schedule[k]`` is the
heater status during step ``k`` and ``trace[k]`` is the indoor temperature
at the *end* of that step, so ``trace[k]`` depends on ``schedule[:k + 1]``.
Bounds and reference vectors are aligned with ``trace``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

#: absolute slack (degC) applied to every temperature-bound comparison
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class ThermalParams:
    """Discrete-time thermal parameters of one household.

    ``T[k+1] = psi * T[k] + gamma * eps[k] + upsilon[k]``
    """

    psi: float
    gamma: float
    upsilon: np.ndarray
    rated_power: float  # kW
    dt: float = 0.25  # h

    def __post_init__(self):
        ups = np.asarray(self.upsilon, dtype=float)
        object.__setattr__(self, "upsilon", ups)
        if ups.ndim != 1 or ups.size == 0:
            raise InvalidParameterError("upsilon must be a non-empty vector")
        if not 0.0 < self.psi < 1.0:
            raise InvalidParameterError(f"psi must lie in (0, 1), got {self.psi}")
        if self.gamma <= 0 or self.rated_power <= 0 or self.dt <= 0:
            raise InvalidParameterError("gamma, rated_power and dt must be positive")

    @property
    def n_steps(self) -> int:
        return self.upsilon.size


@dataclass(frozen=True)
class ComfortSpec:
    """Per-step temperature band, reference and occupancy of one household."""

    lower: np.ndarray
    upper: np.ndarray
    reference: np.ndarray
    at_home: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        ref = np.asarray(self.reference, dtype=float)
        home = np.asarray(self.at_home, dtype=bool)
        if not (lo.shape == hi.shape == ref.shape == home.shape):
            raise InvalidParameterError("comfort vectors must share one length")
        if np.any(~(lo < hi)):
            raise InvalidParameterError("lower bound must be below upper bound")
        for name, value in zip(("lower", "upper", "reference", "at_home"), (lo, hi, ref, home)):
            object.__setattr__(self, name, value)

    @classmethod
    def from_bounds(cls, lower, upper, at_home=None) -> "ComfortSpec":
        """Build a spec whose reference is the band midpoint."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if at_home is None:
            at_home = np.ones(lower.shape, dtype=bool)
        with np.errstate(invalid="ignore"):
            reference = 0.5 * (lower + upper)
        reference = np.where(np.isfinite(reference), reference, 0.0)
        return cls(lower, upper, reference, at_home)

    @property
    def n_steps(self) -> int:
        return self.lower.size


@dataclass(frozen=True)
class PropagationMatrices:
    """Compact form ``T = Psi * T0 + Gamma @ eps + Upsilon``."""

    Psi: np.ndarray
    Gamma: np.ndarray
    Upsilon: np.ndarray
    psi: float = field(default=0.0)
    gamma: float = field(default=0.0)


def derive_discrete_params(c_eq, k_eq, outdoor_temp, rated_power, passive_gain, dt=0.25) -> ThermalParams:
    """Exact zero-order-hold discretisation of the 1R1C model.

    ``c_eq`` in kWh/degC, ``k_eq`` in kW/degC, powers in kW, ``dt`` in hours.
    The lossless limit (``psi == 1``) is not a valid ThermalParams; use
    :func:`discrete_coefficients` to inspect it.
    """
    psi, gamma, upsilon = discrete_coefficients(c_eq, k_eq, outdoor_temp, rated_power, passive_gain, dt)
    return ThermalParams(psi=psi, gamma=gamma, upsilon=upsilon, rated_power=rated_power, dt=dt)


def discrete_coefficients(c_eq, k_eq, outdoor_temp, rated_power, passive_gain, dt=0.25):
    """Return ``(psi, gamma, upsilon)`` without range validation."""
    if not (c_eq > 0 and k_eq > 0 and dt > 0):
        raise InvalidParameterError("c_eq, k_eq and dt must be positive")
    outdoor_temp = np.asarray(outdoor_temp, dtype=float)
    passive_gain = np.broadcast_to(np.asarray(passive_gain, dtype=float), outdoor_temp.shape)
    psi = float(np.exp(-k_eq * dt / c_eq))
    decay = -np.expm1(-k_eq * dt / c_eq)  # 1 - psi without cancellation
    gamma = float(decay * rated_power / k_eq)
    upsilon = decay * (outdoor_temp + passive_gain / k_eq)
    return psi, gamma, upsilon


def step_temperature(T_t: float, eps_t: int, params: ThermalParams, t: int) -> float:
    return params.psi * T_t + params.gamma * eps_t + params.upsilon[t]


def psi_powers(psi: float, n: int) -> np.ndarray:
    """``[psi**0, psi**1, ..., psi**(n-1)]`` by repeated multiplication."""
    out = np.empty(n)
    acc = 1.0
    for i in range(n):
        out[i] = acc
        acc *= psi
    return out


def build_propagation_matrices(params: ThermalParams) -> PropagationMatrices:
    n = params.n_steps
    pw = psi_powers(params.psi, n + 1)
    lag = np.arange(n)[:, None] - np.arange(n)[None, :]
    Gamma = np.where(lag >= 0, params.gamma * pw[np.clip(lag, 0, n)], 0.0)
    Upsilon = np.empty(n)
    acc = 0.0
    for k in range(n):
        acc = params.psi * acc + params.upsilon[k]
        Upsilon[k] = acc
    return PropagationMatrices(Psi=pw[1:].copy(), Gamma=Gamma, Upsilon=Upsilon, psi=params.psi, gamma=params.gamma)


def propagate(T0: float, schedule, mats: PropagationMatrices) -> np.ndarray:
    schedule = np.asarray(schedule, dtype=float)
    if schedule.shape != mats.Upsilon.shape:
        raise InvalidParameterError("schedule length does not match the horizon")
    return mats.Psi * T0 + mats.Gamma @ schedule + mats.Upsilon


def simulate(T0: float, schedule, params: ThermalParams) -> np.ndarray:
    """Step-by-step recursion; the reference against which :func:`propagate` is checked."""
    trace = np.empty(params.n_steps)
    T = T0
    for t, eps in enumerate(np.asarray(schedule)):
        T = step_temperature(T, int(eps), params, t)
        trace[t] = T
    return trace


def check_bounds(trace, comfort: ComfortSpec, tol: float = BOUND_TOL) -> tuple[bool, int | None]:
    """Closed-interval bound check; returns ``(ok, first_violating_index)``."""
    trace = np.asarray(trace, dtype=float)
    bad = (trace < comfort.lower - tol) | (trace > comfort.upper + tol)
    if not bad.any():
        return True, None
    return False, int(np.argmax(bad))
