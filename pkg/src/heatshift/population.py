"""Array container for a population of households.

Large runs keep every household in stacked ``(H, N)`` arrays so the compiled
kernels can sweep them without Python objects in the loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .thermal import ComfortSpec, PropagationMatrices, ThermalParams, build_propagation_matrices

SLEEP, AWAKE, AWAY = 0, 1, 2
SEGMENT_NAMES = {SLEEP: "sleep", AWAKE: "awake", AWAY: "away"}


@dataclass
class Population:
    psi: np.ndarray
    gamma: np.ndarray
    rated_power: np.ndarray  # kW
    T0: np.ndarray
    upsilon: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    reference: np.ndarray
    at_home: np.ndarray
    segment: np.ndarray
    dt: float = 0.25
    schedule: np.ndarray | None = None
    trace: np.ndarray | None = None
    ids: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.ids is None:
            self.ids = np.arange(len(self.psi))

    @property
    def n_households(self) -> int:
        return len(self.psi)

    @property
    def n_steps(self) -> int:
        return self.upsilon.shape[1]

    @classmethod
    def from_households(cls, params: list[ThermalParams], comforts: list[ComfortSpec], T0, schedules=None,
                        segment=None) -> "Population":
        H = len(params)
        n = params[0].n_steps
        pop = cls(
            psi=np.array([p.psi for p in params]),
            gamma=np.array([p.gamma for p in params]),
            rated_power=np.array([p.rated_power for p in params]),
            T0=np.broadcast_to(np.asarray(T0, dtype=float), (H,)).copy(),
            upsilon=np.stack([p.upsilon for p in params]),
            lower=np.stack([c.lower for c in comforts]),
            upper=np.stack([c.upper for c in comforts]),
            reference=np.stack([c.reference for c in comforts]),
            at_home=np.stack([c.at_home for c in comforts]),
            segment=(np.full((H, n), AWAKE, dtype=np.int8) if segment is None
                     else np.asarray(segment, dtype=np.int8).reshape(H, n)),
            dt=params[0].dt,
        )
        if schedules is not None:
            pop.set_schedules(schedules)
        return pop

    def household(self, j: int) -> tuple[ThermalParams, ComfortSpec]:
        params = ThermalParams(float(self.psi[j]), float(self.gamma[j]), self.upsilon[j],
                               float(self.rated_power[j]), self.dt)
        comfort = ComfortSpec(self.lower[j], self.upper[j], self.reference[j], self.at_home[j])
        return params, comfort

    def matrices(self, j: int) -> PropagationMatrices:
        return build_propagation_matrices(self.household(j)[0])

    def propagate(self, schedule) -> np.ndarray:
        """Temperature traces of every household under ``schedule`` (step recursion)."""
        schedule = np.asarray(schedule)
        trace = np.empty(self.upsilon.shape)
        T = self.T0.astype(float).copy()
        for k in range(self.n_steps):
            T = self.psi * T + self.gamma * schedule[:, k] + self.upsilon[:, k]
            trace[:, k] = T
        return trace

    def set_schedules(self, schedule) -> None:
        self.schedule = np.ascontiguousarray(schedule, dtype=np.int8).reshape(self.upsilon.shape).copy()
        self.trace = self.propagate(self.schedule)

    def bound_violations(self, tol: float = 1e-9) -> np.ndarray:
        """Per-household count of trace entries outside the band."""
        bad = (self.trace < self.lower - tol) | (self.trace > self.upper + tol)
        return bad.sum(axis=1)

    def select(self, mask) -> "Population":
        idx = np.flatnonzero(np.asarray(mask)) if np.asarray(mask).dtype == bool else np.asarray(mask)
        take = {name: getattr(self, name)[idx] for name in
                ("psi", "gamma", "rated_power", "T0", "upsilon", "lower", "upper", "reference", "at_home",
                 "segment", "ids")}
        for name in ("schedule", "trace"):
            value = getattr(self, name)
            take[name] = None if value is None else value[idx].copy()
        return replace(self, **take)

    def copy(self) -> "Population":
        return self.select(np.arange(self.n_households))

    def fork(self) -> "Population":
        """Share the (read-only) parameter arrays, copy only schedules and traces."""
        return replace(self,
                       schedule=None if self.schedule is None else self.schedule.copy(),
                       trace=None if self.trace is None else self.trace.copy())
