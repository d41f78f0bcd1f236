"""Stochastic household population, occupancy templates and reference schedules.

Template numbers here are assumptions: the population figures they stand in
for are only available as plots.  Every default is listed in
:data:`ASSUMPTIONS` and carried into the run metadata.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .coordinator import comfort_weight_matrix
from .errors import InfeasibleHouseholdError, InvalidParameterError
from .population import AWAKE, AWAY, SLEEP, Population
from .thermal import BOUND_TOL, ComfortSpec, ThermalParams

log = logging.getLogger(__name__)

SEGMENT_CODES = {"sleep": SLEEP, "awake": AWAKE, "away": AWAY}

ASSUMPTIONS = {
    "occupancy_template": "sleep 23-07 [16,20] C, awake 07-09 and 17-23 [19,22] C, away 09-17 [5,30] C",
    "rated_power": "Gaussian(18 kW, 1.8 kW)",
    "gamma_distribution": "second 'sd 0.1 for psi' read as the gamma distribution",
    "clipping": "sampled values clipped to limits placed symmetrically about the mean",
    "thermal_drive": "upsilon = (1 - psi) * (14 - 4 cos(2 pi (h - 14) / 24) C + N(0, 1) per step)",
    "band_width_floor": "bounds redrawn until the band is at least min_band_width wide",
    "non_heat_demand": "double-peak curve (07:30, 17:30) over a low base, scaled to a daily energy; RES = 0",
    "baseline_search": "thermostat backtracks when its preferred status leads to an unavoidable bound violation",
    "infeasible_households": "households with no bound-respecting schedule are excluded",
    "population_scaling": "non-heat demand scales with household count and the cost slope a inversely",
}


@dataclass
class Gaussian:
    mean: float
    sd: float
    lo: float = -np.inf
    hi: float = np.inf

    def draw(self, rng, size=None):
        return np.clip(rng.normal(self.mean, self.sd, size), self.lo, self.hi)


@dataclass
class OccupancyTemplate:
    """Day segments as ``(kind, mean start hour)``; each runs until the next start."""

    segments: list = field(default_factory=lambda: [
        ("awake", 7.0), ("away", 9.0), ("awake", 17.0), ("sleep", 23.0)])
    bands: dict = field(default_factory=lambda: {
        "sleep": (16.0, 20.0), "awake": (19.0, 22.0), "away": (5.0, 30.0)})

    def __post_init__(self):
        self.segments = [(str(k), float(h)) for k, h in self.segments]
        self.bands = {k: tuple(map(float, v)) for k, v in self.bands.items()}
        starts = [h for _, h in self.segments]
        if any(b <= a for a, b in zip(starts, starts[1:])) or starts[-1] - starts[0] >= 24:
            raise InvalidParameterError("segment start hours must increase within one day")
        for kind, _ in self.segments:
            if kind not in SEGMENT_CODES or kind not in self.bands:
                raise InvalidParameterError(f"unknown segment kind {kind!r}")
        width = {k: hi - lo for k, (lo, hi) in self.bands.items()}
        if not width["awake"] < width["sleep"] < width["away"]:
            raise InvalidParameterError("bands must widen from awake to sleep to away")


@dataclass
class PopulationSpec:
    household_count: int = 200_000
    # clip limits sit symmetrically about the mean so clipping leaves the mean intact
    psi: Gaussian = field(default_factory=lambda: Gaussian(0.94, 0.05, 0.8801, 0.9999))
    gamma: Gaussian = field(default_factory=lambda: Gaussian(2.0, 0.1, 0.5, 3.5))
    rated_power: Gaussian = field(default_factory=lambda: Gaussian(18.0, 1.8, 0.5, 35.5))
    # heater-off equilibrium temperature (degC) at hours 0..23, interpolated to
    # steps; a calibration knob, not an outdoor curve (it is warmest at 02:00)
    drive_template: list = field(default_factory=lambda: [
        round(14.0 - 4.0 * np.cos(2 * np.pi * (h - 14) / 24), 3) for h in range(24)])
    drive_sd: float = 1.0
    boundary_sd: float = 1.0  # h
    bound_sd: float = 1.0  # degC
    min_band_width: float = 2.5  # degC
    max_retries: int = 50
    rng_seed: int = 0
    n_steps: int = 96
    dt: float = 0.25

    def __post_init__(self):
        for name in ("psi", "gamma", "rated_power"):
            value = getattr(self, name)
            if isinstance(value, dict):
                setattr(self, name, Gaussian(**value))
        if self.household_count < 1:
            raise InvalidParameterError("household_count must be >= 1")
        sds = [self.psi.sd, self.gamma.sd, self.rated_power.sd, self.drive_sd, self.boundary_sd, self.bound_sd]
        if min(sds) < 0:
            raise InvalidParameterError("standard deviations must be non-negative")
        if len(self.drive_template) != 24:
            raise InvalidParameterError("drive_template needs 24 hourly values")


def _step_drive(spec: PopulationSpec) -> np.ndarray:
    hours = (np.arange(spec.n_steps) + 0.5) * spec.dt
    tmpl = np.asarray(spec.drive_template, dtype=float)
    return np.interp(hours, np.arange(25), np.append(tmpl, tmpl[0]))


def _segment_starts(template: OccupancyTemplate, spec: PopulationSpec, rng) -> np.ndarray:
    """Jittered segment start steps, strictly increasing within one day."""
    steps_per_hour = 1.0 / spec.dt
    mean = np.array([h for _, h in template.segments])
    for _ in range(spec.max_retries):
        starts = np.rint((mean + rng.normal(0.0, spec.boundary_sd, mean.size)) * steps_per_hour).astype(int)
        if np.all(np.diff(starts) >= 1) and starts[-1] - starts[0] <= spec.n_steps - 1:
            return starts
    raise InvalidParameterError("occupancy segments keep collapsing after jitter")


def _segment_labels(template: OccupancyTemplate, starts: np.ndarray, n: int) -> np.ndarray:
    """Segment code of every step; the last segment wraps round midnight."""
    codes = np.array([SEGMENT_CODES[k] for k, _ in template.segments])
    steps = np.arange(n)
    # position of each step within the cyclic ordering of starts
    rel = (steps[:, None] - starts[None, :]) % n
    return codes[np.argmin(rel, axis=1)].astype(np.int8)


def _draw_bands(template: OccupancyTemplate, spec: PopulationSpec, rng) -> dict:
    out = {}
    for kind in ("sleep", "awake", "away"):
        lo_m, hi_m = template.bands[kind]
        for _ in range(spec.max_retries):
            lo, hi = rng.normal([lo_m, hi_m], spec.bound_sd)
            if hi - lo >= spec.min_band_width:
                break
        else:
            raise InvalidParameterError(f"could not draw a {kind} band wider than {spec.min_band_width} C")
        out[kind] = (lo, hi)
    return out


def household_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for household ``index``, unaffected by population size."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def sample_population(spec: PopulationSpec, template: OccupancyTemplate | None = None) -> Population:
    template = template or OccupancyTemplate()
    H, n = spec.household_count, spec.n_steps
    drive = _step_drive(spec)
    arrays = {name: np.empty(H) for name in ("psi", "gamma", "rated_power", "T0")}
    for name in ("upsilon", "lower", "upper"):
        arrays[name] = np.empty((H, n))
    segment = np.empty((H, n), dtype=np.int8)
    for i in range(H):
        rng = household_rng(spec.rng_seed, i)
        psi = float(spec.psi.draw(rng))
        arrays["psi"][i] = psi
        arrays["gamma"][i] = spec.gamma.draw(rng)
        arrays["rated_power"][i] = spec.rated_power.draw(rng)
        arrays["upsilon"][i] = (1.0 - psi) * (drive + rng.normal(0.0, spec.drive_sd, n) if spec.drive_sd else drive)
        labels = _segment_labels(template, _segment_starts(template, spec, rng), n)
        bands = _draw_bands(template, spec, rng)
        for kind, code in SEGMENT_CODES.items():
            sel = labels == code
            arrays["lower"][i, sel], arrays["upper"][i, sel] = bands[kind]
        segment[i] = labels
    reference = 0.5 * (arrays["lower"] + arrays["upper"])
    arrays["T0"] = reference[:, 0].copy()
    return Population(reference=reference, at_home=segment != AWAY, segment=segment, dt=spec.dt, **arrays)


def _reachability(pop: Population):
    """Backward bounds on the temperature from which future bounds stay reachable."""
    H, n = pop.upsilon.shape
    R = np.empty((H, n))
    U = np.empty((H, n))
    R[:, -1] = pop.lower[:, -1]
    U[:, -1] = pop.upper[:, -1]
    for k in range(n - 2, -1, -1):
        R[:, k] = np.maximum(pop.lower[:, k], (R[:, k + 1] - pop.gamma - pop.upsilon[:, k + 1]) / pop.psi)
        U[:, k] = np.minimum(pop.upper[:, k], (U[:, k + 1] - pop.upsilon[:, k + 1]) / pop.psi)
    return R, U


def baseline_schedules(pop: Population, budget: int = 200_000, tol: float = BOUND_TOL):
    """Reference-tracking thermostat for every household.

    At home the heater picks whichever status lands closer to the reference;
    away it stays off unless that leads to a bound violation.  When the
    preferred status runs into a dead end later in the day the search
    backtracks, so a household is only reported infeasible when no schedule
    exists (or the node ``budget`` runs out).  Returns ``(schedule, feasible_mask)``.
    """
    R, U = _reachability(pop)
    H, n = pop.upsilon.shape
    eps = np.zeros((H, n), dtype=np.int8)
    feasible = np.all(R <= U + tol, axis=1)
    for j in np.flatnonzero(feasible):
        nodes = _kernels.thermostat_search(float(pop.T0[j]), float(pop.psi[j]), float(pop.gamma[j]),
                                           pop.upsilon[j], R[j], U[j], pop.reference[j], pop.at_home[j],
                                           tol, budget, eps[j])
        if nodes < 0:
            feasible[j] = False
            eps[j] = 0
    return eps, feasible


def baseline_schedule(params: ThermalParams, comfort: ComfortSpec, T0: float) -> np.ndarray:
    pop = Population.from_households([params], [comfort], [T0])
    eps, ok = baseline_schedules(pop)
    if not ok[0]:
        raise InfeasibleHouseholdError("temperature bounds are unreachable at rated power")
    return eps[0]


def prepare_baseline(pop: Population) -> tuple[Population, np.ndarray]:
    """Attach baseline schedules; drop (and report) households that cannot meet their bounds."""
    eps, ok = baseline_schedules(pop)
    pop.set_schedules(eps)
    ok &= pop.bound_violations() == 0
    if not ok.all():
        log.warning("%d of %d households cannot hold their bounds and are excluded",
                    int((~ok).sum()), pop.n_households)
    return pop.select(ok), np.flatnonzero(~ok)


def uncoordinated_schedules(pop: Population, frozen_prices, compensation: bool = True,
                            flexibility: str = "time-varying", max_moves: int | None = None,
                            tol: float = BOUND_TOL) -> dict:
    """Every household optimises its own bill against one fixed price profile.

    Mutates ``pop`` schedules/traces.  The demand-order filter is off: with a
    frozen price there is no feedback for it to protect.
    """
    n = pop.n_steps
    w = comfort_weight_matrix(pop, flexibility)
    moves = np.zeros(pop.n_households, dtype=np.int64)
    max_moves = max_moves or 4 * n
    violations, capped = _kernels.individual_fixed_points(
        pop.schedule, pop.trace, pop.lower, pop.upper, pop.reference, w, pop.psi, pop.gamma, pop.rated_power,
        np.ascontiguousarray(frozen_prices, dtype=float), pop.dt, compensation, tol, max_moves, moves)
    return {"moves": moves, "violations": int(violations), "capped": int(capped)}


@dataclass
class SystemProfileConfig:
    n_steps: int = 96
    dt: float = 0.25
    daily_energy_mwh: float = 5_000.0
    base_level: float = 0.1
    # (hour, width h, relative height) bumps on top of base_level
    peaks: list = field(default_factory=lambda: [[7.5, 1.0, 1.2], [17.5, 1.2, 2.0]])
    non_heat_mw: list | None = None
    res_mw: list | None = None
    allow_negative_net: bool = False

    def to_dict(self):
        return asdict(self)


def build_system_profile(config: SystemProfileConfig | None = None):
    """Non-heat demand and renewable output (MW) per step."""
    config = config or SystemProfileConfig()
    n = config.n_steps
    if config.non_heat_mw is not None:
        non_heat = np.asarray(config.non_heat_mw, dtype=float)
    else:
        hours = (np.arange(n) + 0.5) * config.dt
        shape = np.full(n, float(config.base_level))
        for centre, width, height in config.peaks:
            d = (hours - centre + 12.0) % 24.0 - 12.0
            shape += height * np.exp(-0.5 * (d / width) ** 2)
        non_heat = shape * config.daily_energy_mwh / (shape.sum() * config.dt)
    res = np.zeros(n) if config.res_mw is None else np.asarray(config.res_mw, dtype=float)
    if non_heat.shape != (n,) or res.shape != (n,):
        raise InvalidParameterError("profiles must have one value per step")
    if np.any(non_heat < 0) or np.any(res < 0):
        raise InvalidParameterError("demand and renewable output must be non-negative")
    if not config.allow_negative_net and np.any(non_heat - res < 0):
        raise InvalidParameterError("renewable output exceeds demand; set allow_negative_net to permit export")
    return non_heat, res
