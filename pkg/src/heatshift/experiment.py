"""Experiment harness: configuration, case runs, metrics and result files.

A run samples one population, builds the baseline thermostat schedules, then
executes each requested case against the same baseline:

``baseline``        thermostat tracking, no arbitrage
``uncoordinated``   every household optimises against the frozen baseline price
``coordinated``     sequential best response with live prices
``comfort-a``       coordinated, demand shift only
``comfort-b``       coordinated with compensation, constant comfort flexibility
``comfort-c``       coordinated with compensation, band-derived flexibility
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__
from .coordinator import CoordinationConfig, comfort_weight_matrix, run_coordination
from .errors import InvalidParameterError, MetricsError
from .market import CostCoefficients, SystemState, marginal_price, total_cost
from .population import AWAKE, Population
from .scenario import (ASSUMPTIONS, Gaussian, OccupancyTemplate, PopulationSpec, SystemProfileConfig,
                       build_system_profile, prepare_baseline, sample_population, uncoordinated_schedules)

log = logging.getLogger(__name__)

CASES = ("baseline", "uncoordinated", "coordinated", "comfort-a", "comfort-b", "comfort-c")
MORNING_WINDOW = (4.0, 12.0)
EVENING_WINDOW = (16.0, 24.0)


@dataclass
class RunSettings:
    cases: list = field(default_factory=lambda: ["baseline", "uncoordinated", "coordinated"])
    seed: int = 0
    dt: float = 0.25  # h
    n_steps: int = 96
    max_passes: int = 100
    order: str = "fixed"
    flexibility: str = "time-varying"  # used by uncoordinated and coordinated
    compensation: bool = True  # used by uncoordinated and coordinated
    out_dir: str = "results"
    temperature_households: int = 4
    export_all_temperatures: bool = False
    # system profile and cost slope are quoted for this many households and
    # rescaled when the population is smaller or larger
    reference_households: int = 200_000
    scale_to_households: bool = True

    def __post_init__(self):
        unknown = [c for c in self.cases if c not in CASES]
        if unknown:
            raise InvalidParameterError(f"unknown case(s) {unknown}; choose from {list(CASES)}")
        if abs(self.dt * self.n_steps - 24.0) > 1e-9:
            raise InvalidParameterError("dt * n_steps must cover exactly 24 h")
        if self.order not in ("fixed", "random"):
            raise InvalidParameterError("order must be 'fixed' or 'random'")
        if self.flexibility not in ("time-varying", "constant"):
            raise InvalidParameterError("flexibility must be 'time-varying' or 'constant'")
        if self.max_passes < 1 or self.reference_households < 1:
            raise InvalidParameterError("max_passes and reference_households must be positive")


# population fields that are owned by ``run`` (one seed, one time grid)
_RUN_OWNED = ("rng_seed", "n_steps", "dt")


@dataclass
class ExperimentConfig:
    population: PopulationSpec = field(default_factory=PopulationSpec)
    occupancy: OccupancyTemplate = field(default_factory=OccupancyTemplate)
    cost: CostCoefficients = field(default_factory=CostCoefficients)
    system_profile: SystemProfileConfig = field(default_factory=SystemProfileConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        for name in _RUN_OWNED:
            value = {"rng_seed": self.run.seed, "n_steps": self.run.n_steps, "dt": self.run.dt}[name]
            setattr(self.population, name, value)
        self.system_profile.n_steps = self.run.n_steps
        self.system_profile.dt = self.run.dt

    def to_dict(self) -> dict:
        pop = asdict(self.population)
        for name in _RUN_OWNED:
            pop.pop(name)
        prof = self.system_profile.to_dict()
        prof.pop("n_steps")
        prof.pop("dt")
        return {
            "population": pop,
            "occupancy": {"segments": [list(s) for s in self.occupancy.segments],
                          "bands": {k: list(v) for k, v in self.occupancy.bands.items()}},
            "cost": asdict(self.cost),
            "system_profile": prof,
            "run": asdict(self.run),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        known = {"population", "occupancy", "cost", "system_profile", "run"}
        extra = set(data) - known
        if extra:
            raise InvalidParameterError(f"unknown config section(s) {sorted(extra)}")

        def build(kind, section, skip=()):
            section = dict(section or {})
            allowed = {f.name for f in fields(kind)} - set(skip)
            bad = set(section) - allowed
            if bad:
                raise InvalidParameterError(f"unknown key(s) {sorted(bad)} for {kind.__name__}")
            return kind(**section)

        pop_section = dict(data.get("population") or {})
        for name in ("psi", "gamma", "rated_power"):
            if isinstance(pop_section.get(name), Mapping):
                pop_section[name] = Gaussian(**pop_section[name])
        return cls(
            population=build(PopulationSpec, pop_section, skip=_RUN_OWNED),
            occupancy=build(OccupancyTemplate, data.get("occupancy")),
            cost=build(CostCoefficients, data.get("cost")),
            system_profile=build(SystemProfileConfig, data.get("system_profile"), skip=("n_steps", "dt")),
            run=build(RunSettings, data.get("run")),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def config_hash(self) -> str:
        payload = self.to_dict()
        payload["run"].pop("out_dir")
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def default_config_dict() -> dict:
    return ExperimentConfig().to_dict()


@dataclass
class RunMetrics:
    cases: list
    total_cost_gbp: dict
    cost_reduction_pct: dict
    morning_peak_mw: dict
    evening_peak_mw: dict
    morning_shaving_pct: dict
    evening_shaving_pct: dict
    peak_windows_h: dict = field(default_factory=lambda: {"morning": list(MORNING_WINDOW),
                                                          "evening": list(EVENING_WINDOW)})
    convergence: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    passes: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)
    mean_temperature_c: dict = field(default_factory=dict)
    comfort_index: dict = field(default_factory=dict)
    awake_abs_deviation_c: dict = field(default_factory=dict)
    households: int = 0
    excluded_households: int = 0


def _window_peak(demand: np.ndarray, hours: np.ndarray, window) -> float:
    mask = (hours >= window[0]) & (hours < window[1])
    if not mask.any():
        raise MetricsError(f"no step starts inside the {window} h window")
    return float(demand[mask].max())


def compute_metrics(demand: Mapping[str, np.ndarray], coeffs: CostCoefficients, dt: float) -> RunMetrics:
    """Cost and peak figures of every case relative to ``demand['baseline']``.

    A step's demand is attributed to the hour at which the step starts.
    """
    if "baseline" not in demand:
        raise MetricsError("metrics are defined relative to the baseline case, which is missing")
    cases = list(demand)
    n = len(demand["baseline"])
    hours = np.arange(n) * dt
    cost = {c: total_cost(np.asarray(demand[c], dtype=float), coeffs, dt) for c in cases}
    morning = {c: _window_peak(np.asarray(demand[c]), hours, MORNING_WINDOW) for c in cases}
    evening = {c: _window_peak(np.asarray(demand[c]), hours, EVENING_WINDOW) for c in cases}

    def pct_drop(values):
        base = values["baseline"]
        return {c: (base - values[c]) / base * 100.0 for c in cases}

    return RunMetrics(
        cases=cases,
        total_cost_gbp=cost,
        cost_reduction_pct=pct_drop(cost),
        morning_peak_mw=morning,
        evening_peak_mw=evening,
        morning_shaving_pct=pct_drop(morning),
        evening_shaving_pct=pct_drop(evening),
    )


@dataclass
class CaseResult:
    name: str
    demand: np.ndarray
    price: np.ndarray
    mean_temperature: np.ndarray
    p10_temperature: np.ndarray
    p90_temperature: np.ndarray
    comfort_index: float
    awake_abs_deviation: float
    sample_traces: np.ndarray
    convergence: list = field(default_factory=list)  # (pass, cost, shifts, compensations)
    converged: bool | None = None
    passes: int | None = None
    violations: int = 0
    full_traces: np.ndarray | None = None


def population_comfort(pop: Population) -> tuple[float, float]:
    """Population-mean comfort index (band-derived flexibility) and awake-period
    mean absolute deviation from the reference."""
    dev = np.abs(pop.trace - pop.reference)
    w = comfort_weight_matrix(pop, "time-varying")
    index = -(w * dev).sum(axis=1) / pop.n_steps
    awake = pop.segment == AWAKE
    return float(index.mean()), float(dev[awake].mean())


def _summarise(name, pop, state, coeffs, sample_idx, keep_full=False, **extra) -> CaseResult:
    index, awake_dev = population_comfort(pop)
    p10, p90 = np.percentile(pop.trace, [10, 90], axis=0)
    return CaseResult(
        name=name,
        demand=state.aggregate_demand.copy(),
        price=np.asarray(marginal_price(state.aggregate_demand, coeffs), dtype=float),
        mean_temperature=pop.trace.mean(axis=0),
        p10_temperature=p10,
        p90_temperature=p90,
        comfort_index=index,
        awake_abs_deviation=awake_dev,
        sample_traces=pop.trace[sample_idx].copy(),
        full_traces=pop.trace.copy() if keep_full else None,
        **extra,
    )


_CASE_SETTINGS = {
    "coordinated": None,  # taken from RunSettings
    "comfort-a": (False, "time-varying"),
    "comfort-b": (True, "constant"),
    "comfort-c": (True, "time-varying"),
}


@dataclass
class Experiment:
    """Everything a run produced, before it is written to disk."""

    config: ExperimentConfig
    population: Population
    excluded: np.ndarray
    coeffs: CostCoefficients
    net_demand: np.ndarray
    scale: float
    sample_idx: np.ndarray
    results: dict
    metrics: RunMetrics


def prepare(config: ExperimentConfig):
    """Sample the population, attach baseline schedules and build the system profile."""
    run = config.run
    H = config.population.household_count
    scale = H / run.reference_households if run.scale_to_households else 1.0
    pop = sample_population(config.population, config.occupancy)
    pop, excluded = prepare_baseline(pop)
    if pop.n_households == 0:
        raise InvalidParameterError("every household is infeasible under the configured bounds")
    non_heat, res = build_system_profile(config.system_profile)
    coeffs = CostCoefficients(a=config.cost.a / scale, b=config.cost.b)
    state = SystemState.from_schedules(pop.schedule, pop.rated_power, non_heat * scale, res * scale, coeffs,
                                       dt=run.dt, allow_negative=config.system_profile.allow_negative_net)
    return pop, excluded, coeffs, state, scale


def run_experiment(config: ExperimentConfig, out_dir=None, write: bool = True) -> Experiment:
    run = config.run
    t_start = time.perf_counter()
    base_pop, excluded, coeffs, base_state, scale = prepare(config)
    log.info("%d households (%d excluded), scale %.4g", base_pop.n_households, len(excluded), scale)
    pick_rng = np.random.default_rng([run.seed, 1])
    k = min(run.temperature_households, base_pop.n_households)
    sample_idx = np.sort(pick_rng.choice(base_pop.n_households, size=k, replace=False))

    cases = ["baseline"] + [c for c in dict.fromkeys(run.cases) if c != "baseline"]
    results = {}
    for case in cases:
        t0 = time.perf_counter()
        pop = base_pop.fork()
        state = base_state.copy()
        extra = {}
        if case == "uncoordinated":
            info = uncoordinated_schedules(pop, base_state.price.copy(), compensation=run.compensation,
                                           flexibility=run.flexibility)
            state = SystemState.from_schedules(pop.schedule, pop.rated_power, base_state.non_heat_demand,
                                               base_state.res_output, coeffs, dt=run.dt,
                                               allow_negative=base_state.allow_negative)
            extra["violations"] = info["violations"]
        elif case != "baseline":
            settings = _CASE_SETTINGS[case]
            compensation, flexibility = settings or (run.compensation, run.flexibility)
            cfg = CoordinationConfig(max_passes=run.max_passes, order=run.order, seed=run.seed,
                                     compensation=compensation, flexibility=flexibility, record_shifts=False)
            outcome = run_coordination(pop, state, cfg)
            rows = [(0, outcome.initial_cost, 0, 0)] + list(outcome.convergence_rows())
            extra.update(convergence=rows, converged=outcome.converged, passes=outcome.pass_count,
                         violations=outcome.violations)
        results[case] = _summarise(case, pop, state, coeffs, sample_idx, run.export_all_temperatures, **extra)
        log.info("case %s done in %.1f s", case, time.perf_counter() - t0)
        del pop

    metrics = compute_metrics({c: r.demand for c, r in results.items()}, coeffs, run.dt)
    metrics.households = base_pop.n_households
    metrics.excluded_households = int(len(excluded))
    for c, r in results.items():
        metrics.mean_temperature_c[c] = r.mean_temperature.tolist()
        metrics.comfort_index[c] = r.comfort_index
        metrics.awake_abs_deviation_c[c] = r.awake_abs_deviation
        metrics.violations[c] = r.violations
        if r.passes is not None:
            metrics.passes[c] = r.passes
            metrics.converged[c] = r.converged
            metrics.convergence[c] = [{"pass": p, "total_cost_gbp": cost, "shifts": s, "compensations": m}
                                      for p, cost, s, m in r.convergence]
    exp = Experiment(config, base_pop, excluded, coeffs, base_state.net_demand, scale, sample_idx, results, metrics)
    if write:
        write_outputs(exp, Path(out_dir or run.out_dir))
    log.info("experiment finished in %.1f s", time.perf_counter() - t_start)
    return exp


def _num(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_outputs(exp: Experiment, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    dt = exp.config.run.dt
    cases = list(exp.results)
    n = exp.config.run.n_steps
    start_hours = np.arange(n) * dt
    end_hours = (np.arange(n) + 1) * dt

    _write_csv(out / "aggregate_demand.csv", ["t_index", "hour"] + [f"D_{c}" for c in cases],
               ([t, _num(start_hours[t])] + [_num(exp.results[c].demand[t]) for c in cases] for t in range(n)))
    _write_csv(out / "prices.csv", ["t_index", "hour"] + [f"p_{c}" for c in cases],
               ([t, _num(start_hours[t])] + [_num(exp.results[c].price[t]) for c in cases] for t in range(n)))
    _write_csv(out / "convergence.csv", ["case", "pass", "total_cost_gbp", "shifts", "compensations"],
               ([c, p, _num(cost), s, m] for c in cases for p, cost, s, m in exp.results[c].convergence))

    pop = exp.population
    header = ["case", "household_id", "t_index", "temp_c", "ref_c", "lower_c", "upper_c"]

    def temp_rows(case, idx, traces):
        for row, j in enumerate(idx):
            for t in range(n):
                ref = _num(pop.reference[j, t]) if pop.at_home[j, t] else ""
                yield [case, int(pop.ids[j]), t, _num(traces[row, t]), ref,
                       _num(pop.lower[j, t]), _num(pop.upper[j, t])]

    _write_csv(out / "household_temps.csv", header,
               (r for c in cases for r in temp_rows(c, exp.sample_idx, exp.results[c].sample_traces)))
    if exp.config.run.export_all_temperatures:
        everyone = np.arange(pop.n_households)
        _write_csv(out / "household_temps_all.csv", header,
                   (r for c in cases for r in temp_rows(c, everyone, exp.results[c].full_traces)))

    cols = [f"{c}_{stat}" for c in cases for stat in ("mean", "p10", "p90")]
    _write_csv(out / "mean_temperature.csv", ["t_index", "hour"] + cols,
               ([t, _num(end_hours[t])] + [_num(getattr(exp.results[c], f"{stat}_temperature")[t])
                                           for c in cases for stat in ("mean", "p10", "p90")]
                for t in range(n)))

    payload = asdict(exp.metrics)
    payload.update(
        config_hash=exp.config.config_hash(),
        seed=exp.config.run.seed,
        assumptions=dict(ASSUMPTIONS, peak_windows="demand of a step counts at its start hour; "
                         "morning 04-12 h and evening 16-24 h, end excluded"),
        scale_factor=exp.scale,
        effective_cost_coefficients=asdict(exp.coeffs),
        package_version=__version__,
        generated_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def recompute_from_csv(out: Path, coeffs: CostCoefficients, dt: float) -> RunMetrics:
    """Metrics rebuilt from ``aggregate_demand.csv`` alone (consistency check)."""
    with open(Path(out) / "aggregate_demand.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    cases = [k[2:] for k in rows[0] if k.startswith("D_")]
    demand = {c: np.array([float(r[f"D_{c}"]) for r in rows]) for c in cases}
    return compute_metrics(demand, coeffs, dt)


__all__ = [
    "CASES",
    "CaseResult",
    "Experiment",
    "ExperimentConfig",
    "RunMetrics",
    "RunSettings",
    "compute_metrics",
    "default_config_dict",
    "population_comfort",
    "recompute_from_csv",
    "run_experiment",
]
