import csv
import json

import numpy as np
import pytest

from heatshift.cli import main
from heatshift.errors import InvalidParameterError, MetricsError
from heatshift.experiment import (ExperimentConfig, RunSettings, compute_metrics, default_config_dict,
                                  recompute_from_csv, run_experiment)
from heatshift.market import CostCoefficients

C = CostCoefficients()


def small_config(tmp_path, households=400, cases=("baseline", "coordinated"), seed=3, **run):
    data = default_config_dict()
    data["population"]["household_count"] = households
    data["run"].update(cases=list(cases), seed=seed, out_dir=str(tmp_path / "out"), **run)
    return ExperimentConfig.from_dict(data)


def test_baseline_only_metrics_are_zero():
    D = np.linspace(100, 300, 96)
    m = compute_metrics({"baseline": D}, C, 0.25)
    assert m.cost_reduction_pct == {"baseline": 0.0}
    assert m.evening_shaving_pct == {"baseline": 0.0}


def test_identical_case_has_zero_deltas():
    D = np.linspace(100, 300, 96)
    m = compute_metrics({"baseline": D, "coordinated": D.copy()}, C, 0.25)
    assert m.cost_reduction_pct["coordinated"] == 0.0
    assert m.morning_shaving_pct["coordinated"] == 0.0


def test_evening_peak_shaving_example():
    base = np.full(96, 100.0)
    case = base.copy()
    base[70] = 500.0
    case[70] = 359.0
    m = compute_metrics({"baseline": base, "coordinated": case}, C, 0.25)
    assert m.evening_shaving_pct["coordinated"] == pytest.approx(28.2)
    assert m.morning_shaving_pct["coordinated"] == 0.0


def test_four_step_toy_by_hand():
    # steps start at 0, 6, 12 and 18 h; morning window holds step 1, evening step 3
    m = compute_metrics({"baseline": np.array([100.0, 200.0, 150.0, 300.0]),
                         "coordinated": np.array([150.0, 150.0, 200.0, 200.0])}, C, 6.0)
    assert m.total_cost_gbp["baseline"] == pytest.approx(68625.0)
    assert m.total_cost_gbp["coordinated"] == pytest.approx(61650.0)
    assert m.cost_reduction_pct["coordinated"] == pytest.approx(6975.0 / 68625.0 * 100)
    assert m.morning_shaving_pct["coordinated"] == pytest.approx(25.0)
    assert m.evening_shaving_pct["coordinated"] == pytest.approx(100.0 / 3)


def test_missing_baseline_is_a_metric_error():
    with pytest.raises(MetricsError):
        compute_metrics({"coordinated": np.ones(96)}, C, 0.25)


def test_config_round_trip_and_hash():
    cfg = ExperimentConfig()
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()
    assert again.config_hash() == cfg.config_hash()
    moved = ExperimentConfig.from_dict(dict(cfg.to_dict(), run=dict(cfg.to_dict()["run"], out_dir="elsewhere")))
    assert moved.config_hash() == cfg.config_hash()
    reseeded = ExperimentConfig.from_dict(dict(cfg.to_dict(), run=dict(cfg.to_dict()["run"], seed=9)))
    assert reseeded.config_hash() != cfg.config_hash()
    assert reseeded.population.rng_seed == 9


def test_config_rejects_unknown_keys_and_bad_values():
    data = default_config_dict()
    data["population"]["colour"] = "red"
    with pytest.raises(InvalidParameterError):
        ExperimentConfig.from_dict(data)
    with pytest.raises(InvalidParameterError):
        ExperimentConfig.from_dict({"extras": {}})
    with pytest.raises(InvalidParameterError):
        RunSettings(cases=["coordinated", "magic"])
    with pytest.raises(InvalidParameterError):
        RunSettings(dt=0.5)


def test_emit_default_config(capsys):
    assert main(["--emit-default-config"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert set(data) == {"population", "occupancy", "cost", "system_profile", "run"}
    assert data["cost"] == {"a": 0.03, "b": 12.0}
    assert ExperimentConfig.from_dict(data).to_dict() == data


def test_cli_rejects_out_of_range_seed(capsys):
    with pytest.raises(SystemExit):
        main(["--seed", str(2 ** 64), "--households", "10"])


def test_cli_writes_every_output(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"run": {"temperature_households": 3}}))
    out = tmp_path / "res"
    code = main(["--config", str(cfg_path), "--case", "coordinated", "--case", "uncoordinated", "--seed", "7",
                 "--out", str(out), "--households", "300", "--max-passes", "60"])
    assert code == 0
    assert "coordinated" in capsys.readouterr().out
    for name in ("aggregate_demand.csv", "prices.csv", "convergence.csv", "household_temps.csv",
                 "mean_temperature.csv", "metrics.json"):
        assert (out / name).is_file(), name
    with open(out / "aggregate_demand.csv", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t_index", "hour", "D_baseline", "D_coordinated", "D_uncoordinated"]
    assert len(rows) == 97
    with open(out / "household_temps.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"case", "household_id", "t_index", "temp_c", "ref_c", "lower_c", "upper_c"}
    assert len(rows) == 3 * 96 * 3
    with open(out / "convergence.csv", encoding="utf-8") as fh:
        conv = list(csv.DictReader(fh))
    assert conv[-1]["shifts"] == "0" and {r["case"] for r in conv} == {"coordinated"}

    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["seed"] == 7
    assert metrics["converged"]["coordinated"] is True
    assert metrics["violations"] == {"baseline": 0, "coordinated": 0, "uncoordinated": 0}
    assert "rated_power" in metrics["assumptions"]
    coeffs = CostCoefficients(**metrics["effective_cost_coefficients"])
    again = recompute_from_csv(out, coeffs, 0.25)
    for key in ("cost_reduction_pct", "morning_shaving_pct", "evening_shaving_pct"):
        for case, value in getattr(again, key).items():
            assert round(value, 2) == round(metrics[key][case], 2)


def test_household_count_rescales_cost_and_profile(tmp_path):
    exp = run_experiment(small_config(tmp_path, households=200, cases=("baseline",)), write=False)
    assert exp.scale == pytest.approx(200 / 200_000)
    assert exp.coeffs.a == pytest.approx(0.03 / exp.scale)
    assert exp.net_demand.sum() * 0.25 == pytest.approx(5000.0 * exp.scale, rel=1e-3)


def test_compensation_improves_awake_comfort(tmp_path):
    exp = run_experiment(small_config(tmp_path, households=1000, cases=("comfort-a", "comfort-c")), write=False)
    dev = exp.metrics.awake_abs_deviation_c
    assert dev["comfort-a"] > dev["comfort-c"]
    assert exp.metrics.converged == {"comfort-a": True, "comfort-c": True}
