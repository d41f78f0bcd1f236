"""One simulated day for a sampled population, printed as hourly text charts.

Runs the baseline thermostat, the uncoordinated case and the coordinated
case on the same households, then prints hourly demand, the headline cost
and peak figures, and the comfort cost of each case.

    python demos/population_day.py [households] [seed]
"""

import sys

import numpy as np

from heatshift.experiment import ExperimentConfig, default_config_dict, run_experiment

households = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1

data = default_config_dict()
data["population"]["household_count"] = households
data["run"].update(seed=seed, cases=["baseline", "uncoordinated", "coordinated"])
exp = run_experiment(ExperimentConfig.from_dict(data), write=False)
m = exp.metrics

# demand per hour (MW, mean of the four quarter-hour steps) scaled back up to
# the reference population so the numbers read like a national system
hourly = {c: r.demand.reshape(24, 4).mean(axis=1) / exp.scale for c, r in exp.results.items()}
top = max(v.max() for v in hourly.values())
width = 40
print(f"{m.households} households ({m.excluded_households} could not hold their bounds and were left out)\n")
print("hour  " + "".join(f"{c:>15}" for c in hourly))
for h in range(24):
    print(f"{h:02d}:00 " + "".join(f"{hourly[c][h]:15.0f}" for c in hourly))

for case in hourly:
    print(f"\n{case}")
    for h in range(24):
        bar = "#" * int(round(hourly[case][h] / top * width))
        print(f"  {h:02d} {bar}")

print()
for case in m.cases:
    passes = f", {m.passes[case]} passes" if case in m.passes else ""
    print(f"{case:>14}: cost {0.0 - m.cost_reduction_pct[case]:+6.2f}%  morning peak {m.morning_shaving_pct[case]:6.2f}% "
          f"lower  evening peak {m.evening_shaving_pct[case]:6.2f}% lower  awake |T - Tref| "
          f"{m.awake_abs_deviation_c[case]:.2f} C{passes}")

hot_hours = np.argsort(hourly["uncoordinated"] - hourly["baseline"])[-3:]
print("\nuncoordinated households pile into the same cheap hours: "
      + ", ".join(f"{h:02d}:00 (+{hourly['uncoordinated'][h] - hourly['baseline'][h]:.0f} MW)" for h in sorted(hot_hours)))
