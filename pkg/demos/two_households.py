"""Two households sharing an evening price spike, traced move by move.

Both heaters start in the expensive evening steps.  Each pass the households
take turns: one shift to a cheaper step, then (if the comfort loss can be
paid for out of the saving) one extra ON step where it helps comfort most.
Prices are updated after every move, so the second household sees what the
first one did.

    python demos/two_households.py
"""

import numpy as np

from heatshift.coordinator import LOG_COLUMNS, CoordinationConfig, run_coordination
from heatshift.market import SystemState
from heatshift.population import Population
from heatshift.thermal import ComfortSpec, ThermalParams

N = 8  # 3-hour steps over one day
DT = 3.0
hours = np.arange(N) * DT

# non-heat demand (MW) with an evening peak at 18:00; the swing is wide enough
# that an off-peak step costs less than a peak-to-valley shift saves
non_heat = np.array([50.0, 40.0, 120.0, 200.0, 250.0, 300.0, 700.0, 400.0])

households, comforts, schedules = [], [], []
for psi, gamma, rated in [(0.55, 3.0, 4.0), (0.6, 2.6, 3.5)]:
    households.append(ThermalParams(psi, gamma, np.full(N, (1 - psi) * 12.0), rated, DT))
    comforts.append(ComfortSpec.from_bounds(np.full(N, 13.0), np.full(N, 21.0)))
    schedules.append([0, 0, 1, 0, 0, 1, 1, 0])

pop = Population.from_households(households, comforts, [17.0, 17.0], np.array(schedules))
state = SystemState.from_schedules(pop.schedule, pop.rated_power, non_heat, dt=DT)

print("hour  " + "  ".join(f"{h:5.0f}" for h in hours))
print("price " + "  ".join(f"{p:5.2f}" for p in state.price))
for j in range(pop.n_households):
    print(f"house {j} schedule {pop.schedule[j].tolist()}  temps {np.round(pop.trace[j], 1).tolist()}")

run = run_coordination(pop, state, CoordinationConfig())

print(f"\n{run.pass_count} passes, converged={run.converged}")
col = {name: 2 + i for i, name in enumerate(LOG_COLUMNS)}
for row in run.shift_log:
    t0 = int(row[col["t0"]])
    extra = f", extra ON at {hours[t0]:.0f} h" if t0 >= 0 else ""
    print(f"  pass {int(row[0])}: house {int(row[col['household']])} moves "
          f"{hours[int(row[col['t1']])]:.0f} h -> {hours[int(row[col['t2']])]:.0f} h "
          f"(saves {row[col['saving']] * 100:.2f} p){extra}")

# two small heaters move the price only in the fourth decimal
print("\nprice " + "  ".join(f"{p:7.4f}" for p in state.price))
for j in range(pop.n_households):
    print(f"house {j} schedule {pop.schedule[j].tolist()}  temps {np.round(pop.trace[j], 1).tolist()}")
print(f"system cost {run.initial_cost:.2f} GBP -> {run.total_cost[-1]:.2f} GBP")
