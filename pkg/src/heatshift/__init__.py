"""Game-theoretic coordination of residential space heating.

Households with binary heaters shift ON steps from expensive to cheap times
against a marginal-cost price, optionally buying back comfort with an extra
ON step, until no household can save any more.
"""

from .comfort import comfort_flexibility, comfort_index
from .coordinator import CoordinationConfig, run_coordination, verify_equilibrium
from .market import CostCoefficients, SystemState
from .population import Population
from .thermal import ComfortSpec, ThermalParams, derive_discrete_params, simulate

__all__ = [
    "ComfortSpec",
    "CoordinationConfig",
    "CostCoefficients",
    "Population",
    "SystemState",
    "ThermalParams",
    "comfort_flexibility",
    "comfort_index",
    "derive_discrete_params",
    "run_coordination",
    "simulate",
    "verify_equilibrium",
]

__version__ = "0.1.0"
