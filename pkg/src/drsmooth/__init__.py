"""Distributed demand response by dual decomposition with double smoothing.

Households schedule their appliances against price-like multipliers and an
aggregator updates the multipliers with a fast gradient method on a doubly
smoothed dual. A centralized branch-and-bound oracle provides exact optima on
small instances for gap measurement.
"""

from .appliances import (
    Appliance,
    ApplianceChoice,
    ApplianceKind,
    HouseholdSpec,
    TimeHorizon,
    choice_demand,
    household_demand,
    prox_constant,
)
from .coordinator import (
    BroadcastMsg,
    HouseholdAgent,
    HouseholdReply,
    IterationRecord,
    LocalHousehold,
    RunTrace,
    recovered_primal,
    run,
)
from .dual import Multipliers, SmoothingSchedule, coupling_norm_sq, gradient, lipschitz_constant
from .errors import (
    ChoiceSpaceTooLarge,
    DRError,
    Infeasible,
    NonFiniteDual,
    SchemaError,
    VersionError,
)
from .oracle import OracleResult, solve_central, unsmoothed_dual
from .scenario import AlgoParams, GeneratorRanges, Scenario, generate_scenario
from .subproblem import AggregatorCostModel, HouseholdSolution, solve_aggregator, solve_household_exact

__version__ = "0.1.0"
