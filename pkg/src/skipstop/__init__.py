"""Optimal skip-stop transit design on a loop corridor.

The pipeline: a discretized demand field (`demand`), the generalized-cost
model over continuous design profiles (`costs`), the two-stage design
search (`heuristic`), a global lower bound on the program (`lower_bound`),
conversion of profiles into a discrete stop plan (`stop_plan`), exact
re-evaluation of that plan (`exact_eval`), and scenario grids with CSV
reporting (`experiments`). The `skipstop` console script exposes the same
pipeline as CLI verbs.
"""

from .costs import (
    CostBreakdown,
    DesignProfiles,
    DesignScalars,
    ParamSet,
    bus_params,
    generalized_cost,
    rail_params,
)
from .demand import (
    Corridor,
    DemandField,
    DemandSpec,
    backtrack_densities,
    build_demand_field,
    circular_trip_length,
    contained_demand,
    field_from_matrix,
)
from .exact_eval import (
    ErrorReport,
    ExactCosts,
    aggregate_od_demand,
    classify_trip,
    error_report,
    exact_costs,
)
from .experiments import (
    CaseResult,
    ScenarioConfig,
    emit_reports,
    run_case,
    run_sweep,
    sweep_grid,
    table1_grid,
)
from .heuristic import (
    SolveResult,
    SolverSettings,
    Solution,
    stage1,
    stage2_solve,
)
from .lower_bound import LowerBoundResult, demand_is_symmetric, lb_solve
from .stop_plan import (
    StopPlan,
    build_stop_plan,
    fit_profiles,
    place_stops,
    select_transfer_stops,
)

__version__ = "0.1.0"

__all__ = [
    "CaseResult",
    "Corridor",
    "CostBreakdown",
    "DemandField",
    "DemandSpec",
    "DesignProfiles",
    "DesignScalars",
    "ErrorReport",
    "ExactCosts",
    "LowerBoundResult",
    "ParamSet",
    "ScenarioConfig",
    "SolveResult",
    "SolverSettings",
    "Solution",
    "StopPlan",
    "aggregate_od_demand",
    "backtrack_densities",
    "build_demand_field",
    "build_stop_plan",
    "bus_params",
    "circular_trip_length",
    "classify_trip",
    "contained_demand",
    "demand_is_symmetric",
    "emit_reports",
    "error_report",
    "exact_costs",
    "field_from_matrix",
    "fit_profiles",
    "generalized_cost",
    "lb_solve",
    "place_stops",
    "rail_params",
    "run_case",
    "run_sweep",
    "select_transfer_stops",
    "stage1",
    "stage2_solve",
    "sweep_grid",
    "table1_grid",
]
