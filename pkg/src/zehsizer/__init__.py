"""PV-panel and battery sizing via an LP relaxation of saturated battery dynamics.

The package sizes rooftop PV and battery storage for single households and
for sharing communities, optionally under a net-zero energy constraint, and
ships a brute-force grid oracle plus executable checks of the relaxation's
equivalence properties.
"""

from .model import (
    BatteryParams,
    HouseholdSeries,
    Mode,
    NonconvexPriceError,
    PriceSchedule,
    SizingProblemSpec,
    SizingSolution,
    SolveStatus,
    TimeGrid,
    Trajectory,
    baseline_cost,
    check_zeh,
    savings_percent,
    validate_prices,
)
from .simulate import SimStepResult, simulate, step
from .formulation import StandardFormLP, VariableMap, build_lp, extract_solution
from .simplex import PivotRule, SolveOutcome, SolverConfig, solve
from .lptext import export_lp_text, read_lp_text
from .oracle import (
    GridSearchResult,
    GridSpec,
    PerturbationWitness,
    check_greedy_equality,
    check_theorem1,
    find_perturbation,
    grid_search,
    timing_benchmark,
)
from .dataio import DatasetManifest, generate_synthetic, load_csv, write_csv, write_report
from .study import ScenarioConfig, run_phi_stats, run_study, run_verify

__version__ = "0.1.0"

__all__ = [
    "BatteryParams",
    "HouseholdSeries",
    "Mode",
    "NonconvexPriceError",
    "PriceSchedule",
    "SizingProblemSpec",
    "SizingSolution",
    "SolveStatus",
    "TimeGrid",
    "Trajectory",
    "baseline_cost",
    "check_zeh",
    "savings_percent",
    "validate_prices",
    "SimStepResult",
    "simulate",
    "step",
    "StandardFormLP",
    "VariableMap",
    "build_lp",
    "extract_solution",
    "PivotRule",
    "SolveOutcome",
    "SolverConfig",
    "solve",
    "export_lp_text",
    "read_lp_text",
    "GridSearchResult",
    "GridSpec",
    "PerturbationWitness",
    "check_greedy_equality",
    "check_theorem1",
    "find_perturbation",
    "grid_search",
    "timing_benchmark",
    "DatasetManifest",
    "generate_synthetic",
    "load_csv",
    "write_csv",
    "write_report",
    "ScenarioConfig",
    "run_phi_stats",
    "run_study",
    "run_verify",
]
