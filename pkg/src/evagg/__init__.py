"""Day-ahead charging schedules for an EV aggregator under availability uncertainty."""
from .data import GeneratorConfig, forecast, generate_history, load_history_csv, make_fleet, save_history_csv
from .deterministic import solve_deterministic
from .fleet import (
    DayRecord,
    EvParams,
    ForecastInputs,
    PriceSeries,
    ScheduleSolution,
    TimeGrid,
    UncertaintySet,
    validate_fleet,
    validate_solution,
)
from .lp import LpProblem, ModelBuilder, solve_lp
from .milp import MilpProblem, export_mps, import_mps, solve_milp
from .realtime import MonthConfig, evaluate_day, evaluate_month, simulate_realtime
from .robust import RobustInstance, solve_robust, solve_robust_ccg, worst_case_lp, worst_case_oracle

__all__ = [
    "DayRecord", "EvParams", "ForecastInputs", "GeneratorConfig", "LpProblem", "MilpProblem", "ModelBuilder",
    "MonthConfig", "PriceSeries", "RobustInstance", "ScheduleSolution", "TimeGrid", "UncertaintySet",
    "evaluate_day", "evaluate_month", "export_mps", "forecast", "generate_history", "import_mps",
    "load_history_csv", "make_fleet", "save_history_csv", "simulate_realtime", "solve_deterministic",
    "solve_lp", "solve_milp", "solve_robust", "solve_robust_ccg", "validate_fleet", "validate_solution",
    "worst_case_lp", "worst_case_oracle",
]
