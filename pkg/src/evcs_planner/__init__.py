"""Charging-station siting and sizing on a road network.

Two objectives are minimized: the operator's negative annual profit and the
users' additional cost (travel time, queueing and energy lost on the way).
"""

from .core import (
    CostBreakdown,
    DataError,
    ModelParams,
    Plan,
    Road,
    RoadNetwork,
    classify_congestion,
    load_params,
    load_roads,
    validate_params,
)
from .costs import capital_recovery_factor, erlang_c_wait, evaluate, station_capacity
from .decision import DecisionMatrix, entropy_weights, normalize_negative, select_best, sp_metric
from .feasibility import FeasibilityReport, check, repair, station_count_bounds
from .moea import AlgoConfig, ParetoArchive, evolve, fast_nondominated_sort, nsga2
from .network import LAMBDA_TABLE, DistanceMatrix, assign_demand, build_distance_matrix, lambda_index
from .pipeline import RunManifest, bundled_params, bundled_roads, load_instance, optimize

__all__ = [
    "AlgoConfig",
    "CostBreakdown",
    "DataError",
    "DecisionMatrix",
    "DistanceMatrix",
    "FeasibilityReport",
    "LAMBDA_TABLE",
    "ModelParams",
    "ParetoArchive",
    "Plan",
    "Road",
    "RoadNetwork",
    "RunManifest",
    "assign_demand",
    "build_distance_matrix",
    "bundled_params",
    "bundled_roads",
    "capital_recovery_factor",
    "check",
    "classify_congestion",
    "entropy_weights",
    "erlang_c_wait",
    "evaluate",
    "evolve",
    "fast_nondominated_sort",
    "lambda_index",
    "load_instance",
    "load_params",
    "load_roads",
    "normalize_negative",
    "nsga2",
    "optimize",
    "repair",
    "select_best",
    "sp_metric",
    "station_capacity",
    "station_count_bounds",
    "validate_params",
]
