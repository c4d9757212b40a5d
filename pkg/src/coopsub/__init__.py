"""Minimising and maximising under low-rank cooperative (concave-over-modular) costs."""
__version__ = "0.1.0"

from .core import (CooperativeCost, CooperativeCostOracle, DegenerateInstanceError, ExplicitPL,
                   FacilityLocation, Log1p, LogDet, Power, PreconditionError, SetFunction, Truncation,
                   WeightedCoverage, check_submodularity)
from .linear_solvers import (BipartiteMatching, CardinalityLB, InfeasibleError, ShortestPath, SpanningTree,
                             check_feasible, solve_linear)
from .piecewise import PLCost, build_envelope, build_pl_cost, verify_sandwich
from .greedy import brute_force, greedy_knapsack, greedy_ratio, greedy_set_cover
from .algorithms import (CurvatureReport, SolveReport, curvature, pla_coordinate_heuristic, pla_early_stop_check,
                         pla_solve, sga_solve)

__all__ = [
    "BipartiteMatching", "CardinalityLB", "CooperativeCost", "CooperativeCostOracle", "CurvatureReport",
    "DegenerateInstanceError", "ExplicitPL", "FacilityLocation", "InfeasibleError", "Log1p", "LogDet",
    "PLCost", "Power", "PreconditionError", "SetFunction", "ShortestPath", "SolveReport", "SpanningTree",
    "Truncation", "WeightedCoverage", "brute_force", "build_envelope", "build_pl_cost", "check_feasible",
    "check_submodularity", "curvature", "greedy_knapsack", "greedy_ratio", "greedy_set_cover",
    "pla_coordinate_heuristic", "pla_early_stop_check", "pla_solve", "sga_solve", "solve_linear",
    "verify_sandwich",
]
