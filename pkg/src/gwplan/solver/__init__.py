"""Built-in LP/MILP machinery: bounded simplex, branch and bound, audit, MPS."""

from gwplan.solver.bnb import propagate_bounds, solve_milp, tighten_activation_rows
from gwplan.solver.check import check_solution
from gwplan.solver.mpsio import (
    read_assignment,
    read_mps,
    write_assignment,
    write_mps,
)
from gwplan.solver.simplex import solve_lp, solve_standard_form
from gwplan.solver.standard_form import StandardForm, standard_form
from gwplan.solver.types import (
    BEST_BOUND,
    DEPTH_FIRST,
    INFEASIBLE,
    MOST_FRACTIONAL,
    OPTIMAL,
    PSEUDOCOST,
    TIME_LIMIT,
    UNBOUNDED,
    BnbResult,
    LpResult,
    NumericalError,
    SolverConfig,
    SolverError,
)

__all__ = [
    "BEST_BOUND",
    "DEPTH_FIRST",
    "INFEASIBLE",
    "MOST_FRACTIONAL",
    "OPTIMAL",
    "PSEUDOCOST",
    "TIME_LIMIT",
    "UNBOUNDED",
    "BnbResult",
    "LpResult",
    "NumericalError",
    "SolverConfig",
    "SolverError",
    "StandardForm",
    "check_solution",
    "propagate_bounds",
    "read_assignment",
    "read_mps",
    "solve_lp",
    "solve_milp",
    "solve_standard_form",
    "standard_form",
    "tighten_activation_rows",
    "write_assignment",
    "write_mps",
]
