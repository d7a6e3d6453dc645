"""Shared solver types: configuration, results, statuses, errors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "time_limit"

MOST_FRACTIONAL = "most_fractional"
PSEUDOCOST = "pseudocost"
BEST_BOUND = "best_bound"
DEPTH_FIRST = "depth_first"


class SolverError(RuntimeError):
    """Unrecoverable solver failure."""


class NumericalError(SolverError):
    """Numerical instability persisted across re-factorization attempts."""


@dataclass
class SolverConfig:
    feasibility_tol: float = 1e-7
    integrality_tol: float = 1e-6
    mip_gap: float = 1e-6
    node_limit: int | None = None
    time_limit_s: float | None = None
    branching: str = MOST_FRACTIONAL
    node_order: str = BEST_BOUND
    max_lp_iterations: int = 2_000_000

    def __post_init__(self) -> None:
        if self.feasibility_tol <= 0 or self.integrality_tol <= 0 or self.mip_gap <= 0:
            raise ValueError("solver tolerances must be > 0")
        if self.branching not in (MOST_FRACTIONAL, PSEUDOCOST):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_order not in (BEST_BOUND, DEPTH_FIRST):
            raise ValueError(f"unknown node order {self.node_order!r}")


@dataclass
class LpResult:
    status: str
    objective: float
    values: np.ndarray
    iterations: int


@dataclass
class BnbResult:
    status: str
    objective: float
    values: np.ndarray | None
    bound: float
    gap: float
    nodes: int
    lp_iterations: int
    bound_history: list[float] = field(default_factory=list)
    incumbent_history: list[float] = field(default_factory=list)
