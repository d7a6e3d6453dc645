"""Independent feasibility audit of an assignment against a model.

Evaluates every row and every variable bound from the model data alone, with
no solver state, so it cross-checks both the built-in solver and externally
produced solutions.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from gwplan.milp import EQ, GE, LE, MilpModel


def check_solution(
    model: MilpModel, assignment: Sequence[float], tol: float = 1e-7
) -> list[tuple[str, float]]:
    """Return (name, violation magnitude) for every violated row or bound."""
    values = np.asarray(assignment, dtype=float)
    if values.shape != (model.n_cols,):
        raise ValueError(
            f"assignment length {values.shape} does not match {model.n_cols} columns"
        )
    out: list[tuple[str, float]] = []
    for var in model.columns:
        v = values[var.column]
        if v < model.lb[var.column] - tol:
            out.append((f"bound_lo:{var.name}", float(model.lb[var.column] - v)))
        elif v > model.ub[var.column] + tol:
            out.append((f"bound_hi:{var.name}", float(v - model.ub[var.column])))
    for con in model.constraints:
        activity = sum(coef * values[col] for col, coef in con.terms)
        if con.sense == LE:
            gap = activity - con.rhs
        elif con.sense == GE:
            gap = con.rhs - activity
        elif con.sense == EQ:
            gap = abs(activity - con.rhs)
        else:
            raise ValueError(f"unknown sense {con.sense!r} in row {con.name}")
        if gap > tol:
            out.append((con.name, float(gap)))
    return out
