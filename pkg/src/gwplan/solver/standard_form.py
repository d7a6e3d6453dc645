"""Conversion of a MilpModel into arrays the simplex core consumes.

Rows are stored as two-sided activity bounds rl <= a.x <= ru so that one
logical (row) variable per row gives the computational form

    [A  -I] (x, w) = 0,   lb <= x <= ub,   rl <= w <= ru.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from gwplan.milp import EQ, GE, LE, MilpModel


@dataclass
class StandardForm:
    A: sp.csc_matrix
    rl: np.ndarray
    ru: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    c: np.ndarray
    c0: float
    row_names: list[str]
    col_names: list[str]
    is_binary: np.ndarray
    W: sp.csc_matrix  # [A, -I], prebuilt for the simplex core

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]


def standard_form(model: MilpModel) -> StandardForm:
    n = model.n_cols
    m = len(model.constraints)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    rl = np.empty(m)
    ru = np.empty(m)
    row_names = []
    for r, con in enumerate(model.constraints):
        row_names.append(con.name)
        for col, coef in con.terms:
            rows.append(r)
            cols.append(col)
            vals.append(coef)
        if con.sense == LE:
            rl[r], ru[r] = -np.inf, con.rhs
        elif con.sense == GE:
            rl[r], ru[r] = con.rhs, np.inf
        elif con.sense == EQ:
            rl[r], ru[r] = con.rhs, con.rhs
        else:
            raise ValueError(f"unknown sense {con.sense!r} in row {con.name}")
    A = sp.csc_matrix(
        (np.array(vals), (np.array(rows, dtype=int), np.array(cols, dtype=int))),
        shape=(m, n),
    )
    W = sp.hstack([A, -sp.identity(m, format="csc")], format="csc") if m else A
    return StandardForm(
        A=A,
        rl=rl,
        ru=ru,
        lb=np.array(model.lb, dtype=float),
        ub=np.array(model.ub, dtype=float),
        c=model.objective_vector(),
        c0=model.objective_constant,
        row_names=row_names,
        col_names=[v.name for v in model.columns],
        is_binary=model.binary_columns(),
        W=W,
    )
