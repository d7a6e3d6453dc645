"""Bounded-variable primal simplex over sparse columns.

Computational form: [A -I](x, w) = 0 with finite or infinite bounds on both
structural and row variables.  The initial basis is the row-variable
identity; rows whose implied value falls outside the row bounds receive one
artificial column each and a phase-1 objective drives their sum to zero.

Pricing is Dantzig with an automatic switch to Bland's rule after a stall of
degenerate pivots.  The basis inverse is a sparse LU refreshed periodically,
with product-form eta updates between refactorizations.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from gwplan.milp import MilpModel
from gwplan.solver.standard_form import StandardForm, standard_form
from gwplan.solver.types import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LpResult,
    NumericalError,
    SolverConfig,
)

BASIC, AT_LB, AT_UB, FREE = 0, 1, 2, 3

REFACTOR_EVERY = 100
PIVOT_TOL = 1e-9
ZERO_TOL = 1e-11
DEGENERATE_STALL = 200


class _Basis:
    """Sparse LU of the basis with product-form eta updates."""

    def __init__(self, cols: "_Columns", basis: np.ndarray):
        self.cols = cols
        self.m = len(basis)
        self.etas: list[tuple[int, np.ndarray, float]] = []
        self.refactor(basis)

    def refactor(self, basis: np.ndarray) -> None:
        rows: list[np.ndarray] = []
        cidx: list[np.ndarray] = []
        vals: list[np.ndarray] = []
        for p, j in enumerate(basis):
            r, v = self.cols.col(j)
            rows.append(r)
            cidx.append(np.full(len(r), p))
            vals.append(v)
        B = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cidx))),
            shape=(self.m, self.m),
        )
        try:
            self.lu = splu(B)
        except RuntimeError as exc:  # singular basis
            raise NumericalError(f"basis factorization failed: {exc}") from exc
        self.etas = []

    def ftran(self, rhs: np.ndarray) -> np.ndarray:
        v = self.lu.solve(rhs)
        for rpos, d, dr in self.etas:
            alpha = v[rpos] / dr
            if alpha != 0.0:
                v -= alpha * d
            v[rpos] = alpha
        return v

    def btran(self, rhs: np.ndarray) -> np.ndarray:
        y = rhs.copy()
        for rpos, d, dr in reversed(self.etas):
            y[rpos] = (y[rpos] - (d @ y - d[rpos] * y[rpos])) / dr
        return self.lu.solve(y, trans="T")

    def push_eta(self, rpos: int, d: np.ndarray, dr: float) -> None:
        self.etas.append((rpos, d.copy(), dr))

    @property
    def n_etas(self) -> int:
        return len(self.etas)


class _Columns:
    """Column access for [A, -I] plus signed unit artificial columns."""

    def __init__(self, W: sp.csc_matrix, art_rows: np.ndarray, art_signs: np.ndarray):
        self.W = W
        self.ntot = W.shape[1]
        self.art_rows = art_rows
        self.art_signs = art_signs

    def col(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        if j < self.ntot:
            lo, hi = self.W.indptr[j], self.W.indptr[j + 1]
            return self.W.indices[lo:hi], self.W.data[lo:hi]
        k = j - self.ntot
        return (
            np.array([self.art_rows[k]]),
            np.array([self.art_signs[k]], dtype=float),
        )

    def dense_col(self, j: int, m: int) -> np.ndarray:
        out = np.zeros(m)
        r, v = self.col(j)
        out[r] = v
        return out


class _Simplex:
    def __init__(
        self,
        sf: StandardForm,
        lb_x: np.ndarray,
        ub_x: np.ndarray,
        config: SolverConfig,
    ):
        self.sf = sf
        self.cfg = config
        self.m = sf.m
        self.n = sf.n
        self.iterations = 0
        self.lb = np.concatenate([lb_x, sf.rl])
        self.ub = np.concatenate([ub_x, sf.ru])
        self.ntot = self.n + self.m

    def solve(self) -> tuple[str, np.ndarray]:
        """Returns (status, full value vector over structural + row vars)."""
        if np.any(self.lb > self.ub + self.cfg.feasibility_tol):
            return INFEASIBLE, np.zeros(self.ntot)
        if self.m == 0:
            return self._solve_boxed()

        val = np.zeros(self.ntot)
        status = np.full(self.ntot, AT_LB, dtype=np.int8)
        for j in range(self.n):
            if np.isfinite(self.lb[j]):
                val[j], status[j] = self.lb[j], AT_LB
            elif np.isfinite(self.ub[j]):
                val[j], status[j] = self.ub[j], AT_UB
            else:
                val[j], status[j] = 0.0, FREE

        w0 = self.sf.A @ val[: self.n]
        tol = self.cfg.feasibility_tol
        viol = (w0 < self.lb[self.n :] - tol) | (w0 > self.ub[self.n :] + tol)
        art_rows = np.flatnonzero(viol)
        clipped = np.clip(w0, self.lb[self.n :], self.ub[self.n :])
        art_signs = np.sign(clipped[art_rows] - w0[art_rows])
        n_art = len(art_rows)

        self.cols = _Columns(self.sf.W, art_rows, art_signs)
        self.lb = np.concatenate([self.lb, np.zeros(n_art)])
        self.ub = np.concatenate([self.ub, np.full(n_art, np.inf)])
        val = np.concatenate([val, np.zeros(n_art)])
        status = np.concatenate([status, np.full(n_art, AT_LB, dtype=np.int8)])

        basis = np.arange(self.n, self.ntot)
        xB = w0.copy()
        for k, r in enumerate(art_rows):
            # Row variable parks at its nearest bound; the artificial absorbs
            # the residual so that A x - w + sign * a = 0 holds.
            j_w = self.n + r
            val[j_w] = clipped[r]
            status[j_w] = AT_UB if w0[r] > self.ub[j_w] else AT_LB
            basis[r] = self.ntot + k
            xB[r] = abs(w0[r] - clipped[r])
        status[basis] = BASIC

        self.val = val
        self.status = status
        self.basis = basis
        self.xB = xB
        self.pos_of = np.full(self.ntot + n_art, -1, dtype=int)
        self.pos_of[basis] = np.arange(self.m)
        self.B = _Basis(self.cols, basis)

        if n_art:
            c1 = np.zeros(self.ntot + n_art)
            c1[self.ntot :] = 1.0
            st = self._iterate(c1, allow_unbounded=False)
            if st != OPTIMAL:
                raise NumericalError("phase 1 did not terminate cleanly")
            infeas = float(c1 @ self._full_values())
            finite = np.concatenate(
                [self.sf.rl[np.isfinite(self.sf.rl)], self.sf.ru[np.isfinite(self.sf.ru)]]
            )
            scale = max(1.0, float(np.abs(finite).max(initial=0.0)))
            if infeas > 10.0 * tol * scale:
                return INFEASIBLE, self._full_values()[: self.ntot]
            self.ub[self.ntot :] = 0.0  # pin artificials

        c2 = np.zeros(self.ntot + n_art)
        c2[: self.n] = self.sf.c
        st = self._iterate(c2, allow_unbounded=True)
        return st, self._full_values()[: self.ntot]

    # -- core iteration loop ------------------------------------------------

    def _full_values(self) -> np.ndarray:
        out = self.val.copy()
        out[self.basis] = self.xB
        return out

    def _recompute_xB(self) -> None:
        tmp = self.val.copy()
        tmp[self.basis] = 0.0
        rhs = -(self.sf.W @ tmp[: self.ntot])
        n_art = len(tmp) - self.ntot
        if n_art:
            np.add.at(
                rhs,
                self.cols.art_rows,
                -self.cols.art_signs * tmp[self.ntot :],
            )
        self.xB = self.B.ftran(rhs)

    def _reduced_costs(self, c: np.ndarray) -> np.ndarray:
        cB = c[self.basis]
        y = self.B.btran(cB)
        r = c.copy()
        r[: self.ntot] -= self.sf.W.T @ y
        if len(c) > self.ntot:
            r[self.ntot :] -= self.cols.art_signs * y[self.cols.art_rows]
        return r

    def _iterate(self, c: np.ndarray, allow_unbounded: bool) -> str:
        tol = self.cfg.feasibility_tol
        dual_tol = 1e-9
        bland = False
        degenerate_run = 0
        obj_at_bland = None
        fixed = self.ub - self.lb <= 0
        while True:
            if self.iterations >= self.cfg.max_lp_iterations:
                raise NumericalError("simplex iteration limit exceeded")
            if self.B.n_etas >= REFACTOR_EVERY:
                self.B.refactor(self.basis)
                self._recompute_xB()

            r = self._reduced_costs(c)
            can_up = (self.status == AT_LB) | (self.status == FREE)
            can_dn = (self.status == AT_UB) | (self.status == FREE)
            score = np.where(can_up & ~fixed, -r, 0.0)
            score = np.maximum(score, np.where(can_dn & ~fixed, r, 0.0))
            if bland:
                cand = np.flatnonzero(score > dual_tol)
                if len(cand) == 0:
                    return OPTIMAL
                j = int(cand[0])
            else:
                j = int(np.argmax(score))
                if score[j] <= dual_tol:
                    return OPTIMAL

            sig = 1.0 if (self.status[j] == AT_LB or r[j] < 0) else -1.0
            d = self.B.ftran(self.cols.dense_col(j, self.m))

            # Ratio test: basic values move as xB - sig*theta*d.
            move = sig * d
            theta = np.inf
            limit_pos = -1
            big = np.abs(move) > PIVOT_TOL
            lo_room = np.where(
                big & (move > 0),
                np.maximum(self.xB - self.lb[self.basis], 0.0),
                np.inf,
            )
            hi_room = np.where(
                big & (move < 0),
                np.maximum(self.ub[self.basis] - self.xB, 0.0),
                np.inf,
            )
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(move > 0, lo_room / move, hi_room / (-move))
            ratios[~big] = np.inf
            if np.any(np.isfinite(ratios)):
                theta = float(ratios.min())
                achievers = np.flatnonzero(ratios <= theta + 1e-12)
                if bland:
                    limit_pos = int(achievers[np.argmin(self.basis[achievers])])
                else:
                    limit_pos = int(achievers[np.argmax(np.abs(d[achievers]))])

            theta_flip = self.ub[j] - self.lb[j]
            if not np.isfinite(theta) and not np.isfinite(theta_flip):
                if allow_unbounded:
                    return UNBOUNDED
                raise NumericalError("unbounded direction in phase 1")

            self.iterations += 1
            if theta_flip < theta:
                # Bound flip, no basis change.
                self.xB -= sig * theta_flip * d
                if self.status[j] == AT_LB:
                    self.val[j] = self.ub[j]
                    self.status[j] = AT_UB
                else:
                    self.val[j] = self.lb[j]
                    self.status[j] = AT_LB
                degenerate_run = 0
                continue

            step = max(theta, 0.0)
            enter_val = self.val[j] + sig * step
            leave = int(self.basis[limit_pos])
            self.xB -= sig * step * d
            if move[limit_pos] > 0:
                self.val[leave] = self.lb[leave]
                self.status[leave] = AT_LB
            else:
                self.val[leave] = self.ub[leave]
                self.status[leave] = AT_UB
            self.pos_of[leave] = -1
            self.basis[limit_pos] = j
            self.pos_of[j] = limit_pos
            self.status[j] = BASIC
            self.xB[limit_pos] = enter_val
            self.B.push_eta(limit_pos, d, float(d[limit_pos]))

            if step <= 1e-12:
                degenerate_run += 1
                if degenerate_run >= DEGENERATE_STALL and not bland:
                    bland = True
                    obj_at_bland = float(c @ self._full_values())
            else:
                degenerate_run = 0
                if bland and obj_at_bland is not None:
                    if float(c @ self._full_values()) < obj_at_bland - 1e-10:
                        bland = False
                        obj_at_bland = None

    def _solve_boxed(self) -> tuple[str, np.ndarray]:
        """No rows: every variable sits at its cost-preferred bound."""
        c = self.sf.c
        val = np.zeros(self.n)
        for j in range(self.n):
            if c[j] > 0 or (c[j] == 0 and np.isfinite(self.lb[j])):
                pick = self.lb[j] if np.isfinite(self.lb[j]) else 0.0
            elif c[j] < 0:
                pick = self.ub[j]
            else:
                pick = self.ub[j] if np.isfinite(self.ub[j]) else 0.0
            if not np.isfinite(pick):
                return UNBOUNDED, val
            val[j] = pick
        return OPTIMAL, val


def solve_standard_form(
    sf: StandardForm,
    config: SolverConfig,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
) -> LpResult:
    """Solve the LP over the given column bounds (defaults to the form's own)."""
    lb_x = sf.lb if lb is None else lb
    ub_x = sf.ub if ub is None else ub
    attempts = 0
    while True:
        core = _Simplex(sf, lb_x.astype(float), ub_x.astype(float), config)
        try:
            status, full = core.solve()
            break
        except NumericalError:
            attempts += 1
            if attempts >= 3:
                raise
    x = full[: sf.n]
    snap = np.clip(x, lb_x, ub_x)
    x = np.where(np.abs(snap - x) <= 1e-9, snap, x)
    objective = float(sf.c @ x) + sf.c0 if status == OPTIMAL else np.nan
    return LpResult(
        status=status, objective=objective, values=x, iterations=core.iterations
    )


def solve_lp(model: MilpModel, config: SolverConfig | None = None) -> LpResult:
    """Optimal basic solution of the LP relaxation (binaries relaxed to [0,1])."""
    cfg = config or SolverConfig()
    return solve_standard_form(standard_form(model), cfg)
