"""Branch-and-bound over binary columns with LP-relaxation bounds.

Root preprocessing is limited to interval bound propagation plus one derived
reduction that propagation makes valid: in two-term activation rows of the
shape ``f - M y <= 0`` (continuous f, binary y), the coefficient M is
replaced by the propagated upper bound of f when that is smaller.  The
reduction preserves every integral-feasible point and therefore the MILP
optimum, while making the relaxation bound strong enough for the search to
converge on flow models whose M is far above the per-flow maximum.

Nodes branch on a fractional binary (most-fractional by default, pseudocost
optionally) and are explored best-bound-first or depth-first.  All tie-breaks
are index-based, so a depth-first run is reproducible node for node.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from gwplan.milp import MilpModel
from gwplan.solver.simplex import solve_standard_form
from gwplan.solver.standard_form import StandardForm, standard_form
from gwplan.solver.types import (
    BEST_BOUND,
    INFEASIBLE,
    OPTIMAL,
    PSEUDOCOST,
    TIME_LIMIT,
    UNBOUNDED,
    BnbResult,
    SolverConfig,
    SolverError,
)

_INT_ROUND_TOL = 1e-9


@dataclass
class _Rows:
    """Row-wise view of the constraint system for propagation."""

    cols: list[np.ndarray]
    vals: list[np.ndarray]
    rl: np.ndarray
    ru: np.ndarray
    col_rows: list[np.ndarray]  # rows touching each column


def _rows_from_sf(sf: StandardForm) -> _Rows:
    csr = sf.A.tocsr()
    cols = []
    vals = []
    for r in range(sf.m):
        lo, hi = csr.indptr[r], csr.indptr[r + 1]
        cols.append(csr.indices[lo:hi].copy())
        vals.append(csr.data[lo:hi].copy())
    csc = sf.A.tocsc()
    col_rows = [
        csc.indices[csc.indptr[j] : csc.indptr[j + 1]].copy() for j in range(sf.n)
    ]
    return _Rows(cols=cols, vals=vals, rl=sf.rl.copy(), ru=sf.ru.copy(),
                 col_rows=col_rows)


def propagate_bounds(
    rows: _Rows,
    lb: np.ndarray,
    ub: np.ndarray,
    is_binary: np.ndarray,
    seed_rows: np.ndarray | None = None,
    max_updates: int = 200_000,
) -> bool:
    """Worklist interval propagation; tightens lb/ub in place.

    Returns False when a row proves infeasible.  Binary bounds are rounded to
    integral values as they cross the integrality threshold.
    """
    pending = list(seed_rows if seed_rows is not None else range(len(rows.cols)))
    queued = set(pending)
    updates = 0
    while pending:
        r = pending.pop()
        queued.discard(r)
        cols, vals = rows.cols[r], rows.vals[r]
        lo_terms = np.where(vals > 0, vals * lb[cols], vals * ub[cols])
        hi_terms = np.where(vals > 0, vals * ub[cols], vals * lb[cols])
        amin, amax = lo_terms.sum(), hi_terms.sum()
        if amin > rows.ru[r] + 1e-7 or amax < rows.rl[r] - 1e-7:
            return False
        lo_fin = np.isfinite(lo_terms)
        hi_fin = np.isfinite(hi_terms)
        lo_fin_sum = lo_terms[lo_fin].sum()
        hi_fin_sum = hi_terms[hi_fin].sum()
        n_lo_inf = len(lo_terms) - int(lo_fin.sum())
        n_hi_inf = len(hi_terms) - int(hi_fin.sum())
        for k, (j, a) in enumerate(zip(cols, vals)):
            if a == 0.0:
                continue
            lo_rest = (
                -np.inf
                if n_lo_inf - int(not lo_fin[k]) > 0
                else lo_fin_sum - (lo_terms[k] if lo_fin[k] else 0.0)
            )
            hi_rest = (
                np.inf
                if n_hi_inf - int(not hi_fin[k]) > 0
                else hi_fin_sum - (hi_terms[k] if hi_fin[k] else 0.0)
            )
            if a > 0:
                new_ub = (rows.ru[r] - lo_rest) / a
                new_lb = (rows.rl[r] - hi_rest) / a
            else:
                new_ub = (rows.rl[r] - hi_rest) / a
                new_lb = (rows.ru[r] - lo_rest) / a
            changed = False
            if new_ub < ub[j] - 1e-9:
                ub[j] = (
                    np.floor(new_ub + 1e-6) if is_binary[j] else new_ub
                )
                changed = True
            if new_lb > lb[j] + 1e-9:
                lb[j] = np.ceil(new_lb - 1e-6) if is_binary[j] else new_lb
                changed = True
            if changed:
                if lb[j] > ub[j] + 1e-9:
                    return False
                updates += 1
                if updates > max_updates:
                    return True
                for rr in rows.col_rows[j]:
                    if rr not in queued:
                        queued.add(rr)
                        pending.append(rr)
    return True


def tighten_activation_rows(
    sf: StandardForm, lb: np.ndarray, ub: np.ndarray
) -> StandardForm:
    """Shrink M in two-term rows a*f - M_eff*a*y <= 0 to the bound of f."""
    csr = sf.A.tocsr()
    changed = False
    for r in range(sf.m):
        lo, hi = csr.indptr[r], csr.indptr[r + 1]
        if hi - lo != 2 or np.isfinite(sf.rl[r]) or abs(sf.ru[r]) > 1e-12:
            continue
        j0, j1 = csr.indices[lo:hi]
        a0, a1 = csr.data[lo:hi]
        if sf.is_binary[j1] and not sf.is_binary[j0] and a0 > 0 and a1 < 0:
            jf, jy, af, pos = j0, j1, a0, lo + 1
        elif sf.is_binary[j0] and not sf.is_binary[j1] and a1 > 0 and a0 < 0:
            jf, jy, af, pos = j1, j0, a1, lo
        else:
            continue
        m_eff = -csr.data[pos] / af
        cap = ub[jf]
        # cap == 0 is left alone: the variable bound already forces f <= 0
        # and a zero coefficient would degenerate the row.
        if np.isfinite(cap) and 0.0 < cap < m_eff:
            csr.data[pos] = -af * cap
            changed = True
    if not changed:
        return sf
    A = csr.tocsc()
    W = sp.hstack([A, -sp.identity(sf.m, format="csc")], format="csc")
    return StandardForm(
        A=A,
        rl=sf.rl,
        ru=sf.ru,
        lb=sf.lb,
        ub=sf.ub,
        c=sf.c,
        c0=sf.c0,
        row_names=sf.row_names,
        col_names=sf.col_names,
        is_binary=sf.is_binary,
        W=W,
    )


@dataclass
class _Node:
    id: int
    depth: int
    bound: float
    overrides: dict[int, tuple[float, float]] = field(default_factory=dict)


class _PseudoCosts:
    def __init__(self, n: int):
        self.sum_up = np.zeros(n)
        self.cnt_up = np.zeros(n)
        self.sum_dn = np.zeros(n)
        self.cnt_dn = np.zeros(n)

    def record(self, j: int, direction: int, degradation: float, frac: float) -> None:
        unit = degradation / max(frac, 1e-6)
        if direction > 0:
            self.sum_up[j] += unit
            self.cnt_up[j] += 1
        else:
            self.sum_dn[j] += unit
            self.cnt_dn[j] += 1

    def score(self, j: int, frac: float) -> float:
        avg_all_up = self.sum_up.sum() / max(self.cnt_up.sum(), 1.0)
        avg_all_dn = self.sum_dn.sum() / max(self.cnt_dn.sum(), 1.0)
        up = self.sum_up[j] / self.cnt_up[j] if self.cnt_up[j] else max(avg_all_up, 1e-6)
        dn = self.sum_dn[j] / self.cnt_dn[j] if self.cnt_dn[j] else max(avg_all_dn, 1e-6)
        return max(up * (1 - frac), 1e-12) * max(dn * frac, 1e-12)


def solve_milp(model: MilpModel, config: SolverConfig | None = None) -> BnbResult:
    """Prove-optimal branch-and-bound over the model's binary columns."""
    cfg = config or SolverConfig()
    sf = standard_form(model)
    rows = _rows_from_sf(sf)
    binaries = sf.is_binary
    bin_cols = np.flatnonzero(binaries)

    root_lb = sf.lb.copy()
    root_ub = sf.ub.copy()
    if not propagate_bounds(rows, root_lb, root_ub, binaries):
        return BnbResult(
            status=INFEASIBLE, objective=np.nan, values=None, bound=np.inf,
            gap=0.0, nodes=0, lp_iterations=0,
        )
    sf_t = tighten_activation_rows(sf, root_lb, root_ub)
    rows_t = _rows_from_sf(sf_t) if sf_t is not sf else rows

    start = time.monotonic()
    next_id = 0
    incumbent_obj = np.inf
    incumbent: np.ndarray | None = None
    nodes_done = 0
    lp_iters = 0
    bound_history: list[float] = []
    incumbent_history: list[float] = []
    pseudo = _PseudoCosts(sf.n)
    # (parent objective, branched column, direction, fractional part)
    parentage: dict[int, tuple[float, int, int, float]] = {}

    heap: list[tuple[float, int, _Node]] = []
    stack: list[_Node] = []
    root = _Node(id=next_id, depth=0, bound=-np.inf)
    next_id += 1
    if cfg.node_order == BEST_BOUND:
        heapq.heappush(heap, (root.bound, root.id, root))
    else:
        stack.append(root)

    def open_bounds() -> float:
        vals = [nd.bound for _, _, nd in heap] + [nd.bound for nd in stack]
        return min(vals) if vals else np.inf

    def cutoff() -> float:
        if not np.isfinite(incumbent_obj):
            return np.inf
        return incumbent_obj - cfg.mip_gap * abs(incumbent_obj)

    limit_hit = False
    while heap or stack:
        if cfg.node_limit is not None and nodes_done >= cfg.node_limit:
            limit_hit = True
            break
        if (
            cfg.time_limit_s is not None
            and time.monotonic() - start > cfg.time_limit_s
        ):
            limit_hit = True
            break
        if cfg.node_order == BEST_BOUND:
            _, _, node = heapq.heappop(heap)
        else:
            node = stack.pop()
        if node.bound >= cutoff():
            continue

        lb = root_lb.copy()
        ub = root_ub.copy()
        for j, (lo, hi) in node.overrides.items():
            lb[j], ub[j] = lo, hi
        seed = None
        if node.overrides:
            seed = np.unique(
                np.concatenate([rows_t.col_rows[j] for j in node.overrides])
            )
        feasible = propagate_bounds(rows_t, lb, ub, binaries, seed_rows=seed)
        nodes_done += 1
        if not feasible:
            bound_history.append(min(open_bounds(), incumbent_obj))
            continue

        lp = solve_standard_form(sf_t, cfg, lb=lb, ub=ub)
        lp_iters += lp.iterations
        if lp.status == UNBOUNDED:
            raise SolverError("LP relaxation unbounded; model is ill-posed")
        if lp.status == INFEASIBLE:
            bound_history.append(min(open_bounds(), incumbent_obj))
            continue
        bound = max(lp.objective, node.bound)
        if node.id in parentage and cfg.branching == PSEUDOCOST:
            pobj, bcol, bdir, bfrac = parentage.pop(node.id)
            pseudo.record(bcol, bdir, max(bound - pobj, 0.0), bfrac)
        if bound >= cutoff():
            bound_history.append(min(open_bounds(), incumbent_obj))
            continue

        v = lp.values
        frac = np.abs(v[bin_cols] - np.round(v[bin_cols]))
        fractional = bin_cols[frac > cfg.integrality_tol]
        if len(fractional) == 0:
            if lp.objective < incumbent_obj - _INT_ROUND_TOL:
                incumbent_obj = lp.objective
                incumbent = v.copy()
                incumbent_history.append(incumbent_obj)
            bound_history.append(min(open_bounds(), incumbent_obj))
            continue

        fr = v[fractional] - np.floor(v[fractional])
        if cfg.branching == PSEUDOCOST:
            scores = np.array(
                [pseudo.score(j, f) for j, f in zip(fractional, fr)]
            )
            pick = int(np.argmax(scores))
        else:
            pick = int(np.argmax(np.minimum(fr, 1.0 - fr)))
        bcol = int(fractional[pick])
        bfrac = float(fr[pick])

        children = []
        for direction, (lo, hi) in ((-1, (0.0, 0.0)), (+1, (1.0, 1.0))):
            child = _Node(
                id=next_id,
                depth=node.depth + 1,
                bound=bound,
                overrides={**node.overrides, bcol: (lo, hi)},
            )
            next_id += 1
            parentage[child.id] = (bound, bcol, direction, bfrac)
            children.append(child)
        if cfg.node_order == BEST_BOUND:
            for child in children:
                heapq.heappush(heap, (child.bound, child.id, child))
        else:
            # Dive toward the nearer integer first (it is pushed last).
            if bfrac >= 0.5:
                stack.extend([children[0], children[1]])
            else:
                stack.extend([children[1], children[0]])
        bound_history.append(min(open_bounds(), incumbent_obj))

    if limit_hit:
        final_bound = min(open_bounds(), incumbent_obj)
        gap = (
            (incumbent_obj - final_bound) / max(1.0, abs(incumbent_obj))
            if np.isfinite(incumbent_obj)
            else np.inf
        )
        return BnbResult(
            status=TIME_LIMIT,
            objective=incumbent_obj if np.isfinite(incumbent_obj) else np.nan,
            values=incumbent,
            bound=final_bound,
            gap=max(gap, 0.0),
            nodes=nodes_done,
            lp_iterations=lp_iters,
            bound_history=bound_history,
            incumbent_history=incumbent_history,
        )
    if incumbent is None:
        return BnbResult(
            status=INFEASIBLE, objective=np.nan, values=None, bound=np.inf,
            gap=0.0, nodes=nodes_done, lp_iterations=lp_iters,
            bound_history=bound_history, incumbent_history=incumbent_history,
        )
    return BnbResult(
        status=OPTIMAL,
        objective=incumbent_obj,
        values=incumbent,
        bound=incumbent_obj,
        gap=0.0,
        nodes=nodes_done,
        lp_iterations=lp_iters,
        bound_history=bound_history,
        incumbent_history=incumbent_history,
    )
