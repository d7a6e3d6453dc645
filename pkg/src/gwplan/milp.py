"""Planning model: variables, linear constraints, and weighted objective.

Decision variables (time steps t run 1..T over the snapshot list):

* ``x[l]``        binary, gateway l is deployed; shared by all time steps.
* ``b[i,t]``      continuous in [0, r_i], flow allocated to traffic i.
* ``y[i,e,t]``    binary, directed edge e carries traffic i at step t.
* ``f[i,e,t]``    continuous >= 0, flow of traffic i on edge e at step t.
* ``z[e,t]``      binary, feeder edge e is an active feeder link at step t.
* ``s[i,t]``      continuous in [0, 1], flow-gap slack: s >= (r_i - b)/r_i.

Constraint groups (row name prefixes):

* feeder_needs_gw:    y[i,e,t] <= x[gw]            (feeder edges only)
* feeder_needs_link:  y[i,e,t] <= z[e,t]           (feeder edges only)
* flow_needs_path:    f[i,e,t] <= M y[i,e,t]       (every edge)
* one_sat_per_user:   sum of y over user i's UL edges <= 1
* one_feeder_per_sat / one_feeder_per_gw: sums of z <= 1
* cap_user:           UL inflow per satellite <= user capacity
* cap_isl:            both directions of an ISL pair, all traffic <= ISL cap
* cap_feeder:         per feeder edge, all traffic <= feeder capacity
*                     (terrestrial edges are uncapacitated)
* alloc_balance:      b[i,t] = sum of f over user i's UL edges
* flow_balance / path_balance: per-satellite conservation of f and of y
* deliver_flow:       b[i,t] = feeder + terrestrial inflow at the destination
* deliver_once:       at most one delivery edge per traffic and step
* relay_flow / relay_noin / relay_path: non-destination gateways forward
*                     feeder inflow to terrestrial outflow and accept no
*                     terrestrial inflow
* flow_gap:           r_i s[i,t] + b[i,t] >= r_i

The objective minimizes

    w_g/N_g * sum x  +  w_f/(T N_u) * sum s  +  w_l/(T N_u L) * sum lat_e y.

Rows that would have no terms are omitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from gwplan.netgraph import EdgeKind, NodeKind, NodeRef, SnapshotGraph
from gwplan.scenario import Scenario

BINARY = "binary"
CONTINUOUS = "continuous"

LE, EQ, GE = "<=", "=", ">="

# Column symbols in deterministic sort order.
SYM_X, SYM_B, SYM_Y, SYM_F, SYM_Z, SYM_S = "x", "b", "y", "f", "z", "s"


@dataclass(frozen=True)
class VarRef:
    symbol: str
    indices: tuple[int, ...]
    domain: str
    column: int
    name: str


@dataclass
class LinConstraint:
    name: str
    terms: list[tuple[int, float]]
    sense: str
    rhs: float


@dataclass
class ModelMeta:
    """Scenario facts needed to rebuild cost terms from raw variables."""

    n_users: int
    n_gateways: int
    steps: int
    flow_req: tuple[float, ...]
    destination: tuple[int, ...]
    weights: tuple[float, float, float]
    latency_norm_s: float
    big_m: float
    edge_latency: dict[tuple[int, int], float] = field(default_factory=dict)


@dataclass
class MilpModel:
    columns: list[VarRef] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    constraints: list[LinConstraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    sense: str = "min"
    meta: ModelMeta | None = None
    _index: dict[tuple[str, tuple[int, ...]], int] = field(default_factory=dict)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def add_column(
        self,
        symbol: str,
        indices: tuple[int, ...],
        domain: str,
        lb: float,
        ub: float,
        name: str,
    ) -> int:
        col = len(self.columns)
        self.columns.append(VarRef(symbol, indices, domain, col, name))
        self.lb.append(lb)
        self.ub.append(ub)
        self._index[(symbol, indices)] = col
        return col

    def col(self, symbol: str, *indices: int) -> int:
        return self._index[(symbol, tuple(indices))]

    def has_col(self, symbol: str, *indices: int) -> bool:
        return (symbol, tuple(indices)) in self._index

    def add_constraint(
        self, name: str, terms: Iterable[tuple[int, float]], sense: str, rhs: float
    ) -> None:
        terms = [(c, v) for c, v in terms if v != 0.0]
        if not terms:
            return
        cols = [c for c, _ in terms]
        if len(cols) != len(set(cols)):
            raise ValueError(f"duplicate column in constraint {name}")
        self.constraints.append(LinConstraint(name, terms, sense, rhs))

    def binary_columns(self) -> np.ndarray:
        return np.array([v.domain == BINARY for v in self.columns], dtype=bool)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_cols)
        for col, coef in self.objective.items():
            c[col] = coef
        return c

    def objective_row_value(self, assignment: np.ndarray) -> float:
        return float(self.objective_vector() @ assignment) + self.objective_constant


def _check_directed(snapshots: Sequence[SnapshotGraph]) -> None:
    for g in snapshots:
        if not g.directed:
            raise ValueError("model building requires directed-expanded snapshots")


def build_variables(
    scenario: Scenario, snapshots: Sequence[SnapshotGraph]
) -> MilpModel:
    """Create all columns in deterministic order: x, b, y, f, z, s."""
    _check_directed(snapshots)
    if len(snapshots) != scenario.time.steps:
        raise ValueError("snapshot list does not cover the time grid")
    model = MilpModel()
    model.meta = ModelMeta(
        n_users=scenario.n_users,
        n_gateways=scenario.n_gateways,
        steps=scenario.time.steps,
        flow_req=tuple(d.flow_mbps for d in scenario.traffic),
        destination=tuple(d.destination_gateway for d in scenario.traffic),
        weights=scenario.weights.as_tuple(),
        latency_norm_s=scenario.weights.latency_norm_s,
        big_m=scenario.big_m_mbps,
    )
    for e_t in ((e, g.t) for g in snapshots for e in g.edges):
        model.meta.edge_latency[(e_t[0].id, e_t[1])] = e_t[0].latency_s

    for g in scenario.gateways:
        model.add_column(SYM_X, (g.id,), BINARY, 0.0, 1.0, f"x_g{g.id}")
    for g in snapshots:
        for d in scenario.traffic:
            model.add_column(
                SYM_B, (d.id, g.t), CONTINUOUS, 0.0, d.flow_mbps, f"b_u{d.id}_t{g.t}"
            )
    for g in snapshots:
        for d in scenario.traffic:
            for e in g.edges:
                model.add_column(
                    SYM_Y,
                    (d.id, e.id, g.t),
                    BINARY,
                    0.0,
                    1.0,
                    f"y_u{d.id}_e{e.id}_t{g.t}",
                )
    for g in snapshots:
        for d in scenario.traffic:
            for e in g.edges:
                model.add_column(
                    SYM_F,
                    (d.id, e.id, g.t),
                    CONTINUOUS,
                    0.0,
                    np.inf,
                    f"f_u{d.id}_e{e.id}_t{g.t}",
                )
    for g in snapshots:
        for e in g.edges:
            if e.kind == EdgeKind.FL:
                model.add_column(
                    SYM_Z, (e.id, g.t), BINARY, 0.0, 1.0, f"z_e{e.id}_t{g.t}"
                )
    for g in snapshots:
        for d in scenario.traffic:
            model.add_column(
                SYM_S, (d.id, g.t), CONTINUOUS, 0.0, 1.0, f"s_u{d.id}_t{g.t}"
            )
    return model


def add_feasibility_constraints(
    model: MilpModel, scenario: Scenario, snapshots: Sequence[SnapshotGraph]
) -> None:
    """Feeder activation coupling and the big-M flow/path coupling."""
    M = scenario.big_m_mbps
    for g in snapshots:
        fl_edges = g.of_kind(EdgeKind.FL)
        for d in scenario.traffic:
            for e in fl_edges:
                model.add_constraint(
                    f"feeder_needs_gw_u{d.id}_e{e.id}_t{g.t}",
                    [
                        (model.col(SYM_Y, d.id, e.id, g.t), 1.0),
                        (model.col(SYM_X, e.v.index), -1.0),
                    ],
                    LE,
                    0.0,
                )
                model.add_constraint(
                    f"feeder_needs_link_u{d.id}_e{e.id}_t{g.t}",
                    [
                        (model.col(SYM_Y, d.id, e.id, g.t), 1.0),
                        (model.col(SYM_Z, e.id, g.t), -1.0),
                    ],
                    LE,
                    0.0,
                )
        for d in scenario.traffic:
            for e in g.edges:
                model.add_constraint(
                    f"flow_needs_path_u{d.id}_e{e.id}_t{g.t}",
                    [
                        (model.col(SYM_F, d.id, e.id, g.t), 1.0),
                        (model.col(SYM_Y, d.id, e.id, g.t), -M),
                    ],
                    LE,
                    0.0,
                )


def add_connection_constraints(
    model: MilpModel, snapshots: Sequence[SnapshotGraph]
) -> None:
    """At most one user link per traffic; one feeder per satellite and gateway."""
    assert model.meta is not None
    for g in snapshots:
        for i in range(model.meta.n_users):
            user = NodeRef(NodeKind.USER, i)
            terms = [
                (model.col(SYM_Y, i, e.id, g.t), 1.0)
                for e in g.out_edges(user)
                if e.kind == EdgeKind.UL
            ]
            model.add_constraint(f"one_sat_per_user_u{i}_t{g.t}", terms, LE, 1.0)
        for j in range(g.n_sats):
            sat = NodeRef(NodeKind.SAT, j)
            terms = [
                (model.col(SYM_Z, e.id, g.t), 1.0)
                for e in g.out_edges(sat)
                if e.kind == EdgeKind.FL
            ]
            model.add_constraint(f"one_feeder_per_sat_s{j}_t{g.t}", terms, LE, 1.0)
        for l in range(g.n_gateways):
            gw = NodeRef(NodeKind.GW, l)
            terms = [
                (model.col(SYM_Z, e.id, g.t), 1.0)
                for e in g.in_edges(gw)
                if e.kind == EdgeKind.FL
            ]
            model.add_constraint(f"one_feeder_per_gw_g{l}_t{g.t}", terms, LE, 1.0)


def add_capacity_constraints(
    model: MilpModel, scenario: Scenario, snapshots: Sequence[SnapshotGraph]
) -> None:
    """Per-kind capacity bounds; an ISL pair shares one budget across directions."""
    caps = scenario.capacities
    for g in snapshots:
        for j in range(g.n_sats):
            sat = NodeRef(NodeKind.SAT, j)
            ul_in = [e for e in g.in_edges(sat) if e.kind == EdgeKind.UL]
            terms = [
                (model.col(SYM_F, i, e.id, g.t), 1.0)
                for i in range(model.meta.n_users)
                for e in ul_in
            ]
            model.add_constraint(f"cap_user_s{j}_t{g.t}", terms, LE, caps.user_mbps)
        groups: dict[int, list[int]] = {}
        for e in g.edges:
            if e.kind == EdgeKind.ISL:
                groups.setdefault(e.capacity_group, []).append(e.id)
        for grp in sorted(groups):
            terms = [
                (model.col(SYM_F, i, eid, g.t), 1.0)
                for i in range(model.meta.n_users)
                for eid in sorted(groups[grp])
            ]
            model.add_constraint(f"cap_isl_c{grp}_t{g.t}", terms, LE, caps.isl_mbps)
        for e in g.of_kind(EdgeKind.FL):
            terms = [
                (model.col(SYM_F, i, e.id, g.t), 1.0)
                for i in range(model.meta.n_users)
            ]
            model.add_constraint(f"cap_feeder_e{e.id}_t{g.t}", terms, LE,
                                 caps.feeder_mbps)


def add_flow_conservation(
    model: MilpModel, snapshots: Sequence[SnapshotGraph]
) -> None:
    """Source balance at users and per-satellite conservation of f and y."""
    assert model.meta is not None
    for g in snapshots:
        for i in range(model.meta.n_users):
            user = NodeRef(NodeKind.USER, i)
            terms = [(model.col(SYM_B, i, g.t), 1.0)]
            terms += [
                (model.col(SYM_F, i, e.id, g.t), -1.0)
                for e in g.out_edges(user)
                if e.kind == EdgeKind.UL
            ]
            model.add_constraint(f"alloc_balance_u{i}_t{g.t}", terms, EQ, 0.0)
        for i in range(model.meta.n_users):
            for j in range(g.n_sats):
                sat = NodeRef(NodeKind.SAT, j)
                incoming = [
                    e for e in g.in_edges(sat) if e.kind in (EdgeKind.UL, EdgeKind.ISL)
                ]
                outgoing = [
                    e for e in g.out_edges(sat) if e.kind in (EdgeKind.ISL, EdgeKind.FL)
                ]
                for sym, label in ((SYM_F, "flow_balance"), (SYM_Y, "path_balance")):
                    terms = [(model.col(sym, i, e.id, g.t), 1.0) for e in incoming]
                    terms += [(model.col(sym, i, e.id, g.t), -1.0) for e in outgoing]
                    model.add_constraint(f"{label}_u{i}_s{j}_t{g.t}", terms, EQ, 0.0)


def add_delivery_constraints(
    model: MilpModel, scenario: Scenario, snapshots: Sequence[SnapshotGraph]
) -> None:
    """Destination delivery plus relay-gateway forwarding rules."""
    for g in snapshots:
        for d in scenario.traffic:
            dest = NodeRef(NodeKind.GW, d.destination_gateway)
            fl_in = [e for e in g.in_edges(dest) if e.kind == EdgeKind.FL]
            tl_in = [e for e in g.in_edges(dest) if e.kind == EdgeKind.TL]
            terms = [(model.col(SYM_B, d.id, g.t), 1.0)]
            terms += [(model.col(SYM_F, d.id, e.id, g.t), -1.0) for e in fl_in + tl_in]
            model.add_constraint(f"deliver_flow_u{d.id}_t{g.t}", terms, EQ, 0.0)
            y_terms = [
                (model.col(SYM_Y, d.id, e.id, g.t), 1.0) for e in fl_in + tl_in
            ]
            model.add_constraint(f"deliver_once_u{d.id}_t{g.t}", y_terms, LE, 1.0)
            for l in range(g.n_gateways):
                if l == d.destination_gateway:
                    continue
                gw = NodeRef(NodeKind.GW, l)
                r_fl_in = [e for e in g.in_edges(gw) if e.kind == EdgeKind.FL]
                r_tl_out = [e for e in g.out_edges(gw) if e.kind == EdgeKind.TL]
                r_tl_in = [e for e in g.in_edges(gw) if e.kind == EdgeKind.TL]
                terms = [(model.col(SYM_F, d.id, e.id, g.t), 1.0) for e in r_fl_in]
                terms += [(model.col(SYM_F, d.id, e.id, g.t), -1.0) for e in r_tl_out]
                model.add_constraint(f"relay_flow_u{d.id}_g{l}_t{g.t}", terms, EQ, 0.0)
                terms = [(model.col(SYM_F, d.id, e.id, g.t), 1.0) for e in r_tl_in]
                model.add_constraint(f"relay_noin_u{d.id}_g{l}_t{g.t}", terms, EQ, 0.0)
                terms = [(model.col(SYM_Y, d.id, e.id, g.t), 1.0) for e in r_fl_in]
                terms += [(model.col(SYM_Y, d.id, e.id, g.t), -1.0) for e in r_tl_out]
                model.add_constraint(f"relay_path_u{d.id}_g{l}_t{g.t}", terms, EQ, 0.0)


def build_objective(
    model: MilpModel, scenario: Scenario, snapshots: Sequence[SnapshotGraph]
) -> MilpModel:
    """Attach the weighted cost and the flow-gap slack rows."""
    w_g, w_f, w_l = scenario.weights.as_tuple()
    n_g, n_u = scenario.n_gateways, scenario.n_users
    T = scenario.time.steps
    L = scenario.weights.latency_norm_s
    for g in scenario.gateways:
        model.objective[model.col(SYM_X, g.id)] = w_g / n_g
    for g in snapshots:
        for d in scenario.traffic:
            model.objective[model.col(SYM_S, d.id, g.t)] = w_f / (T * n_u)
            for e in g.edges:
                coef = w_l * e.latency_s / (T * n_u * L)
                if coef != 0.0:
                    model.objective[model.col(SYM_Y, d.id, e.id, g.t)] = coef
    # Flow-gap slack, scaled by r_i for integer-friendly coefficients:
    # r_i * s + b >= r_i is s >= (r_i - b)/r_i at the optimum.
    for g in snapshots:
        for d in scenario.traffic:
            model.add_constraint(
                f"flow_gap_u{d.id}_t{g.t}",
                [
                    (model.col(SYM_S, d.id, g.t), d.flow_mbps),
                    (model.col(SYM_B, d.id, g.t), 1.0),
                ],
                GE,
                d.flow_mbps,
            )
    return model


def build_model(scenario: Scenario, snapshots: Sequence[SnapshotGraph]) -> MilpModel:
    """All-in-one model construction from directed-expanded snapshots."""
    model = build_variables(scenario, snapshots)
    add_feasibility_constraints(model, scenario, snapshots)
    add_connection_constraints(model, snapshots)
    add_capacity_constraints(model, scenario, snapshots)
    add_flow_conservation(model, snapshots)
    add_delivery_constraints(model, scenario, snapshots)
    build_objective(model, scenario, snapshots)
    return model


@dataclass
class Solution:
    """Symbol-indexed view of an assignment with the recomputed cost split."""

    x: np.ndarray
    b: np.ndarray  # (T, n_users)
    s: np.ndarray  # (T, n_users), recomputed from b
    latency_s: np.ndarray  # (T, n_users), sum of edge latency over y = 1
    y: dict[tuple[int, int, int], float]
    f: dict[tuple[int, int, int], float]
    z: dict[tuple[int, int], float]
    j_gateway: float
    j_flow: float
    j_latency: float
    objective: float
    destination: tuple[int, ...] | None = None

    def assigned_edges(self, i: int, t: int, tol: float = 0.5) -> list[int]:
        return sorted(e for (ui, e, ut), v in self.y.items()
                      if ui == i and ut == t and v > tol)


def extract_solution(model: MilpModel, assignment: Sequence[float]) -> Solution:
    """Map column values back to symbols and recompute the cost terms.

    The cost split is re-derived from x, b, and y rather than read off the
    objective row, so it independently cross-checks the solver.
    """
    meta = model.meta
    if meta is None:
        raise ValueError("model carries no metadata; build it from a scenario")
    values = np.asarray(assignment, dtype=float)
    if values.shape != (model.n_cols,):
        raise ValueError(
            f"assignment length {values.shape} does not match {model.n_cols} columns"
        )
    T, n_u, n_g = meta.steps, meta.n_users, meta.n_gateways
    x = np.zeros(n_g)
    b = np.zeros((T, n_u))
    lat = np.zeros((T, n_u))
    y: dict[tuple[int, int, int], float] = {}
    f: dict[tuple[int, int, int], float] = {}
    z: dict[tuple[int, int], float] = {}
    s_cols = np.zeros((T, n_u))
    for var in model.columns:
        v = values[var.column]
        if var.symbol == SYM_X:
            x[var.indices[0]] = v
        elif var.symbol == SYM_B:
            i, t = var.indices
            b[t - 1, i] = v
        elif var.symbol == SYM_Y:
            i, e, t = var.indices
            if v != 0.0:
                y[(i, e, t)] = v
            lat[t - 1, i] += meta.edge_latency[(e, t)] * v
        elif var.symbol == SYM_F:
            i, e, t = var.indices
            if v != 0.0:
                f[(i, e, t)] = v
        elif var.symbol == SYM_Z:
            e, t = var.indices
            if v != 0.0:
                z[(e, t)] = v
        elif var.symbol == SYM_S:
            i, t = var.indices
            s_cols[t - 1, i] = v
    req = np.array(meta.flow_req)
    s = np.maximum(0.0, (req[None, :] - b) / req[None, :])
    w_g, w_f, w_l = meta.weights
    j_g = float(x.sum() / n_g)
    j_f = float(s.sum() / (T * n_u))
    j_l = float(lat.sum() / (T * n_u * meta.latency_norm_s))
    return Solution(
        x=x,
        b=b,
        s=s,
        latency_s=lat,
        y=y,
        f=f,
        z=z,
        j_gateway=j_g,
        j_flow=j_f,
        j_latency=j_l,
        objective=w_g * j_g + w_f * j_f + w_l * j_l,
        destination=meta.destination,
    )


def write_lp_text(model: MilpModel, path: str) -> None:
    """Readable dump of the model with row names, for eyeballing and diffing."""
    lines = [f"minimize ({model.sense})"]
    obj = " + ".join(
        f"{coef:.12g} {model.columns[col].name}"
        for col, coef in sorted(model.objective.items())
    )
    lines.append(f"  {obj or '0'}")
    if model.objective_constant:
        lines.append(f"  + {model.objective_constant:.12g}")
    lines.append("subject to")
    for con in model.constraints:
        body = " + ".join(
            f"{coef:.12g} {model.columns[col].name}" for col, coef in con.terms
        )
        lines.append(f"  {con.name}: {body} {con.sense} {con.rhs:.12g}")
    lines.append("bounds")
    for var in model.columns:
        lo = model.lb[var.column]
        hi = model.ub[var.column]
        kind = "bin" if var.domain == BINARY else "cont"
        lines.append(f"  {lo:.12g} <= {var.name} <= {hi:.12g}  [{kind}]")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
