"""Turn solutions into routes, latency series, metric tables, and files.

Latency averages come in two flavors because unserved traffic carries zero
assigned-path latency: the raw average keeps those zeros (matching the cost
term the optimizer sees), the served-only average drops them.  Both are
reported together with per-step served counts.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gwplan import milp as milp_mod
from gwplan.milp import MilpModel, Solution, extract_solution
from gwplan.netgraph import (
    EdgeKind,
    NodeKind,
    NodeRef,
    SnapshotGraph,
    build_all,
    directed_expansion,
)
from gwplan.orbital import propagate
from gwplan.scenario import CostWeights, Scenario
from gwplan.solver import (
    OPTIMAL,
    TIME_LIMIT,
    BnbResult,
    SolverConfig,
    solve_milp,
    write_mps,
)

SCHEMA_VERSION = 1


class RouteExtractionError(ValueError):
    """The link-assignment support of a served traffic does not reach its
    destination."""

    def __init__(self, traffic_id: int, t: int, message: str):
        super().__init__(f"traffic {traffic_id} step {t}: {message}")
        self.traffic_id = traffic_id
        self.t = t


@dataclass(frozen=True)
class RouteTrace:
    traffic_id: int
    t: int
    nodes: tuple[NodeRef, ...]
    hops: tuple[tuple[int, str, float], ...]  # (edge id, kind, latency_s)
    total_latency_s: float
    served: bool
    branched: bool


@dataclass
class RunReport:
    schema: int
    scenario_digest: str
    weights: tuple[float, float, float]
    status: str
    selected_gateways: list[int]
    j_gateway: float
    j_flow: float
    j_latency: float
    objective: float
    per_step_latency_raw_ms: list[float]
    per_step_latency_served_ms: list[float | None]
    per_step_served_users: list[int]
    allocated_mbps: list[list[float]]  # [t][i]
    flow_gap: list[list[float]]  # [t][i]
    latency_ms: list[list[float]]  # [t][i]
    routes: list[RouteTrace]
    solver_nodes: int
    solver_lp_iterations: int
    solver_bound: float
    solver_gap: float


def extract_routes(
    solution: Solution, snapshots: Sequence[SnapshotGraph], tol: float = 1e-6
) -> list[RouteTrace]:
    """Walk assigned edges per traffic and step.

    One trace per served (traffic, step); when the assignment supports more
    than one user-to-destination path, every path is emitted and flagged.
    """
    traces: list[RouteTrace] = []
    by_t = {g.t: g for g in snapshots}
    T, n_users = solution.b.shape
    for t in range(1, T + 1):
        g = by_t[t]
        edges_by_id = {e.id: e for e in g.edges}
        for i in range(n_users):
            if solution.b[t - 1, i] <= tol:
                traces.append(
                    RouteTrace(
                        traffic_id=i,
                        t=t,
                        nodes=(),
                        hops=(),
                        total_latency_s=0.0,
                        served=False,
                        branched=False,
                    )
                )
                continue
            support = [edges_by_id[e] for e in solution.assigned_edges(i, t)]
            out_by_node: dict[NodeRef, list] = {}
            for e in support:
                out_by_node.setdefault(e.u, []).append(e)
            start = NodeRef(NodeKind.USER, i)
            dest_ref = NodeRef(NodeKind.GW, _destination(solution, i))
            branched = any(len(v) > 1 for v in out_by_node.values())
            full: list[list] = []
            stack = [(start, [], {start})]
            while stack:
                node, path, seen = stack.pop()
                for e in out_by_node.get(node, []):
                    if e.v in seen:
                        continue
                    new_path = path + [e]
                    if e.v == dest_ref:
                        full.append(new_path)
                    else:
                        stack.append((e.v, new_path, seen | {e.v}))
            if not full:
                raise RouteExtractionError(
                    i, t, "assigned links do not form a path to the destination"
                )
            branched = branched or len(full) > 1
            for p in sorted(full, key=lambda pth: [e.id for e in pth]):
                traces.append(
                    RouteTrace(
                        traffic_id=i,
                        t=t,
                        nodes=tuple([start] + [e.v for e in p]),
                        hops=tuple((e.id, e.kind.value, e.latency_s) for e in p),
                        total_latency_s=float(sum(e.latency_s for e in p)),
                        served=True,
                        branched=branched,
                    )
                )
    return traces


def _destination(solution: Solution, i: int) -> int:
    if solution.destination is None:
        raise ValueError("solution carries no destination map")
    return solution.destination[i]


def compute_metrics(
    solution: Solution,
    scenario: Scenario,
    *,
    result: BnbResult | None = None,
    routes: list[RouteTrace] | None = None,
    status: str = OPTIMAL,
) -> RunReport:
    """Cost split and latency series recomputed from raw variables."""
    T, n_u = solution.b.shape
    lat_ms = solution.latency_s * 1e3
    served = solution.b > 1e-6
    raw_avg = [float(lat_ms[t].mean()) for t in range(T)]
    served_avg: list[float | None] = []
    for t in range(T):
        k = int(served[t].sum())
        served_avg.append(float(lat_ms[t][served[t]].mean()) if k else None)
    return RunReport(
        schema=SCHEMA_VERSION,
        scenario_digest=scenario.digest(),
        weights=scenario.weights.as_tuple(),
        status=status,
        selected_gateways=[int(l) for l in np.flatnonzero(solution.x > 0.5)],
        j_gateway=solution.j_gateway,
        j_flow=solution.j_flow,
        j_latency=solution.j_latency,
        objective=solution.objective,
        per_step_latency_raw_ms=raw_avg,
        per_step_latency_served_ms=served_avg,
        per_step_served_users=[int(served[t].sum()) for t in range(T)],
        allocated_mbps=[[float(v) for v in solution.b[t]] for t in range(T)],
        flow_gap=[[float(v) for v in solution.s[t]] for t in range(T)],
        latency_ms=[[float(v) for v in lat_ms[t]] for t in range(T)],
        routes=routes or [],
        solver_nodes=result.nodes if result else 0,
        solver_lp_iterations=result.lp_iterations if result else 0,
        solver_bound=result.bound if result else float("nan"),
        solver_gap=result.gap if result else float("nan"),
    )


def _with_weights(scenario: Scenario, weights: tuple[float, float, float]) -> Scenario:
    new_w = CostWeights(
        gateway=weights[0],
        flow=weights[1],
        latency=weights[2],
        latency_norm_s=scenario.weights.latency_norm_s,
    )
    return dataclasses.replace(scenario, weights=new_w)


def config_from_scenario(scenario: Scenario) -> SolverConfig:
    opts = scenario.solver_options
    kwargs = {
        k: opts[k]
        for k in (
            "feasibility_tol",
            "integrality_tol",
            "mip_gap",
            "node_limit",
            "time_limit_s",
            "branching",
            "node_order",
        )
        if k in opts
    }
    return SolverConfig(**kwargs)


def run_case(
    scenario: Scenario,
    weights: tuple[float, float, float] | None = None,
    config: SolverConfig | None = None,
    mps_out: str | None = None,
) -> RunReport:
    """Full pipeline: propagate, build graphs and model, solve, report."""
    report, _, _ = run_pipeline(scenario, weights=weights, config=config,
                                mps_out=mps_out)
    return report


def run_pipeline(
    scenario: Scenario,
    weights: tuple[float, float, float] | None = None,
    config: SolverConfig | None = None,
    mps_out: str | None = None,
) -> tuple[RunReport, MilpModel, BnbResult]:
    """run_case plus the underlying model and raw solver result."""
    if weights is not None:
        scenario = _with_weights(scenario, weights)
    cfg = config or config_from_scenario(scenario)
    eph = propagate(scenario.constellation, scenario.time)
    snapshots = [directed_expansion(g) for g in build_all(scenario, eph)]
    model = milp_mod.build_model(scenario, snapshots)
    if mps_out:
        write_mps(model, mps_out)
    result = solve_milp(model, cfg)
    if result.values is None:
        empty = Solution(
            x=np.zeros(scenario.n_gateways),
            b=np.zeros((scenario.time.steps, scenario.n_users)),
            s=np.ones((scenario.time.steps, scenario.n_users)),
            latency_s=np.zeros((scenario.time.steps, scenario.n_users)),
            y={},
            f={},
            z={},
            j_gateway=float("nan"),
            j_flow=float("nan"),
            j_latency=float("nan"),
            objective=float("nan"),
            destination=tuple(d.destination_gateway for d in scenario.traffic),
        )
        report = compute_metrics(empty, scenario, result=result, status=result.status)
        return report, model, result
    solution = extract_solution(model, result.values)
    routes = extract_routes(solution, snapshots)
    report = compute_metrics(
        solution, scenario, result=result, routes=routes, status=result.status
    )
    return report, model, result


def sweep(
    scenario: Scenario,
    cases: Sequence[tuple[float, float, float]],
    config: SolverConfig | None = None,
) -> list[RunReport]:
    """Solve one case per weight triple; reports sorted by the latency weight."""
    reports = [run_case(scenario, weights=triple, config=config) for triple in cases]
    reports.sort(key=lambda r: r.weights[2])
    return reports


def comparison_rows(reports: Sequence[RunReport]) -> list[dict]:
    rows = []
    for idx, r in enumerate(reports):
        raw = [v for v in r.per_step_latency_raw_ms]
        served = [v for v in r.per_step_latency_served_ms if v is not None]
        rows.append(
            {
                "case": idx,
                "w_gateway": r.weights[0],
                "w_flow": r.weights[1],
                "w_latency": r.weights[2],
                "status": r.status,
                "gateway_count": len(r.selected_gateways),
                "gateway_ids": " ".join(str(g) for g in r.selected_gateways),
                "avg_latency_raw_ms": float(np.mean(raw)) if raw else float("nan"),
                "avg_latency_served_ms": (
                    float(np.mean(served)) if served else float("nan")
                ),
                "j_gateway": r.j_gateway,
                "j_flow": r.j_flow,
                "j_latency": r.j_latency,
                "objective": r.objective,
            }
        )
    return rows


def _route_line(trace: RouteTrace, extra: list[RouteTrace]) -> dict:
    def node_name(n: NodeRef) -> str:
        return f"{n.kind.value}{n.index}"

    return {
        "t": trace.t,
        "traffic": trace.traffic_id,
        "nodes": [node_name(n) for n in trace.nodes],
        "hops": [
            {"edge": eid, "kind": kind, "latency_ms": lat * 1e3}
            for eid, kind, lat in trace.hops
        ],
        "latency_ms": trace.total_latency_s * 1e3,
        "branched": trace.branched,
        "branches": [
            {
                "nodes": [node_name(n) for n in b.nodes],
                "latency_ms": b.total_latency_s * 1e3,
            }
            for b in extra
        ],
    }


def _json_safe(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def emit(report: RunReport, outdir: str) -> list[str]:
    """Write metrics.json, latency_series.csv, routes.jsonl; returns paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []

    metrics = {
        "schema": report.schema,
        "scenario_digest": report.scenario_digest,
        "weights": {
            "gateway": report.weights[0],
            "flow": report.weights[1],
            "latency": report.weights[2],
        },
        "status": report.status,
        "selected_gateways": report.selected_gateways,
        "cost": {
            "gateway": _json_safe(report.j_gateway),
            "flow_gap": _json_safe(report.j_flow),
            "latency": _json_safe(report.j_latency),
            "total": _json_safe(report.objective),
        },
        "per_step": {
            "latency_raw_ms": report.per_step_latency_raw_ms,
            "latency_served_ms": report.per_step_latency_served_ms,
            "served_users": report.per_step_served_users,
        },
        "allocated_mbps": report.allocated_mbps,
        "flow_gap": report.flow_gap,
        "latency_ms": report.latency_ms,
        "solver": {
            "nodes": report.solver_nodes,
            "lp_iterations": report.solver_lp_iterations,
            "bound": _json_safe(report.solver_bound),
            "gap": _json_safe(report.solver_gap),
        },
    }
    mpath = os.path.join(outdir, "metrics.json")
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=1, allow_nan=False)
        fh.write("\n")
    paths.append(mpath)

    spath = os.path.join(outdir, "latency_series.csv")
    with open(spath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "avg_latency_raw_ms", "avg_latency_served_ms", "served_users"])
        for t0 in range(len(report.per_step_latency_raw_ms)):
            served = report.per_step_latency_served_ms[t0]
            w.writerow(
                [
                    t0 + 1,
                    f"{report.per_step_latency_raw_ms[t0]:.9g}",
                    "" if served is None else f"{served:.9g}",
                    report.per_step_served_users[t0],
                ]
            )
    paths.append(spath)

    rpath = os.path.join(outdir, "routes.jsonl")
    primary: dict[tuple[int, int], RouteTrace] = {}
    extras: dict[tuple[int, int], list[RouteTrace]] = {}
    for trace in report.routes:
        if not trace.served:
            continue
        key = (trace.t, trace.traffic_id)
        if key not in primary:
            primary[key] = trace
            extras[key] = []
        else:
            extras[key].append(trace)
    with open(rpath, "w", encoding="utf-8") as fh:
        for key in sorted(primary):
            fh.write(json.dumps(_route_line(primary[key], extras[key])))
            fh.write("\n")
    paths.append(rpath)
    return paths


def emit_sweep(reports: Sequence[RunReport], outdir: str) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for idx, report in enumerate(reports):
        paths += emit(report, os.path.join(outdir, f"case{idx}"))
    cpath = os.path.join(outdir, "comparison.csv")
    rows = comparison_rows(reports)
    with open(cpath, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        for row in rows:
            w.writerow(row)
    paths.append(cpath)
    return paths
