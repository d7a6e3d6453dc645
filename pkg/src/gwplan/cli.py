"""Command-line entry point.

Subcommands:

* ``plan run``    solve one scenario and write report files.
* ``plan sweep``  solve a list of weight triples and write a comparison table.
* ``plan check``  audit an assignment file against a model (MPS or scenario).

Exit codes: 0 solved to optimality (or clean check), 2 stopped at a limit
with an incumbent, 3 infeasible (or failed check), 1 usage or runtime error.
"""

from __future__ import annotations

import argparse
import sys

import yaml

from gwplan import milp as milp_mod
from gwplan.netgraph import build_all, directed_expansion
from gwplan.orbital import propagate
from gwplan.report import (
    comparison_rows,
    config_from_scenario,
    emit,
    emit_sweep,
    run_pipeline,
    sweep,
)
from gwplan.scenario import ScenarioError, load_scenario
from gwplan.solver import (
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    check_solution,
    read_assignment,
    read_mps,
)

_STATUS_EXIT = {OPTIMAL: 0, TIME_LIMIT: 2, INFEASIBLE: 3}


def _parse_weights(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated weights")
    return (parts[0], parts[1], parts[2])


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plan",
        description="Gateway placement, routing, and flow planning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="solve one scenario")
    run_p.add_argument("--scenario", required=True, help="scenario YAML file")
    run_p.add_argument(
        "--weights",
        type=_parse_weights,
        default=None,
        metavar="WG,WF,WL",
        help="override the scenario cost weights",
    )
    run_p.add_argument("--mps-out", default=None, help="also export the model as MPS")
    run_p.add_argument("--time-limit", type=float, default=None, metavar="S")
    run_p.add_argument("--node-limit", type=int, default=None)
    run_p.add_argument(
        "--node-order", choices=["best_bound", "depth_first"], default=None
    )
    run_p.add_argument("--out", required=True, help="output directory")

    sweep_p = sub.add_parser("sweep", help="solve several weight triples")
    sweep_p.add_argument("--scenario", required=True)
    sweep_p.add_argument(
        "--cases", required=True, help="YAML file with a list of weight triples"
    )
    sweep_p.add_argument("--time-limit", type=float, default=None, metavar="S")
    sweep_p.add_argument("--out", required=True)

    check_p = sub.add_parser("check", help="audit an assignment against a model")
    check_p.add_argument(
        "--model", required=True, help="MPS file, or scenario YAML to rebuild from"
    )
    check_p.add_argument("--assignment", required=True, help="name value lines")
    check_p.add_argument("--tol", type=float, default=1e-7)
    return parser


def _solver_config(args, scenario):
    cfg = config_from_scenario(scenario)
    if getattr(args, "time_limit", None) is not None:
        cfg.time_limit_s = args.time_limit
    if getattr(args, "node_limit", None) is not None:
        cfg.node_limit = args.node_limit
    if getattr(args, "node_order", None):
        cfg.node_order = args.node_order
    return cfg


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    cfg = _solver_config(args, scenario)
    report, _, result = run_pipeline(
        scenario, weights=args.weights, config=cfg, mps_out=args.mps_out
    )
    emit(report, args.out)
    print(
        f"status={report.status} gateways={report.selected_gateways} "
        f"objective={report.objective:.6f} nodes={report.solver_nodes}"
    )
    return _STATUS_EXIT.get(result.status, 1)


def _cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    cfg = _solver_config(args, scenario)
    with open(args.cases, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    cases = []
    for entry in raw:
        if isinstance(entry, dict):
            cases.append(
                (float(entry["gateway"]), float(entry["flow"]), float(entry["latency"]))
            )
        else:
            cases.append(tuple(float(v) for v in entry))
    reports = sweep(scenario, cases, config=cfg)
    emit_sweep(reports, args.out)
    for row in comparison_rows(reports):
        print(
            f"case {row['case']}: w=({row['w_gateway']}, {row['w_flow']}, "
            f"{row['w_latency']}) gateways={row['gateway_count']} "
            f"latency_raw={row['avg_latency_raw_ms']:.3f}ms status={row['status']}"
        )
    statuses = {r.status for r in reports}
    if statuses == {OPTIMAL}:
        return 0
    if INFEASIBLE in statuses:
        return 3
    return 2


def _cmd_check(args) -> int:
    if args.model.endswith(".mps"):
        model = read_mps(args.model)
    else:
        scenario = load_scenario(args.model)
        eph = propagate(scenario.constellation, scenario.time)
        snapshots = [directed_expansion(g) for g in build_all(scenario, eph)]
        model = milp_mod.build_model(scenario, snapshots)
    assignment = read_assignment(args.assignment, model)
    violations = check_solution(model, assignment, tol=args.tol)
    if not violations:
        print(f"OK: {model.n_cols} columns, {len(model.constraints)} rows, "
              f"no violation above {args.tol:g}")
        return 0
    for name, magnitude in violations[:50]:
        print(f"VIOLATED {name}: {magnitude:.3e}")
    if len(violations) > 50:
        print(f"... and {len(violations) - 50} more")
    return 3


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "check":
            return _cmd_check(args)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
