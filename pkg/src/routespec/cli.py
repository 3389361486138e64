"""Command-line interface.

    routespec plan     --env doc.json --stage initial --out reports/
    routespec metrics  --env doc.json --stage initial --global-ratio --out reports/
    routespec simulate --env doc.json --sessions 100 --seed 0 --out reports/
    routespec serve    [--log-dir logs/]
    routespec replay   --log logs/<session>.jsonl

plan/metrics/simulate write CSV (and JSON) reports plus rendered PNG figures
into --out. The bundled facility_small environment is used when --env is
omitted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path as FilePath

import numpy as np

from .batch import BatchConfig, run_batch
from .environment import (
    build_graph,
    compile_zones,
    facility_small_text,
    parse_environment,
    resolve_tasks,
)
from .graph import Router, validate_specification
from .learning import initial_weights, violated_penalties
from .metrics import entropy_ratio, global_pairs, task_pairs, time_ratio
from .reporting import (
    draw_batch_summary,
    draw_environment,
    draw_metric_summary,
    ensure_dir,
    write_batch_csv,
    write_json,
    write_metrics_csv,
    write_paths_csv,
)
from .sessionlog import read_log, replay_log
from .service import serve_forever


def _load_document(env_arg: str | None) -> str:
    if env_arg is None:
        return facility_small_text()
    return FilePath(env_arg).read_text(encoding="utf-8")


def _stage_weights(spec, stage: str) -> np.ndarray:
    if stage == "base":
        return np.zeros(spec.dimension)
    if stage == "initial":
        return initial_weights(spec)
    raise SystemExit(f"unknown stage {stage!r}")


def cmd_plan(args: argparse.Namespace) -> int:
    parsed = parse_environment(_load_document(args.env))
    graph = build_graph(parsed.environment)
    spec, warnings = compile_zones(parsed.zones, parsed.environment, graph)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    report = validate_specification(graph, spec)
    if not report.ok:
        print(f"specification invalid: {report.offending_edges}", file=sys.stderr)
        return 2
    tasks = resolve_tasks(parsed.environment, parsed.tasks)
    router = Router(graph, spec)
    w = _stage_weights(spec, args.stage)

    out = ensure_dir(args.out)
    rows = []
    overlays = []
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]
    for i, task in enumerate(tasks):
        path = router.shortest_path(w, task)
        rows.append(
            {
                "task": task.label,
                "stage": args.stage,
                "duration_s": f"{path.duration_s:.6f}",
                "violations": ";".join(violated_penalties(spec, path)),
                "num_edges": len(path.edge_ids),
                "edges": " ".join(str(e) for e in path.edge_ids),
            }
        )
        overlays.append((task.label, path, palette[i % len(palette)]))
        print(f"{task.label}: {path.duration_s:.2f}s, {len(path.edge_ids)} edges")
    write_paths_csv(out / "paths.csv", rows)
    draw_environment(parsed, graph, overlays, out / "map.png")
    print(f"wrote {out / 'paths.csv'} and {out / 'map.png'}")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    parsed = parse_environment(_load_document(args.env))
    graph = build_graph(parsed.environment)
    spec, _ = compile_zones(parsed.zones, parsed.environment, graph)
    tasks = resolve_tasks(parsed.environment, parsed.tasks)
    router = Router(graph, spec)
    pairs = task_pairs(tasks)
    w0 = _stage_weights(spec, args.stage)
    zero = np.zeros(spec.dimension)

    metrics = {
        "stage": args.stage,
        "dimension": spec.dimension,
        "task_time_ratio": time_ratio(router, w0, pairs),
        "entropy_ratio": entropy_ratio(graph, spec, w0),
    }
    if args.global_ratio:
        everywhere = global_pairs(graph)
        metrics["global_time_ratio"] = time_ratio(router, w0, everywhere)
    out = ensure_dir(args.out)
    write_metrics_csv(out / "metrics.csv", metrics)
    write_json(out / "metrics.json", metrics)
    chart = {
        "initial_task_time_ratio": time_ratio(router, zero, pairs),
        "final_task_time_ratio": metrics["task_time_ratio"],
        "initial_entropy_ratio": entropy_ratio(graph, spec, zero),
        "final_entropy_ratio": metrics["entropy_ratio"],
    }
    if args.global_ratio:
        chart["initial_global_time_ratio"] = time_ratio(router, zero, everywhere)
        chart["final_global_time_ratio"] = metrics["global_time_ratio"]
    draw_metric_summary(chart, out / "metrics.png", labels=("base", args.stage))
    for key, value in metrics.items():
        print(f"{key}: {value}")
    print(f"wrote {out / 'metrics.csv'}, {out / 'metrics.json'}, {out / 'metrics.png'}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    config = BatchConfig(
        document=_load_document(args.env),
        sessions=args.sessions,
        base_seed=args.seed,
        budget=args.budget,
        subset_size=args.subset,
        policy=args.policy,
        user_scale=None if args.full_box_users else "task",
    )
    report = run_batch(config)
    out = ensure_dir(args.out)
    write_batch_csv(report, out / "sessions.csv")
    write_json(out / "batch.json", report.to_dict())
    draw_batch_summary(report, out / "batch.png")
    for key, value in report.aggregates.items():
        print(f"{key}: {value}")
    print(f"wrote {out / 'sessions.csv'}, {out / 'batch.json'}, {out / 'batch.png'}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    serve_forever(bind=None, log_dir=args.log_dir)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    records = read_log(args.log)
    result = replay_log(records)
    print(
        f"replayed {result.queries_replayed} queries, "
        f"{result.choices_replayed} choices; status {result.session.status}"
    )
    if result.ok:
        print("replay matches the log bit-exactly")
        return 0
    for mismatch in result.mismatches:
        print(f"MISMATCH {mismatch}", file=sys.stderr)
    return 1


def _add_shared_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # shared flags are accepted both before and after the subcommand; the
    # after-subcommand copies only override when given
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument(
        "--env",
        default=default(None),
        help="environment document (default: bundled facility_small)",
    )
    parser.add_argument("--seed", type=int, default=default(0), help="base random seed")
    parser.add_argument(
        "--budget", type=int, default=default(20), help="queries per session"
    )
    parser.add_argument(
        "--policy",
        choices=["minvertex", "vertexsearch"],
        default=default("minvertex"),
    )
    parser.add_argument(
        "--subset", type=int, default=default(5), help="task subset size per round"
    )
    parser.add_argument(
        "--out", default=default("reports"), help="output directory for reports"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="routespec",
        description="constraint-aware routing with preference-learned rule weights",
    )
    _add_shared_flags(parser, suppress=False)
    shared = argparse.ArgumentParser(add_help=False)
    _add_shared_flags(shared, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", parents=[shared], help="plan stage paths and render the map")
    plan.add_argument("--stage", choices=["base", "initial"], default="initial")
    plan.set_defaults(func=cmd_plan)

    metrics = sub.add_parser(
        "metrics", parents=[shared], help="specification quality metrics"
    )
    metrics.add_argument("--stage", choices=["base", "initial"], default="initial")
    metrics.add_argument(
        "--global-ratio", action="store_true", help="include the all-pairs time ratio"
    )
    metrics.set_defaults(func=cmd_metrics)

    simulate = sub.add_parser(
        "simulate", parents=[shared], help="run seeded simulated-user sessions"
    )
    simulate.add_argument("--sessions", type=int, default=20)
    simulate.add_argument(
        "--full-box-users",
        action="store_true",
        help="sample users over the full weight box instead of the task-time scale",
    )
    simulate.set_defaults(func=cmd_simulate)

    serve = sub.add_parser("serve", parents=[shared], help="start the HTTP session service")
    serve.add_argument("--log-dir", default="session-logs")
    serve.set_defaults(func=cmd_serve)

    replay = sub.add_parser(
        "replay", parents=[shared], help="verify a session log replays bit-exactly"
    )
    replay.add_argument("--log", required=True)
    replay.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
