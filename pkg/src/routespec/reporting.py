"""Report rendering: delimited outputs plus matplotlib figures.

Every CLI verb that reports writes machine-readable CSV/JSON next to rendered
PNGs: an annotated map of the environment (grid, zones in the interface
palette — roads green with heading arrows, speed zones yellow, avoid zones
red — and path overlays) and a metric summary chart.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path as FilePath
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Polygon as MplPolygon

from .batch import BatchReport
from .environment import ParsedEnvironment, vertex_positions_m
from .graph import Multigraph, Path

ZONE_COLORS = {"road": "#2ca02c", "speed_limit": "#ffcf33", "avoid": "#d62728"}


def ensure_dir(out_dir: str | FilePath) -> FilePath:
    path = FilePath(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_paths_csv(
    out_file: str | FilePath,
    rows: Sequence[dict],
) -> None:
    """One row per (task, stage) path: label, stage, duration, violations, edges."""
    fieldnames = ["task", "stage", "duration_s", "violations", "num_edges", "edges"]
    with FilePath(out_file).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_metrics_csv(out_file: str | FilePath, metrics: dict) -> None:
    with FilePath(out_file).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "value"])
        for key, value in metrics.items():
            writer.writerow([key, value])


def write_json(out_file: str | FilePath, payload: dict) -> None:
    FilePath(out_file).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def draw_environment(
    parsed: ParsedEnvironment,
    graph: Multigraph,
    paths: Sequence[tuple[str, Path, str]] = (),
    out_file: str | FilePath = "map.png",
) -> None:
    """Render the occupancy grid, zones, tasks, and labeled path overlays."""
    env = parsed.environment
    fig, ax = plt.subplots(figsize=(9, 9 * env.rows / max(env.cols, 1)))
    occupancy = np.array(
        [[1.0 if ch == "#" else 0.0 for ch in row] for row in env.grid]
    )
    size = env.cell_size_m
    ax.imshow(
        occupancy,
        cmap="gray_r",
        origin="upper",
        extent=(0, env.cols * size, env.rows * size, 0),
        interpolation="nearest",
    )

    for zone in parsed.zones:
        color = ZONE_COLORS[zone.kind]
        patch = MplPolygon(
            zone.polygon, closed=True, facecolor=color, edgecolor=color, alpha=0.35
        )
        ax.add_patch(patch)
        if zone.kind == "road" and zone.direction is not None:
            centroid = np.mean(np.array(zone.polygon), axis=0)
            arrow = np.array(zone.direction) * 1.5 * size
            headings = [arrow] if not zone.two_way else [arrow, -arrow]
            for heading in headings:
                ax.annotate(
                    "",
                    xy=centroid + heading,
                    xytext=centroid,
                    arrowprops=dict(arrowstyle="->", color=color, lw=2),
                )

    positions = vertex_positions_m(env)
    for label, path, color in paths:
        if not path.edge_ids:
            continue
        chain = [graph.edge(path.edge_ids[0]).tail] + [
            graph.edge(e).head for e in path.edge_ids
        ]
        points = positions[chain]
        ax.plot(points[:, 0], points[:, 1], color=color, lw=2, label=label)

    for task in parsed.tasks:
        sy, sx = (task.start[0] + 0.5) * size, (task.start[1] + 0.5) * size
        gy, gx = (task.goal[0] + 0.5) * size, (task.goal[1] + 0.5) * size
        ax.plot(sx, sy, "o", color="#1f77b4", ms=4)
        ax.plot(gx, gy, "s", color="#9467bd", ms=4)

    if paths:
        seen = set()
        handles, labels = ax.get_legend_handles_labels()
        unique = [(h, l) for h, l in zip(handles, labels) if not (l in seen or seen.add(l))]
        ax.legend(*zip(*unique), loc="upper right", fontsize=7)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title("environment and planned paths")
    fig.tight_layout()
    fig.savefig(out_file, dpi=130)
    plt.close(fig)


def draw_metric_summary(
    metrics: dict, out_file: str | FilePath, labels: tuple[str, str] = ("initial", "final")
) -> None:
    """Side-by-side before/after bars for the ratio metrics."""
    pairs = [
        ("task time ratio", metrics.get("initial_task_time_ratio"), metrics.get("final_task_time_ratio")),
        ("entropy ratio", metrics.get("initial_entropy_ratio"), metrics.get("final_entropy_ratio")),
    ]
    if metrics.get("initial_global_time_ratio") is not None:
        pairs.insert(
            1,
            (
                "global time ratio",
                metrics.get("initial_global_time_ratio"),
                metrics.get("final_global_time_ratio"),
            ),
        )
    pairs = [(name, a, b) for name, a, b in pairs if a is not None and b is not None]
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(pairs), 4))
    x = np.arange(len(pairs))
    ax.bar(x - 0.18, [p[1] for p in pairs], width=0.36, label=labels[0], color="#d62728")
    ax.bar(x + 0.18, [p[2] for p in pairs], width=0.36, label=labels[1], color="#1f77b4")
    ax.set_xticks(x)
    ax.set_xticklabels([p[0] for p in pairs], fontsize=8)
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.legend(fontsize=8)
    ax.set_title("specification quality before and after learning")
    fig.tight_layout()
    fig.savefig(out_file, dpi=130)
    plt.close(fig)


def draw_batch_summary(report: BatchReport, out_file: str | FilePath) -> None:
    """Per-session scatter of initial vs final task time ratio plus the
    acceptance-rate histogram."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    finals = [r.final_task_time_ratio for r in report.results]
    initials = [r.initial_task_time_ratio for r in report.results]
    left.scatter(initials, finals, s=14, alpha=0.6, color="#1f77b4")
    limit = max(initials + finals) * 1.05
    left.plot([1, limit], [1, limit], color="gray", lw=0.8, ls="--")
    left.set_xlabel("initial task time ratio")
    left.set_ylabel("final task time ratio")
    left.set_title("per-session time ratio shift")

    alphas = [r.alpha_all for r in report.results if r.alpha_all is not None]
    right.hist(alphas, bins=12, color="#2ca02c", alpha=0.8)
    right.set_xlabel("acceptance rate (alternatives chosen)")
    right.set_ylabel("sessions")
    right.set_title("acceptance rates")
    fig.tight_layout()
    fig.savefig(out_file, dpi=130)
    plt.close(fig)


def write_batch_csv(report: BatchReport, out_file: str | FilePath) -> None:
    fieldnames = [
        "seed",
        "status",
        "iterations",
        "accepted",
        "alpha_all",
        "alpha_tasks",
        "initial_task_time_ratio",
        "final_task_time_ratio",
        "initial_entropy_ratio",
        "final_entropy_ratio",
    ]
    with FilePath(out_file).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for result in report.results:
            writer.writerow(result.to_dict())
