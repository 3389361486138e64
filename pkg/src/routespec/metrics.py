"""Specification-quality metrics.

Entropy: at each vertex, moving to a neighbor is weighted by the inverse of
the cheapest parallel edge's combined cost; the vertex entropy is the Shannon
entropy (base 2) of that distribution, and the graph entropy is the sum over
vertices. The entropy ratio divides the weighted graph's entropy by the
unweighted one: lower means the rules pin the robot down more.

Time ratio: mean optimal-path duration under the weighted costs over the mean
time-only optimum, for a chosen set of start/goal pairs (the scenario's tasks,
or globally all ordered vertex pairs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import Multigraph, Router, Specification, Task


class MetricError(ValueError):
    """Metric preconditions violated (nonpositive cost, empty input)."""


def vertex_entropy(
    graph: Multigraph, spec: Specification, w: Sequence[float], vertex: int
) -> float:
    """Entropy in bits of the inverse-cost move distribution at one vertex."""
    router = Router(graph, spec)
    return _vertex_entropy(graph, router.edge_costs(w), vertex)


def graph_entropy(graph: Multigraph, spec: Specification, w: Sequence[float]) -> float:
    router = Router(graph, spec)
    costs = router.edge_costs(w)
    return float(
        sum(_vertex_entropy(graph, costs, v) for v in range(graph.num_vertices))
    )


def entropy_ratio(graph: Multigraph, spec: Specification, w: Sequence[float]) -> float:
    """Weighted-to-unweighted graph entropy; NaN when the unweighted entropy is
    zero (degenerate single-choice graphs)."""
    base = graph_entropy(graph, spec, np.zeros(spec.dimension))
    if base == 0.0:
        return math.nan
    return graph_entropy(graph, spec, w) / base


def _vertex_entropy(graph: Multigraph, costs: np.ndarray, vertex: int) -> float:
    cheapest: dict[int, float] = {}
    for edge in graph.out_edges(vertex):
        cost = costs[edge.edge_id]
        if cost <= 0.0:
            raise MetricError(
                f"edge {edge.edge_id} has nonpositive combined cost {cost:.6g}"
            )
        prior = cheapest.get(edge.head)
        if prior is None or cost < prior:
            cheapest[edge.head] = cost
    if len(cheapest) <= 1:
        return 0.0
    inverse = np.array([1.0 / c for c in cheapest.values()])
    p = inverse / inverse.sum()
    return float(-(p * np.log2(p)).sum())


def move_probabilities(
    graph: Multigraph, spec: Specification, w: Sequence[float], vertex: int
) -> dict[int, float]:
    """Per-neighbor move probabilities at a vertex (inverse cheapest cost)."""
    costs = Router(graph, spec).edge_costs(w)
    cheapest: dict[int, float] = {}
    for edge in graph.out_edges(vertex):
        cost = costs[edge.edge_id]
        if cost <= 0.0:
            raise MetricError(f"edge {edge.edge_id} has nonpositive combined cost")
        prior = cheapest.get(edge.head)
        if prior is None or cost < prior:
            cheapest[edge.head] = cost
    total = sum(1.0 / c for c in cheapest.values())
    return {head: (1.0 / c) / total for head, c in cheapest.items()}


def time_ratio(
    router: Router, w: Sequence[float], pairs: Sequence[tuple[int, int]]
) -> float:
    """Mean weighted-optimal duration over mean time-only duration for the pairs."""
    if not pairs:
        raise MetricError("time ratio needs at least one start/goal pair")
    w = np.asarray(w, dtype=float)
    zero = np.zeros(router.spec.dimension)
    weighted = 0.0
    base = 0.0
    by_source: dict[int, list[int]] = {}
    for start, goal in pairs:
        if start == goal:
            raise MetricError("time ratio pairs must have start != goal")
        by_source.setdefault(start, []).append(goal)
    for start, goals in by_source.items():
        weighted_paths = router.shortest_paths_from(w, start)
        base_paths = router.shortest_paths_from(zero, start)
        for goal in goals:
            if goal not in weighted_paths:
                raise MetricError(f"goal {goal} unreachable from {start}")
            weighted += weighted_paths[goal].duration_s
            base += base_paths[goal].duration_s
    return (weighted / len(pairs)) / (base / len(pairs))


def task_pairs(tasks: Sequence[Task]) -> list[tuple[int, int]]:
    return [(t.start, t.goal) for t in tasks]


def global_pairs(graph: Multigraph) -> list[tuple[int, int]]:
    """All ordered vertex pairs with start != goal (self-pairs are dropped)."""
    n = graph.num_vertices
    return [(s, g) for s in range(n) for g in range(n) if s != g]


def acceptance_rates(log: Sequence[dict]) -> tuple[float, float]:
    """(alpha_all, alpha_tasks): fraction of queries where the alternative won,
    and fraction of presented tasks with at least one accepted alternative."""
    choices = [entry for entry in log if entry.get("type") == "choice"]
    if not choices:
        raise MetricError("acceptance rates need at least one recorded choice")
    accepted = sum(1 for c in choices if c["accepted"])
    tasks_presented = {c["instance"] for c in choices}
    tasks_accepted = {c["instance"] for c in choices if c["accepted"]}
    return accepted / len(choices), len(tasks_accepted) / len(tasks_presented)


@dataclass(frozen=True)
class MetricReport:
    entropy_ratio: float
    task_time_ratio: float
    global_time_ratio: float | None
    per_vertex_entropy: tuple[float, ...]
    alpha_all: float | None
    alpha_tasks: float | None

    def to_dict(self) -> dict:
        return {
            "entropy_ratio": _none_if_nan(self.entropy_ratio),
            "task_time_ratio": _none_if_nan(self.task_time_ratio),
            "global_time_ratio": (
                None if self.global_time_ratio is None else _none_if_nan(self.global_time_ratio)
            ),
            "per_vertex_entropy": list(self.per_vertex_entropy),
            "alpha_all": self.alpha_all,
            "alpha_tasks": self.alpha_tasks,
        }


def metric_report(
    router: Router,
    w: Sequence[float],
    tasks: Sequence[Task],
    log: Sequence[dict] = (),
    include_global: bool = False,
) -> MetricReport:
    graph, spec = router.graph, router.spec
    costs = router.edge_costs(w)
    per_vertex = tuple(
        _vertex_entropy(graph, costs, v) for v in range(graph.num_vertices)
    )
    alpha_all = alpha_tasks = None
    if any(entry.get("type") == "choice" for entry in log):
        alpha_all, alpha_tasks = acceptance_rates(log)
    return MetricReport(
        entropy_ratio=entropy_ratio(graph, spec, w),
        task_time_ratio=time_ratio(router, w, task_pairs(tasks)),
        global_time_ratio=(
            time_ratio(router, w, global_pairs(graph)) if include_global else None
        ),
        per_vertex_entropy=per_vertex,
        alpha_all=alpha_all,
        alpha_tasks=alpha_tasks,
    )


def _none_if_nan(value: float):
    return None if isinstance(value, float) and math.isnan(value) else value
