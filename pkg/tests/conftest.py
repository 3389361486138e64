from __future__ import annotations

import itertools
import random

import pytest

from routespec.graph import (
    Constraint,
    Multigraph,
    Path,
    Specification,
    Task,
    path_cost,
    path_features,
)


@pytest.fixture
def tri() -> tuple[Multigraph, Specification, Task]:
    """Three vertices a,b,c; e0:a->b t=2, e1:b->c t=2, e2:a->c t=3; one penalty on e2.

    The canonical desk fixture: exactly two simple a->c paths, so every claim
    about it can be checked by hand.
    """
    graph = Multigraph(
        3,
        [(0, 0, 1, 2.0), (1, 1, 2, 2.0), (2, 0, 2, 3.0)],
        labels=("a", "b", "c"),
    )
    spec = Specification(
        (Constraint("g1", "penalty", frozenset({2}), 0.0, 7.0),)
    )
    return graph, spec, Task(0, 2, "a-to-c")


def enumerate_simple_paths(graph: Multigraph, start: int, goal: int) -> list[tuple[int, ...]]:
    """All vertex-simple edge-id sequences from start to goal, by exhaustive DFS."""
    results: list[tuple[int, ...]] = []

    def walk(vertex: int, visited: set[int], edges: tuple[int, ...]) -> None:
        if vertex == goal:
            results.append(edges)
            return
        for edge in graph.out_edges(vertex):
            if edge.head in visited:
                continue
            walk(edge.head, visited | {edge.head}, edges + (edge.edge_id,))

    walk(start, {start}, ())
    return results


def brute_force_best(
    graph: Multigraph,
    spec: Specification,
    w,
    start: int,
    goal: int,
) -> tuple[float, tuple[int, ...]]:
    """Minimum-cost simple path by enumeration, breaking ties like the planner:
    lower cost, then fewer edges, then lexicographically smallest id sequence."""
    best = None
    for edges in enumerate_simple_paths(graph, start, goal):
        duration = sum(graph.edge(i).time_s for i in edges)
        cost = path_cost(path_features(edges, graph, spec), duration, w)
        key = (cost, len(edges), edges)
        if best is None or key < best:
            best = key
    assert best is not None, "goal unreachable in fixture"
    return best[0], best[2]


def path_of(graph: Multigraph, spec: Specification, edges: tuple[int, ...]) -> Path:
    duration = float(sum(graph.edge(i).time_s for i in edges))
    return Path(edges, duration, path_features(edges, graph, spec))


def random_connected_graph(
    rng: random.Random,
    max_vertices: int = 12,
    parallel_prob: float = 0.3,
) -> Multigraph:
    """Random strongly connected multigraph: a directed ring plus chords, with
    occasional slower parallel edges."""
    n = rng.randint(3, max_vertices)
    raw: list[tuple[int, int, float]] = []
    order = list(range(n))
    rng.shuffle(order)
    for i in range(n):
        tail, head = order[i], order[(i + 1) % n]
        raw.append((tail, head, rng.uniform(1.0, 6.0)))
    for _ in range(rng.randint(1, 2 * n)):
        tail, head = rng.sample(range(n), 2)
        raw.append((tail, head, rng.uniform(1.0, 6.0)))
    if rng.random() < parallel_prob:
        tail, head, t = raw[rng.randrange(len(raw))]
        raw.append((tail, head, t * 2.0))
    edges = [(i, tail, head, t) for i, (tail, head, t) in enumerate(raw)]
    return Multigraph(n, edges)


def random_spec(rng: random.Random, graph: Multigraph, max_dim: int = 4) -> Specification:
    """Random penalty/reward constraints over the graph with paper-style bounds."""
    d = rng.randint(1, max_dim)
    total_time = sum(e.time_s for e in graph.edges)
    constraints = []
    reward_members: list[frozenset[int]] = []
    for k in range(d):
        size = rng.randint(1, max(1, graph.num_edges // 2))
        members = frozenset(rng.sample(range(graph.num_edges), min(size, graph.num_edges)))
        kind = "penalty" if rng.random() < 0.7 else "reward"
        if kind == "penalty":
            constraints.append(Constraint(f"c{k}", "penalty", members, 0.0, total_time))
        else:
            reward_members.append(members)
            constraints.append((f"c{k}", members))  # placeholder, bounds set below
    # Reward lower bounds need the overlap count so the spec always validates.
    built = []
    for item in constraints:
        if isinstance(item, Constraint):
            built.append(item)
            continue
        cid, members = item
        t_min = min(graph.edge(i).time_s for i in members)
        mu = max(
            sum(1 for other in reward_members if edge_id in other) for edge_id in members
        )
        built.append(
            Constraint(cid, "reward", members, -(1.0 - 1e-3) * t_min / mu, 0.0)
        )
    return Specification(tuple(built))


def all_pairs(graph: Multigraph) -> list[tuple[int, int]]:
    return [
        (s, g)
        for s, g in itertools.product(range(graph.num_vertices), repeat=2)
        if s != g
    ]
