"""Directed multigraph with constraint-weighted edge costs and deterministic routing.

The graph is the robot's world model: vertices are places, edges are moves with
a fixed traversal time in seconds, and parallel edges between the same vertex
pair model different speed choices. A specification attaches hidden, time-valued
weights to sets of edges; routing minimizes traversal time plus the summed
weights of every constraint an edge belongs to.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PENALTY = "penalty"
REWARD = "reward"

COST_TOLERANCE = 1e-9
EQUIVALENCE_TOLERANCE = 1e-6


class GraphError(ValueError):
    """Malformed graph input (bad edge endpoints, nonpositive times, ...)."""


class SpecificationError(ValueError):
    """Specification violates its invariants or does not match the graph."""


class PlanningError(RuntimeError):
    """Planning attempted on an invalid weighting (nonpositive edge cost)."""


@dataclass(frozen=True)
class Edge:
    edge_id: int
    tail: int
    head: int
    time_s: float
    tier: str = ""


@dataclass(frozen=True)
class Task:
    start: int
    goal: int
    label: str = ""


@dataclass(frozen=True)
class Constraint:
    """One traffic rule: a set of member edges plus weight bounds in seconds.

    Penalty constraints (avoid zones, speeding edges, wrong-way lanes) carry
    weights in [0, upper]; reward constraints (road lanes in the direction of
    travel) carry weights in [lower, 0].
    """

    constraint_id: str
    kind: str
    edge_ids: frozenset[int]
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if self.kind not in (PENALTY, REWARD):
            raise SpecificationError(f"unknown constraint kind {self.kind!r}")
        if not self.edge_ids:
            raise SpecificationError(f"constraint {self.constraint_id}: empty edge set")
        if self.kind == PENALTY and not (self.lower == 0.0 and self.upper > 0.0):
            raise SpecificationError(
                f"constraint {self.constraint_id}: penalty bounds must be [0, u>0], "
                f"got [{self.lower}, {self.upper}]"
            )
        if self.kind == REWARD and not (self.upper == 0.0 and self.lower < 0.0):
            raise SpecificationError(
                f"constraint {self.constraint_id}: reward bounds must be [l<0, 0], "
                f"got [{self.lower}, {self.upper}]"
            )


@dataclass(frozen=True)
class Specification:
    """Ordered list of constraints; the order fixes weight-vector coordinates."""

    constraints: tuple[Constraint, ...]

    def __post_init__(self) -> None:
        ids = [c.constraint_id for c in self.constraints]
        if len(set(ids)) != len(ids):
            raise SpecificationError("duplicate constraint ids")

    @property
    def dimension(self) -> int:
        return len(self.constraints)

    def lower_bounds(self) -> np.ndarray:
        return np.array([c.lower for c in self.constraints], dtype=float)

    def upper_bounds(self) -> np.ndarray:
        return np.array([c.upper for c in self.constraints], dtype=float)


@dataclass(frozen=True)
class Path:
    """An edge-distinct walk with its duration and constraint-usage counts."""

    edge_ids: tuple[int, ...]
    duration_s: float
    features: tuple[int, ...]


class Multigraph:
    """Directed multigraph; vertices are 0..n-1, optionally labelled."""

    def __init__(
        self,
        num_vertices: int,
        edges: Iterable[tuple[int, int, int, float] | tuple[int, int, int, float, str]],
        labels: Sequence[str] | None = None,
    ):
        if num_vertices < 1:
            raise GraphError("graph needs at least one vertex")
        self.num_vertices = num_vertices
        self.labels: tuple[str, ...] = (
            tuple(labels) if labels is not None else tuple(str(v) for v in range(num_vertices))
        )
        if len(self.labels) != num_vertices:
            raise GraphError("labels length does not match vertex count")

        built: list[Edge] = []
        for spec_tuple in edges:
            edge_id, tail, head, time_s = spec_tuple[:4]
            tier = spec_tuple[4] if len(spec_tuple) > 4 else ""
            if not (0 <= tail < num_vertices and 0 <= head < num_vertices):
                raise GraphError(f"edge {edge_id}: endpoint out of range")
            if tail == head:
                raise GraphError(f"edge {edge_id}: self-loops not allowed")
            if not time_s > 0.0:
                raise GraphError(f"edge {edge_id}: traversal time must be > 0, got {time_s}")
            built.append(Edge(int(edge_id), int(tail), int(head), float(time_s), tier))
        built.sort(key=lambda e: e.edge_id)
        ids = [e.edge_id for e in built]
        if ids != list(range(len(built))):
            raise GraphError("edge ids must be dense integers 0..m-1")
        self.edges: tuple[Edge, ...] = tuple(built)
        self._out: list[list[Edge]] = [[] for _ in range(num_vertices)]
        for e in self.edges:
            self._out[e.tail].append(e)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge(self, edge_id: int) -> Edge:
        if not (0 <= edge_id < len(self.edges)):
            raise GraphError(f"unknown edge id {edge_id}")
        return self.edges[edge_id]

    def out_edges(self, vertex: int) -> list[Edge]:
        return self._out[vertex]

    def times(self) -> np.ndarray:
        return np.array([e.time_s for e in self.edges], dtype=float)

    def is_strongly_connected(self) -> bool:
        if self.num_vertices == 1:
            return True
        return self._reaches_all(forward=True) and self._reaches_all(forward=False)

    def _reaches_all(self, forward: bool) -> bool:
        seen = [False] * self.num_vertices
        seen[0] = True
        stack = [0]
        if forward:
            nbrs = [[e.head for e in self._out[v]] for v in range(self.num_vertices)]
        else:
            nbrs = [[] for _ in range(self.num_vertices)]
            for e in self.edges:
                nbrs[e.head].append(e.tail)
        while stack:
            v = stack.pop()
            for u in nbrs[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        return all(seen)


def membership_matrix(graph: Multigraph, spec: Specification) -> np.ndarray:
    """0/1 matrix, one row per edge, one column per constraint."""
    m = np.zeros((graph.num_edges, spec.dimension), dtype=float)
    for k, constraint in enumerate(spec.constraints):
        for edge_id in constraint.edge_ids:
            if not (0 <= edge_id < graph.num_edges):
                raise SpecificationError(
                    f"constraint {constraint.constraint_id}: unknown edge id {edge_id}"
                )
            m[edge_id, k] = 1.0
    return m


def combined_edge_cost(edge: Edge, spec: Specification, w: Sequence[float]) -> float:
    """Traversal time plus the weights of every constraint containing the edge."""
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.dimension,):
        raise SpecificationError(
            f"weight vector has dimension {w.shape}, spec has {spec.dimension}"
        )
    total = edge.time_s
    for k, constraint in enumerate(spec.constraints):
        if edge.edge_id in constraint.edge_ids:
            total += w[k]
    return float(total)


def path_features(path_edges: Sequence[int], graph: Multigraph, spec: Specification) -> tuple[int, ...]:
    """Count, per constraint, how many path edges belong to its edge set."""
    edge_set = set()
    for edge_id in path_edges:
        graph.edge(edge_id)
        edge_set.add(edge_id)
    return tuple(len(edge_set & c.edge_ids) for c in spec.constraints)


def path_cost(features: Sequence[int], duration_s: float, w: Sequence[float]) -> float:
    """Path cost: feature counts dotted with weights, plus duration."""
    features = np.asarray(features, dtype=float)
    w = np.asarray(w, dtype=float)
    if features.shape != w.shape:
        raise SpecificationError(
            f"feature/weight dimension mismatch: {features.shape} vs {w.shape}"
        )
    return float(features @ w + duration_s)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    offending_edges: tuple[tuple[int, float], ...] = ()
    # (edge_id, worst-case combined cost) for edges that can go nonpositive


def validate_specification(graph: Multigraph, spec: Specification) -> ValidationReport:
    """Check that no edge cost can become nonpositive at any in-bounds weight.

    The worst case per edge is every reward constraint containing it sitting at
    its lower bound; penalties only add. A strictly positive worst case makes
    nonnegative-cost label-setting search valid for every feasible weight.
    """
    offending: list[tuple[int, float]] = []
    reward_lower: dict[int, float] = {}
    for constraint in spec.constraints:
        if constraint.kind != REWARD:
            continue
        for edge_id in constraint.edge_ids:
            reward_lower[edge_id] = reward_lower.get(edge_id, 0.0) + constraint.lower
    for edge in graph.edges:
        worst = edge.time_s + reward_lower.get(edge.edge_id, 0.0)
        if not worst > 0.0:
            offending.append((edge.edge_id, worst))
    return ValidationReport(ok=not offending, offending_edges=tuple(offending))


class Router:
    """Plans cost-optimal paths for one (graph, spec) pair under varying weights.

    Ties are broken deterministically: lower cost, then fewer edges, then the
    lexicographically smallest edge-id sequence. Results are cached per
    (weight bytes, start) since the learning loop re-plans the same weights
    constantly.
    """

    def __init__(self, graph: Multigraph, spec: Specification):
        self.graph = graph
        self.spec = spec
        self.membership = membership_matrix(graph, spec)
        self._times = graph.times()
        # settled labels per (weight bytes, start): vertex -> (cost, edges, key, prev, edge)
        self._labels: dict[tuple[bytes, int], dict[int, tuple]] = {}
        self._paths: dict[tuple[bytes, int, int], Path] = {}
        self._equiv_cache: dict[tuple[int, int, bytes, bytes], bool] = {}
        self._id_base = graph.num_edges + 1
        self._out_pairs = [
            [(e.head, e.edge_id) for e in graph.out_edges(v)]
            for v in range(graph.num_vertices)
        ]

    def weight_key(self, w: np.ndarray) -> bytes:
        return np.asarray(w, dtype=float).tobytes()

    def edge_costs(self, w: Sequence[float]) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.spec.dimension,):
            raise SpecificationError(
                f"weight vector has dimension {w.shape}, spec has {self.spec.dimension}"
            )
        if self.spec.dimension == 0:
            return self._times.copy()
        return self._times + self.membership @ w

    def shortest_path(self, w: Sequence[float], task: Task) -> Path:
        w = np.asarray(w, dtype=float)
        key = (self.weight_key(w), task.start, task.goal)
        hit = self._paths.get(key)
        if hit is not None:
            return hit
        labels = self._plan_from(w, task.start)
        if task.goal not in labels:
            raise PlanningError(
                f"goal {task.goal} unreachable from {task.start}: corrupted graph input"
            )
        path = self._build_path(labels, task.goal)
        if len(self._paths) > 400_000:
            for stale in list(itertools.islice(self._paths, 100_000)):
                del self._paths[stale]
        self._paths[key] = path
        return path

    def shortest_paths_from(self, w: Sequence[float], start: int) -> dict[int, Path]:
        """Optimal path to every reachable vertex; the start maps to the empty path."""
        w = np.asarray(w, dtype=float)
        labels = self._plan_from(w, start)
        wkey = self.weight_key(w)
        result = {}
        for vertex in labels:
            key = (wkey, start, vertex)
            path = self._paths.get(key)
            if path is None:
                path = self._build_path(labels, vertex)
                self._paths[key] = path
            result[vertex] = path
        return result

    def cost(self, path: Path, w: Sequence[float]) -> float:
        return path_cost(path.features, path.duration_s, w)

    def weights_equivalent(self, w1: Sequence[float], w2: Sequence[float], task: Task) -> bool:
        """True iff the task has a path optimal under both weightings.

        Operationally: each weighting's optimal path must also be optimal (to
        within the cost-equality tolerance) under the other weighting.
        """
        w1 = np.asarray(w1, dtype=float)
        w2 = np.asarray(w2, dtype=float)
        key = (task.start, task.goal, self.weight_key(w1), self.weight_key(w2))
        cached = self._equiv_cache.get(key)
        if cached is not None:
            return cached
        p1 = self.shortest_path(w1, task)
        p2 = self.shortest_path(w2, task)
        result = (
            self.cost(p2, w1) <= self.cost(p1, w1) + EQUIVALENCE_TOLERANCE
            and self.cost(p1, w2) <= self.cost(p2, w2) + EQUIVALENCE_TOLERANCE
        )
        self._equiv_cache[key] = result
        self._equiv_cache[(task.start, task.goal, key[3], key[2])] = result
        return result

    def _plan_from(self, w: np.ndarray, start: int) -> dict[int, tuple]:
        cache_key = (self.weight_key(w), start)
        hit = self._labels.get(cache_key)
        if hit is not None:
            return hit
        costs = self.edge_costs(w)
        if np.any(costs <= COST_TOLERANCE):
            bad = int(np.argmin(costs))
            raise PlanningError(
                f"edge {bad} has nonpositive combined cost {costs[bad]:.6g}; "
                "validate the specification before planning"
            )
        if not (0 <= start < self.graph.num_vertices):
            raise GraphError(f"unknown vertex {start}")

        # Label-setting search over (cost, edge count, id-sequence key) labels.
        # Equal-length edge-id sequences compare lexicographically exactly like
        # their base-(num_edges+1) integer encodings, so the key is a plain int
        # and the first label popped per vertex is the tie-broken optimum.
        base = self._id_base
        costs_list = costs.tolist()
        out_pairs = self._out_pairs
        settled: dict[int, tuple] = {}
        frontier: list[tuple] = [(0.0, 0, 0, start, -1, -1)]
        pop = heapq.heappop
        push = heapq.heappush
        while frontier:
            label = pop(frontier)
            vertex = label[3]
            if vertex in settled:
                continue
            settled[vertex] = label
            cost, n_edges, ids_key = label[0], label[1], label[2]
            next_edges = n_edges + 1
            for head, eid in out_pairs[vertex]:
                if head not in settled:
                    push(
                        frontier,
                        (cost + costs_list[eid], next_edges, ids_key * base + eid + 1, head, vertex, eid),
                    )
        if len(self._labels) > 12_000:
            for stale in list(itertools.islice(self._labels, 3_000)):
                del self._labels[stale]
        self._labels[cache_key] = settled
        return settled

    def _build_path(self, labels: dict[int, tuple], goal: int) -> Path:
        edge_ids: list[int] = []
        vertex = goal
        while True:
            label = labels[vertex]
            prev, via = label[4], label[5]
            if prev < 0:
                break
            edge_ids.append(via)
            vertex = prev
        edge_ids.reverse()
        duration = float(self._times[edge_ids].sum()) if edge_ids else 0.0
        if self.spec.dimension == 0:
            features: tuple[int, ...] = ()
        elif edge_ids:
            features = tuple(
                int(round(x)) for x in self.membership[edge_ids].sum(axis=0)
            )
        else:
            features = (0,) * self.spec.dimension
        return Path(edge_ids=tuple(edge_ids), duration_s=duration, features=features)


def shortest_path(
    graph: Multigraph, spec: Specification, w: Sequence[float], task: Task
) -> Path:
    """One-shot planning; loops should hold a Router to reuse its caches."""
    return Router(graph, spec).shortest_path(w, task)
