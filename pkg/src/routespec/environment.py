"""Occupancy-grid environments and user-drawn zones, compiled to graph + spec.

The document format is JSON: `grid` rows of `#` (occupied) / `.` (free),
`cell_size_m`, `speeds_mps` (strictly decreasing speed tiers), `zones`, and
named `tasks`. Cell (r, c) spans a square of side cell_size_m whose center is
((c + 0.5) * s, (r + 0.5) * s) in meters, x growing with columns and y with
rows. Zones are polygons in those coordinates; an edge belongs to a zone when
its midpoint lies inside the polygon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Sequence

import numpy as np

from .graph import Constraint, Multigraph, Specification, Task

EPSILON_REWARD = 1e-3
ROAD_ALIGNMENT_COS = math.cos(math.radians(45.0)) - 1e-9

ZONE_KINDS = ("road", "avoid", "speed_limit")

_NEIGHBOR_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


class SchemaError(ValueError):
    """Document violates the environment schema; message names the field."""


@dataclass(frozen=True)
class Environment:
    grid: tuple[str, ...]
    cell_size_m: float
    speeds_mps: tuple[float, ...]

    @property
    def rows(self) -> int:
        return len(self.grid)

    @property
    def cols(self) -> int:
        return len(self.grid[0]) if self.grid else 0

    def is_free(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols and self.grid[row][col] == "."


@dataclass(frozen=True)
class Zone:
    kind: str
    polygon: tuple[tuple[float, float], ...]
    direction: tuple[float, float] | None = None
    two_way: bool = False


@dataclass(frozen=True)
class TaskCells:
    label: str
    start: tuple[int, int]
    goal: tuple[int, int]


@dataclass(frozen=True)
class ParsedEnvironment:
    environment: Environment
    zones: tuple[Zone, ...]
    tasks: tuple[TaskCells, ...]


# -- parsing and serialization -----------------------------------------------


def parse_environment(document: str | dict[str, Any]) -> ParsedEnvironment:
    """Validate a document strictly; unknown fields are rejected, messages
    carry the offending field path."""
    if isinstance(document, str):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    else:
        raw = document
    if not isinstance(raw, dict):
        raise SchemaError("document: expected a JSON object")

    known = {"grid", "cell_size_m", "speeds_mps", "zones", "tasks"}
    for key in raw:
        if key not in known:
            raise SchemaError(f"{key}: unknown field")
    for key in ("grid", "cell_size_m", "speeds_mps"):
        if key not in raw:
            raise SchemaError(f"{key}: missing required field")

    grid = _parse_grid(raw["grid"])
    cell_size = raw["cell_size_m"]
    if not isinstance(cell_size, (int, float)) or not cell_size > 0:
        raise SchemaError("cell_size_m: expected a positive number")
    speeds = _parse_speeds(raw["speeds_mps"])
    env = Environment(grid=grid, cell_size_m=float(cell_size), speeds_mps=speeds)
    _check_free_space(env)

    zones = tuple(
        _parse_zone(z, f"zones[{i}]") for i, z in enumerate(raw.get("zones", []))
    )
    tasks = tuple(
        _parse_task(t, f"tasks[{i}]", env) for i, t in enumerate(raw.get("tasks", []))
    )
    labels = [t.label for t in tasks]
    if len(set(labels)) != len(labels):
        raise SchemaError("tasks: duplicate labels")
    return ParsedEnvironment(environment=env, zones=zones, tasks=tasks)


def serialize_environment(parsed: ParsedEnvironment) -> dict[str, Any]:
    """Canonical document form; parse(serialize(x)) round-trips field-identically."""
    zones = []
    for zone in parsed.zones:
        entry: dict[str, Any] = {
            "kind": zone.kind,
            "polygon": [[float(x), float(y)] for x, y in zone.polygon],
        }
        if zone.kind == "road":
            assert zone.direction is not None
            entry["direction"] = [float(zone.direction[0]), float(zone.direction[1])]
            entry["two_way"] = bool(zone.two_way)
        zones.append(entry)
    return {
        "grid": list(parsed.environment.grid),
        "cell_size_m": float(parsed.environment.cell_size_m),
        "speeds_mps": [float(s) for s in parsed.environment.speeds_mps],
        "zones": zones,
        "tasks": [
            {"label": t.label, "start": [t.start[0], t.start[1]], "goal": [t.goal[0], t.goal[1]]}
            for t in parsed.tasks
        ],
    }


def _parse_grid(raw: Any) -> tuple[str, ...]:
    if not isinstance(raw, list) or not raw:
        raise SchemaError("grid: expected a nonempty list of row strings")
    rows = []
    width = None
    for i, row in enumerate(raw):
        if not isinstance(row, str):
            raise SchemaError(f"grid[{i}]: expected a string")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaError(f"grid[{i}]: row length {len(row)} differs from {width}")
        for j, ch in enumerate(row):
            if ch not in "#.":
                raise SchemaError(f"grid[{i}][{j}]: expected '#' or '.', got {ch!r}")
        rows.append(row)
    return tuple(rows)


def _parse_speeds(raw: Any) -> tuple[float, ...]:
    if not isinstance(raw, list) or not raw:
        raise SchemaError("speeds_mps: expected a nonempty list")
    speeds = []
    for i, s in enumerate(raw):
        if not isinstance(s, (int, float)) or not s > 0:
            raise SchemaError(f"speeds_mps[{i}]: expected a positive number")
        speeds.append(float(s))
    for i in range(1, len(speeds)):
        if not speeds[i] < speeds[i - 1]:
            raise SchemaError("speeds_mps: speeds must be strictly decreasing")
    return tuple(speeds)


def _parse_zone(raw: Any, path: str) -> Zone:
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: expected an object")
    kind = raw.get("kind")
    if kind not in ZONE_KINDS:
        raise SchemaError(f"{path}.kind: expected one of {ZONE_KINDS}, got {kind!r}")
    allowed = {"kind", "polygon"} | ({"direction", "two_way"} if kind == "road" else set())
    for key in raw:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}: unknown field for kind {kind!r}")

    polygon = raw.get("polygon")
    if not isinstance(polygon, list) or len(polygon) < 3:
        raise SchemaError(f"{path}.polygon: expected at least 3 points")
    points = []
    for i, pt in enumerate(polygon):
        if (
            not isinstance(pt, list)
            or len(pt) != 2
            or not all(isinstance(v, (int, float)) for v in pt)
        ):
            raise SchemaError(f"{path}.polygon[{i}]: expected [x, y]")
        points.append((float(pt[0]), float(pt[1])))
    if not _polygon_is_simple(points):
        raise SchemaError(f"{path}.polygon: polygon is self-intersecting")

    direction = None
    if kind == "road":
        raw_dir = raw.get("direction")
        if (
            not isinstance(raw_dir, list)
            or len(raw_dir) != 2
            or not all(isinstance(v, (int, float)) for v in raw_dir)
        ):
            raise SchemaError(f"{path}.direction: roads need a [dx, dy] heading")
        norm = math.hypot(raw_dir[0], raw_dir[1])
        if norm <= 0:
            raise SchemaError(f"{path}.direction: zero-length heading")
        direction = (float(raw_dir[0]) / norm, float(raw_dir[1]) / norm)
        two_way = raw.get("two_way", False)
        if not isinstance(two_way, bool):
            raise SchemaError(f"{path}.two_way: expected a boolean")
    else:
        two_way = False
    return Zone(kind=kind, polygon=tuple(points), direction=direction, two_way=two_way)


def _parse_task(raw: Any, path: str, env: Environment) -> TaskCells:
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: expected an object")
    for key in raw:
        if key not in {"label", "start", "goal"}:
            raise SchemaError(f"{path}.{key}: unknown field")
    label = raw.get("label")
    if not isinstance(label, str) or not label:
        raise SchemaError(f"{path}.label: expected a nonempty string")
    cells = {}
    for name in ("start", "goal"):
        cell = raw.get(name)
        if (
            not isinstance(cell, list)
            or len(cell) != 2
            or not all(isinstance(v, int) for v in cell)
        ):
            raise SchemaError(f"{path}.{name}: expected [row, col] integers")
        if not env.is_free(cell[0], cell[1]):
            raise SchemaError(f"{path}.{name}: cell {cell} is not a free cell")
        cells[name] = (cell[0], cell[1])
    if cells["start"] == cells["goal"]:
        raise SchemaError(f"{path}: start and goal must differ")
    return TaskCells(label=label, start=cells["start"], goal=cells["goal"])


def _check_free_space(env: Environment) -> None:
    cells = free_cells(env)
    if not cells:
        raise SchemaError("grid: no free cells")
    seen = {cells[0]}
    stack = [cells[0]]
    free = set(cells)
    while stack:
        r, c = stack.pop()
        for dr, dc in _NEIGHBOR_OFFSETS:
            nxt = (r + dr, c + dc)
            if nxt in free and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != len(free):
        raise SchemaError("grid: free space is disconnected")


# -- geometry ------------------------------------------------------------------


def free_cells(env: Environment) -> list[tuple[int, int]]:
    return [
        (r, c)
        for r in range(env.rows)
        for c in range(env.cols)
        if env.grid[r][c] == "."
    ]


def cell_vertex_map(env: Environment) -> dict[tuple[int, int], int]:
    return {cell: i for i, cell in enumerate(free_cells(env))}


def vertex_positions_m(env: Environment) -> np.ndarray:
    """(n, 2) array of free-cell centers in meters, row-major vertex order."""
    s = env.cell_size_m
    return np.array(
        [((c + 0.5) * s, (r + 0.5) * s) for r, c in free_cells(env)], dtype=float
    )


def point_in_polygon(point: tuple[float, float], polygon: Sequence[tuple[float, float]]) -> bool:
    """Even-odd rule ray cast; boundary points resolve by crossing parity."""
    x, y = point
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if x < x_cross:
                inside = not inside
    return inside


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _polygon_is_simple(points: Sequence[tuple[float, float]]) -> bool:
    n = len(points)
    for i in range(n):
        a1, a2 = points[i], points[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent segments share an endpoint
            b1, b2 = points[j], points[(j + 1) % n]
            if _segments_intersect(a1, a2, b1, b2):
                return False
    return True


# -- graph construction --------------------------------------------------------


def build_graph(env: Environment) -> Multigraph:
    """One vertex per free cell; directed edges between 8-connected free
    neighbors, one parallel edge per speed tier (time = distance / speed)."""
    _check_free_space(env)
    cells = free_cells(env)
    index = {cell: i for i, cell in enumerate(cells)}
    s = env.cell_size_m
    edges: list[tuple[int, int, int, float, str]] = []
    edge_id = 0
    for r, c in cells:
        tail = index[(r, c)]
        for dr, dc in _NEIGHBOR_OFFSETS:
            head_cell = (r + dr, c + dc)
            if head_cell not in index:
                continue
            head = index[head_cell]
            distance = s * math.hypot(dr, dc)
            for tier, speed in enumerate(env.speeds_mps):
                edges.append((edge_id, tail, head, distance / speed, f"tier{tier}"))
                edge_id += 1
    labels = [f"{r},{c}" for r, c in cells]
    return Multigraph(len(cells), edges, labels=labels)


def resolve_tasks(env: Environment, tasks: Sequence[TaskCells]) -> list[Task]:
    index = cell_vertex_map(env)
    return [Task(index[t.start], index[t.goal], t.label) for t in tasks]


# -- zone compilation ----------------------------------------------------------


def compile_zones(
    zones: Sequence[Zone], env: Environment, graph: Multigraph
) -> tuple[Specification, list[str]]:
    """Compile drawn zones into an ordered constraint list.

    avoid       -> one penalty over in-zone edges
    speed_limit -> one penalty over in-zone edges of the faster tiers
    road        -> reward along the heading (within 45 degrees) + penalty
                   against it; a two-way road splits into two opposing lanes
                   on either side of its centerline
    Zones that cover no edges produce a warning instead of a constraint.
    """
    positions = vertex_positions_m(env)
    midpoints = np.array(
        [(positions[e.tail] + positions[e.head]) / 2.0 for e in graph.edges]
    )
    headings = np.array(
        [
            (positions[e.head] - positions[e.tail])
            / np.linalg.norm(positions[e.head] - positions[e.tail])
            for e in graph.edges
        ]
    )
    slowest_tier = f"tier{len(env.speeds_mps) - 1}"

    drafts: list[tuple[str, str, frozenset[int]]] = []  # (id, kind, members)
    warnings: list[str] = []

    def emit(cid: str, kind: str, members: set[int]) -> None:
        if not members:
            warnings.append(f"{cid}: zone covers no edges; constraint omitted")
            return
        drafts.append((cid, kind, frozenset(members)))

    for zi, zone in enumerate(zones):
        in_zone = [
            e.edge_id
            for e in graph.edges
            if point_in_polygon(tuple(midpoints[e.edge_id]), zone.polygon)
        ]
        if zone.kind == "avoid":
            emit(f"z{zi}-avoid", "penalty", set(in_zone))
        elif zone.kind == "speed_limit":
            fast = {i for i in in_zone if graph.edge(i).tier != slowest_tier}
            emit(f"z{zi}-speeding", "penalty", fast)
        else:
            direction = np.array(zone.direction)
            if not zone.two_way:
                along = {i for i in in_zone if headings[i] @ direction >= ROAD_ALIGNMENT_COS}
                against = {i for i in in_zone if headings[i] @ -direction >= ROAD_ALIGNMENT_COS}
                emit(f"z{zi}-road", "reward", along)
                emit(f"z{zi}-wrongway", "penalty", against)
            else:
                # two opposing lanes, split along the centerline through the
                # polygon centroid (right-hand traffic: each lane sits right
                # of its own travel direction)
                centroid = np.mean(np.array(zone.polygon), axis=0)
                for lane, lane_dir in (("fwd", direction), ("rev", -direction)):
                    lane_edges = [
                        i
                        for i in in_zone
                        if _cross(lane_dir, midpoints[i] - centroid) < -1e-9
                    ]
                    along = {
                        i for i in lane_edges if headings[i] @ lane_dir >= ROAD_ALIGNMENT_COS
                    }
                    against = {
                        i for i in lane_edges if headings[i] @ -lane_dir >= ROAD_ALIGNMENT_COS
                    }
                    emit(f"z{zi}-{lane}-road", "reward", along)
                    emit(f"z{zi}-{lane}-wrongway", "penalty", against)

    total_time = float(sum(e.time_s for e in graph.edges))
    reward_count_by_edge: dict[int, int] = {}
    for _, kind, members in drafts:
        if kind != "reward":
            continue
        for edge_id in members:
            reward_count_by_edge[edge_id] = reward_count_by_edge.get(edge_id, 0) + 1

    constraints = []
    for cid, kind, members in drafts:
        if kind == "penalty":
            constraints.append(Constraint(cid, "penalty", members, 0.0, total_time))
        else:
            t_min = min(graph.edge(i).time_s for i in members)
            mu = max(reward_count_by_edge[i] for i in members)
            lower = -(1.0 - EPSILON_REWARD) * t_min / mu
            constraints.append(Constraint(cid, "reward", members, lower, 0.0))
    return Specification(tuple(constraints)), warnings


def _cross(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


# -- bundled fixture -----------------------------------------------------------


def facility_small_text() -> str:
    return (
        resources.files("routespec.data").joinpath("facility_small.json").read_text("utf-8")
    )


def load_facility_small() -> ParsedEnvironment:
    """The bundled reduced industrial-facility fixture with 8 transport tasks."""
    return parse_environment(facility_small_text())
