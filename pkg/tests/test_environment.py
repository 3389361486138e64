from __future__ import annotations

import json

import numpy as np
import pytest

from routespec.environment import (
    Environment,
    SchemaError,
    Zone,
    build_graph,
    cell_vertex_map,
    compile_zones,
    load_facility_small,
    parse_environment,
    point_in_polygon,
    resolve_tasks,
    serialize_environment,
    vertex_positions_m,
)
from routespec.graph import validate_specification


def minimal_doc(**overrides):
    doc = {
        "grid": ["..", ".."],
        "cell_size_m": 1.0,
        "speeds_mps": [1.0, 0.5],
        "zones": [],
        "tasks": [],
    }
    doc.update(overrides)
    return doc


def test_build_graph_1x2_two_tiers():
    env = Environment(grid=(".",), cell_size_m=1.0, speeds_mps=(1.0, 0.5))
    env = Environment(grid=("..",), cell_size_m=1.0, speeds_mps=(1.0, 0.5))
    graph = build_graph(env)
    assert graph.num_vertices == 2
    assert graph.num_edges == 4
    times = sorted(e.time_s for e in graph.edges)
    assert times == [1.0, 1.0, 2.0, 2.0]


def test_build_graph_single_cell():
    env = Environment(grid=(".",), cell_size_m=1.0, speeds_mps=(1.0,))
    graph = build_graph(env)
    assert graph.num_vertices == 1
    assert graph.num_edges == 0


def test_build_graph_2x2_eight_connected():
    env = Environment(grid=("..", ".."), cell_size_m=1.0, speeds_mps=(1.0,))
    graph = build_graph(env)
    assert graph.num_vertices == 4
    assert graph.num_edges == 12  # 4 orthogonal pairs + 2 diagonal pairs, both ways
    assert graph.is_strongly_connected()
    diagonals = [e for e in graph.edges if e.time_s > 1.0]
    assert len(diagonals) == 4
    assert diagonals[0].time_s == pytest.approx(np.sqrt(2.0))


def test_parse_minimal_and_round_trip():
    parsed = parse_environment(minimal_doc())
    canonical = serialize_environment(parsed)
    assert serialize_environment(parse_environment(canonical)) == canonical


def test_parse_rejects_unknown_fields():
    with pytest.raises(SchemaError, match="favourite_color"):
        parse_environment(minimal_doc(favourite_color="green"))


def test_parse_rejects_two_point_polygon():
    doc = minimal_doc(zones=[{"kind": "avoid", "polygon": [[0, 0], [1, 1]]}])
    with pytest.raises(SchemaError, match=r"zones\[0\].polygon"):
        parse_environment(doc)


def test_parse_rejects_self_intersecting_polygon():
    bowtie = [[0, 0], [2, 2], [2, 0], [0, 2]]
    doc = minimal_doc(zones=[{"kind": "avoid", "polygon": bowtie}])
    with pytest.raises(SchemaError, match="self-intersecting"):
        parse_environment(doc)


def test_parse_direction_only_on_roads():
    doc = minimal_doc(
        zones=[{"kind": "avoid", "polygon": [[0, 0], [1, 0], [1, 1]], "direction": [1, 0]}]
    )
    with pytest.raises(SchemaError, match="direction"):
        parse_environment(doc)
    doc = minimal_doc(zones=[{"kind": "road", "polygon": [[0, 0], [1, 0], [1, 1]]}])
    with pytest.raises(SchemaError, match="direction"):
        parse_environment(doc)


def test_parse_task_validation():
    with pytest.raises(SchemaError, match=r"tasks\[0\].start"):
        parse_environment(minimal_doc(tasks=[{"label": "t", "start": [9, 9], "goal": [0, 0]}]))
    with pytest.raises(SchemaError, match="must differ"):
        parse_environment(minimal_doc(tasks=[{"label": "t", "start": [0, 0], "goal": [0, 0]}]))


def test_parse_disconnected_free_space():
    with pytest.raises(SchemaError, match="disconnected"):
        parse_environment(minimal_doc(grid=[".#.", "###", ".#."]))


def test_parse_bad_json_reports_position():
    with pytest.raises(SchemaError, match="line"):
        parse_environment("{\n  broken\n}")


def test_point_in_polygon_square():
    square = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]
    assert point_in_polygon((1.0, 1.0), square)
    assert not point_in_polygon((3.0, 1.0), square)


def test_compile_empty_zone_list():
    env = Environment(grid=("..", ".."), cell_size_m=1.0, speeds_mps=(1.0,))
    graph = build_graph(env)
    spec, warnings = compile_zones([], env, graph)
    assert spec.dimension == 0
    assert warnings == []


def test_compile_avoid_zone_bounds():
    env = Environment(grid=("...",), cell_size_m=1.0, speeds_mps=(1.0,))
    graph = build_graph(env)
    # covers only the edge pair between cells (0,1) and (0,2)
    zone = Zone(kind="avoid", polygon=((1.6, 0.0), (2.9, 0.0), (2.9, 1.0), (1.6, 1.0)))
    spec, warnings = compile_zones([zone], env, graph)
    assert warnings == []
    assert spec.dimension == 1
    constraint = spec.constraints[0]
    assert constraint.kind == "penalty"
    assert constraint.lower == 0.0
    assert constraint.upper == pytest.approx(sum(e.time_s for e in graph.edges))
    midpoint_x = {graph.edge(i).tail for i in constraint.edge_ids}
    assert all(
        {graph.edge(i).tail, graph.edge(i).head} == {1, 2} for i in constraint.edge_ids
    )


def test_compile_one_way_road_two_disjoint_constraints():
    env = Environment(grid=("....",), cell_size_m=1.0, speeds_mps=(1.0,))
    graph = build_graph(env)
    zone = Zone(
        kind="road",
        polygon=((0.0, 0.0), (4.0, 0.0), (4.0, 1.0), (0.0, 1.0)),
        direction=(1.0, 0.0),
    )
    spec, warnings = compile_zones([zone], env, graph)
    assert warnings == []
    assert spec.dimension == 2
    reward, penalty = spec.constraints
    assert reward.kind == "reward" and penalty.kind == "penalty"
    assert not (reward.edge_ids & penalty.edge_ids)
    for edge_id in reward.edge_ids:
        assert graph.edge(edge_id).head > graph.edge(edge_id).tail  # eastbound
    for edge_id in penalty.edge_ids:
        assert graph.edge(edge_id).head < graph.edge(edge_id).tail


def test_compile_zone_without_edges_warns():
    env = Environment(grid=("..",), cell_size_m=1.0, speeds_mps=(1.0,))
    graph = build_graph(env)
    zone = Zone(kind="avoid", polygon=((10.0, 10.0), (11.0, 10.0), (11.0, 11.0)))
    spec, warnings = compile_zones([zone], env, graph)
    assert spec.dimension == 0
    assert len(warnings) == 1 and "covers no edges" in warnings[0]


def test_compile_overlapping_rewards_scale_mu():
    env = Environment(grid=("....",), cell_size_m=1.0, speeds_mps=(1.0,))
    graph = build_graph(env)
    road = {
        "kind": "road",
        "polygon": [[0.0, 0.0], [4.0, 0.0], [4.0, 1.0], [0.0, 1.0]],
        "direction": [1, 0],
        "two_way": False,
    }
    doc = {
        "grid": ["...."],
        "cell_size_m": 1.0,
        "speeds_mps": [1.0],
        "zones": [road, dict(road)],
        "tasks": [],
    }
    parsed = parse_environment(doc)
    graph = build_graph(parsed.environment)
    spec, _ = compile_zones(parsed.zones, parsed.environment, graph)
    rewards = [c for c in spec.constraints if c.kind == "reward"]
    assert len(rewards) == 2
    # both rewards share all eastbound edges, so mu = 2 halves the bound
    t_min = min(graph.edge(i).time_s for i in rewards[0].edge_ids)
    assert rewards[0].lower == pytest.approx(-(1 - 1e-3) * t_min / 2)
    assert validate_specification(graph, spec).ok


def test_compiled_specs_always_validate():
    parsed = load_facility_small()
    graph = build_graph(parsed.environment)
    spec, warnings = compile_zones(parsed.zones, parsed.environment, graph)
    assert warnings == []
    assert validate_specification(graph, spec).ok
    assert all(
        edge_id < graph.num_edges for c in spec.constraints for edge_id in c.edge_ids
    )


def test_facility_small_shape():
    parsed = load_facility_small()
    graph = build_graph(parsed.environment)
    assert graph.is_strongly_connected()
    assert len(parsed.tasks) == 8
    spec, _ = compile_zones(parsed.zones, parsed.environment, graph)
    assert spec.dimension == 6  # avoid + speeding + two one-way road pairs
    kinds = [c.kind for c in spec.constraints]
    assert kinds.count("reward") == 2
    assert kinds.count("penalty") == 4
    tasks = resolve_tasks(parsed.environment, parsed.tasks)
    assert len({(t.start, t.goal) for t in tasks}) == 8


def two_way_doc():
    return {
        "grid": ["........", "........", "........", "........"],
        "cell_size_m": 1.0,
        "speeds_mps": [1.0],
        "zones": [
            {
                "kind": "road",
                "polygon": [[0.0, 0.0], [8.0, 0.0], [8.0, 4.0], [0.0, 4.0]],
                "direction": [1, 0],
                "two_way": True,
            }
        ],
        "tasks": [],
    }


def test_two_way_road_lanes_oppose():
    parsed = parse_environment(two_way_doc())
    graph = build_graph(parsed.environment)
    spec, _ = compile_zones(parsed.zones, parsed.environment, graph)
    assert spec.dimension == 4
    by_id = {c.constraint_id: c for c in spec.constraints}
    fwd = by_id["z0-fwd-road"]
    rev = by_id["z0-rev-road"]
    fwd_pen = by_id["z0-fwd-wrongway"]
    rev_pen = by_id["z0-rev-wrongway"]
    assert not (fwd.edge_ids & fwd_pen.edge_ids)
    assert not (fwd.edge_ids & rev.edge_ids)
    positions = vertex_positions_m(parsed.environment)
    centroid_y = 2.0
    for edge_id in fwd.edge_ids:
        e = graph.edge(edge_id)
        midpoint_y = (positions[e.tail][1] + positions[e.head][1]) / 2
        assert positions[e.head][0] > positions[e.tail][0]  # eastbound
        assert midpoint_y < centroid_y  # right-hand lane of [1, 0]
    for edge_id in rev.edge_ids:
        e = graph.edge(edge_id)
        midpoint_y = (positions[e.tail][1] + positions[e.head][1]) / 2
        assert positions[e.head][0] < positions[e.tail][0]  # westbound
        assert midpoint_y > centroid_y
    from routespec.graph import validate_specification

    assert validate_specification(graph, spec).ok
