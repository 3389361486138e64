from __future__ import annotations

import json
import random

import pytest

from routespec.environment import facility_small_text, parse_environment
from routespec.sessionlog import (
    LogWriter,
    ReplayError,
    read_log,
    rebuild_session,
    replay_log,
)
from routespec.users import SimulatedUser, random_user


def tiny_doc() -> dict:
    return {
        "grid": ["....", "....", "...."],
        "cell_size_m": 1.0,
        "speeds_mps": [1.0, 0.5],
        "zones": [
            {"kind": "avoid", "polygon": [[1.4, 0.0], [2.6, 0.0], [2.6, 2.2], [1.4, 2.2]]}
        ],
        "tasks": [
            {"label": "across", "start": [0, 0], "goal": [0, 3]},
            {"label": "diagonal", "start": [2, 0], "goal": [0, 3]},
        ],
    }


def run_logged_session(doc, seed=0, budget=8, tmp_path=None):
    records = [dict(rec, environment=doc) if rec["type"] == "created" else rec for rec in []]
    # build via rebuild_session path to embed the document exactly once
    created_log = None
    from routespec.environment import build_graph, compile_zones, resolve_tasks, serialize_environment

    parsed = parse_environment(doc)
    graph = build_graph(parsed.environment)
    spec, _ = compile_zones(parsed.zones, parsed.environment, graph)
    tasks = resolve_tasks(parsed.environment, parsed.tasks)
    from routespec.learning import Session, SessionConfig

    session = Session(
        graph,
        spec,
        tasks,
        SessionConfig(budget=budget, subset_size=2, seed=seed),
        origin={"environment": serialize_environment(parsed)},
    )
    user = random_user(spec, random.Random(seed + 77), penalty_scale=6.0)
    while True:
        query = session.next_query()
        if query is None:
            break
        session.record_choice(
            query.query_id, user.choose(query.path_current, query.path_alternative)
        )
    session.log.append(
        {"type": "finalized", "w_final": session.final_weights().tolist(), "status": session.status}
    )
    return session


def test_replay_reproduces_session(tmp_path):
    session = run_logged_session(tiny_doc(), seed=3)
    log_file = tmp_path / "session.jsonl"
    writer = LogWriter(log_file)
    writer.sync_from(session.log)

    records = read_log(log_file)
    result = replay_log(records)
    assert result.ok, result.mismatches
    assert result.queries_replayed >= 1
    assert result.session.final_weights().tolist() == session.final_weights().tolist()
    assert result.session.status == session.status


def test_replay_detects_tampering(tmp_path):
    session = run_logged_session(tiny_doc(), seed=5)
    log_file = tmp_path / "session.jsonl"
    LogWriter(log_file).sync_from(session.log)
    records = read_log(log_file)
    tampered = False
    for record in records:
        if record["type"] == "query" and record["w_new"]:
            record["w_new"][0] += 0.125
            tampered = True
            break
    assert tampered
    result = replay_log(records)
    assert not result.ok


def test_crash_replay_equivalence(tmp_path):
    # stop mid-session, persist, replay, and compare the next query
    doc = json.loads(facility_small_text())
    from routespec.environment import build_graph, compile_zones, resolve_tasks, serialize_environment
    from routespec.learning import Session, SessionConfig

    parsed = parse_environment(doc)
    graph = build_graph(parsed.environment)
    spec, _ = compile_zones(parsed.zones, parsed.environment, graph)
    tasks = resolve_tasks(parsed.environment, parsed.tasks)
    session = Session(
        graph,
        spec,
        tasks,
        SessionConfig(budget=10, subset_size=3, seed=11),
        origin={"environment": serialize_environment(parsed)},
    )
    user = SimulatedUser(w_star=[4.0, 0.0, -0.5, 1.0, -0.5, 6.0])
    for _ in range(2):
        query = session.next_query()
        assert query is not None
        session.record_choice(
            query.query_id, user.choose(query.path_current, query.path_alternative)
        )
    upcoming = session.next_query()
    assert upcoming is not None
    log_file = tmp_path / "crash.jsonl"
    # persist only completed rounds: drop the trailing unanswered query record
    records = [r for r in session.log]
    assert records[-1]["type"] == "query"
    LogWriter(log_file).sync_from(records[:-1])

    restored = replay_log(read_log(log_file))
    assert restored.ok, restored.mismatches
    regenerated = restored.session.next_query()
    assert regenerated is not None
    assert regenerated.w_new.tolist() == upcoming.w_new.tolist()
    assert regenerated.path_alternative.edge_ids == upcoming.path_alternative.edge_ids
    assert regenerated.instance_index == upcoming.instance_index


def test_rebuild_requires_created_record():
    with pytest.raises(ReplayError):
        rebuild_session([{"type": "query"}])
    with pytest.raises(ReplayError):
        rebuild_session([{"type": "created", "config": {}}])


def test_replay_facility_session(tmp_path):
    doc = json.loads(facility_small_text())
    session = run_logged_session(doc, seed=1, budget=6)
    log_file = tmp_path / "facility.jsonl"
    LogWriter(log_file).sync_from(session.log)
    result = replay_log(read_log(log_file))
    assert result.ok, result.mismatches
