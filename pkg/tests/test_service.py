from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request

import pytest

from routespec.environment import facility_small_text
from routespec.service import make_server


@pytest.fixture
def service(tmp_path):
    server, store = make_server(bind="127.0.0.1:0", log_dir=tmp_path / "logs")
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    base = f"http://{host}:{port}"
    yield base, store
    server.shutdown()


def call(base: str, method: str, path: str, body: dict | None = None):
    data = json.dumps(body).encode() if body is not None else None
    request = urllib.request.Request(
        base + path, data=data, method=method, headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(request) as response:
            return response.status, json.loads(response.read())
    except urllib.error.HTTPError as error:
        return error.code, json.loads(error.read())


def tiny_doc():
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


def create(base, doc=None, config=None):
    status, payload = call(
        base, "POST", "/sessions", {"environment": doc or tiny_doc(), "config": config or {}}
    )
    assert status == 201, payload
    return payload


def test_create_session_facility(service):
    base, _ = service
    payload = create(base, json.loads(facility_small_text()))
    assert payload["status"] == "active"
    assert len(payload["instances"]) == 8
    assert payload["dimension"] == 6
    assert payload["initial_metrics"]["task_time_ratio"] >= 1.0


def test_create_session_empty_spec_converged(service):
    base, _ = service
    doc = tiny_doc()
    doc["zones"] = []
    payload = create(base, doc)
    assert payload["status"] == "converged"
    status, query = call(base, "GET", f"/sessions/{payload['session_id']}/query")
    assert status == 200
    assert query == {"status": "converged"}


def test_create_session_malformed(service):
    base, store = service
    doc = tiny_doc()
    doc["grid"] = ["!!", ".."]
    status, payload = call(base, "POST", "/sessions", {"environment": doc})
    assert status == 400
    assert "grid" in payload["error"]
    with pytest.raises(Exception):
        store.get("nonexistent")


def test_query_idempotent_until_choice(service):
    base, _ = service
    session_id = create(base)["session_id"]
    status1, first = call(base, "GET", f"/sessions/{session_id}/query")
    status2, second = call(base, "GET", f"/sessions/{session_id}/query")
    assert status1 == status2 == 200
    assert first == second
    assert first["path_current"]["duration_s"] > 0
    assert "violations" in first["path_alternative"]


def test_choice_flow_and_conflicts(service):
    base, _ = service
    session_id = create(base)["session_id"]
    _, query = call(base, "GET", f"/sessions/{session_id}/query")
    status, outcome = call(
        base,
        "POST",
        f"/sessions/{session_id}/choice",
        {"query_id": query["query_id"], "choice": "alternative"},
    )
    assert status == 200
    assert outcome["iteration"] == 1
    assert outcome["task_time_ratio"] >= 1.0

    # replaying the same query id conflicts and changes nothing
    status, err = call(
        base,
        "POST",
        f"/sessions/{session_id}/choice",
        {"query_id": query["query_id"], "choice": "alternative"},
    )
    assert status == 409
    _, state = call(base, "GET", f"/sessions/{session_id}/state")
    assert state["iteration"] == 1


def test_budget_exhaustion_is_terminal(service):
    base, _ = service
    session_id = create(base, config={"budget": 1})["session_id"]
    _, query = call(base, "GET", f"/sessions/{session_id}/query")
    status, outcome = call(
        base,
        "POST",
        f"/sessions/{session_id}/choice",
        {"query_id": query["query_id"], "choice": "current"},
    )
    assert outcome["status"] == "budget_exhausted"
    status, payload = call(base, "GET", f"/sessions/{session_id}/query")
    assert payload == {"status": "budget_exhausted"}
    status, err = call(
        base,
        "POST",
        f"/sessions/{session_id}/choice",
        {"query_id": "q9", "choice": "current"},
    )
    assert status == 409


def test_unknown_session_404(service):
    base, _ = service
    status, payload = call(base, "GET", "/sessions/doesnotexist/query")
    assert status == 404


def test_finalize_and_metrics(service):
    base, _ = service
    session_id = create(base)["session_id"]
    for _ in range(3):
        _, query = call(base, "GET", f"/sessions/{session_id}/query")
        if "query_id" not in query:
            break
        call(
            base,
            "POST",
            f"/sessions/{session_id}/choice",
            {"query_id": query["query_id"], "choice": "alternative"},
        )
    status, final = call(base, "POST", f"/sessions/{session_id}/finalize")
    assert status == 200
    assert "w_final" in final
    assert len(final["final_paths"]) == 2
    status, metrics = call(base, "GET", f"/sessions/{session_id}/metrics")
    assert status == 200
    assert metrics["final"]["task_time_ratio"] == final["final"]["task_time_ratio"]
    status, with_global = call(base, "GET", f"/sessions/{session_id}/metrics?global=1")
    assert "global_time_ratio" in with_global["final"]


def test_logs_written_and_restorable(service, tmp_path):
    base, store = service
    session_id = create(base)["session_id"]
    _, query = call(base, "GET", f"/sessions/{session_id}/query")
    call(
        base,
        "POST",
        f"/sessions/{session_id}/choice",
        {"query_id": query["query_id"], "choice": "current"},
    )
    _, state_before = call(base, "GET", f"/sessions/{session_id}/state")
    _, query_before = call(base, "GET", f"/sessions/{session_id}/query")
    # simulate a restart: drop the in-memory record and restore from the log
    with store._lock:
        del store._records[session_id]
    record = store.restore(session_id)
    assert record.session.iteration == state_before["iteration"]
    _, query_after = call(base, "GET", f"/sessions/{session_id}/query")
    assert query_after == query_before  # crash-replay equivalence
