"""HTTP session service: the interactive loop over plain JSON endpoints.

    POST /sessions                  {"environment": {...}, "config": {...}}
    GET  /sessions/{id}/query
    POST /sessions/{id}/choice      {"query_id": "...", "choice": "current"|"alternative"}
    GET  /sessions/{id}/state
    POST /sessions/{id}/finalize
    GET  /sessions/{id}/metrics     (?global=1 adds the all-pairs time ratio)

One outstanding query per session; a choice that does not match it returns
409 and changes nothing. Every event is appended to a per-session JSONL log
from which the session can be replayed bit-exactly. The bind address comes
from the ROUTESPEC_BIND environment variable (host:port).
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path as FilePath
from urllib.parse import parse_qs, urlparse

import numpy as np

from .environment import (
    ParsedEnvironment,
    SchemaError,
    build_graph,
    compile_zones,
    parse_environment,
    resolve_tasks,
    serialize_environment,
    vertex_positions_m,
)
from .graph import Path
from .learning import (
    STATUS_ACTIVE,
    Session,
    SessionConfig,
    SessionStateError,
    StaleQueryError,
    initial_weights,
    violated_penalties,
)
from .metrics import acceptance_rates, entropy_ratio, task_pairs, time_ratio, global_pairs
from .sessionlog import LogWriter, read_log, replay_log

DEFAULT_BIND = "127.0.0.1:8571"
BIND_ENV_VAR = "ROUTESPEC_BIND"


class ServiceError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class SessionRecord:
    session_id: str
    session: Session
    parsed: ParsedEnvironment
    writer: LogWriter | None
    lock: threading.Lock = field(default_factory=threading.Lock)
    positions: np.ndarray | None = None


class SessionStore:
    """All live sessions plus their append-only logs under one directory."""

    def __init__(self, log_dir: str | FilePath | None = None):
        self.log_dir = FilePath(log_dir) if log_dir else None
        self._records: dict[str, SessionRecord] = {}
        self._lock = threading.Lock()

    def create(self, document, config: dict) -> SessionRecord:
        try:
            parsed = parse_environment(document)
        except SchemaError as exc:
            raise ServiceError(400, str(exc))
        graph = build_graph(parsed.environment)
        spec, warnings = compile_zones(parsed.zones, parsed.environment, graph)
        tasks = resolve_tasks(parsed.environment, parsed.tasks)
        if not tasks:
            raise ServiceError(400, "tasks: the environment defines no tasks")
        try:
            session_config = SessionConfig(**config)
        except (TypeError, ValueError) as exc:
            raise ServiceError(400, f"config: {exc}")
        session_id = uuid.uuid4().hex[:12]
        try:
            session = Session(
                graph,
                spec,
                tasks,
                session_config,
                origin={
                    "environment": serialize_environment(parsed),
                    "session_id": session_id,
                    "warnings": warnings,
                },
            )
        except SessionStateError as exc:
            raise ServiceError(400, str(exc))
        writer = None
        if self.log_dir is not None:
            writer = LogWriter(self.log_dir / f"{session_id}.jsonl")
            writer.sync_from(session.log)
        record = SessionRecord(
            session_id=session_id,
            session=session,
            parsed=parsed,
            writer=writer,
            positions=vertex_positions_m(parsed.environment),
        )
        with self._lock:
            self._records[session_id] = record
        return record

    def get(self, session_id: str) -> SessionRecord:
        with self._lock:
            record = self._records.get(session_id)
        if record is None:
            raise ServiceError(404, f"unknown session {session_id}")
        return record

    def restore(self, session_id: str) -> SessionRecord:
        """Rebuild a session from its log (crash recovery)."""
        if self.log_dir is None:
            raise ServiceError(404, "no log directory configured")
        path = self.log_dir / f"{session_id}.jsonl"
        if not path.exists():
            raise ServiceError(404, f"no log for session {session_id}")
        result = replay_log(read_log(path))
        if not result.ok:
            raise ServiceError(500, f"log replay diverged: {result.mismatches[:3]}")
        session = result.session
        parsed = parse_environment(session.log[0]["environment"])
        writer = LogWriter(path)
        writer._written = sum(1 for _ in open(path, encoding="utf-8"))
        record = SessionRecord(
            session_id=session_id,
            session=session,
            parsed=parsed,
            writer=writer,
            positions=vertex_positions_m(parsed.environment),
        )
        with self._lock:
            self._records[session_id] = record
        return record


def _path_payload(record: SessionRecord, path: Path) -> dict:
    session = record.session
    graph = session.graph
    cells = []
    if path.edge_ids:
        first = graph.edge(path.edge_ids[0])
        chain = [first.tail] + [graph.edge(e).head for e in path.edge_ids]
    else:
        chain = []
    for vertex in chain:
        row, col = (int(v) for v in graph.labels[vertex].split(","))
        cells.append([row, col])
    return {
        "edges": list(path.edge_ids),
        "cells": cells,
        "duration_s": path.duration_s,
        "features": list(path.features),
        "violations": violated_penalties(session.spec, path),
    }


def _query_payload(record: SessionRecord) -> dict:
    session = record.session
    query = session.next_query()
    if record.writer is not None:
        record.writer.sync_from(session.log)
    if query is None:
        return {"status": session.status}
    instance = session.instances[query.instance_index]
    return {
        "status": session.status,
        "query_id": query.query_id,
        "iteration": query.iteration,
        "budget": session.config.budget,
        "task": {
            "label": instance.task.label,
            "start": _cell_of(session, instance.task.start),
            "goal": _cell_of(session, instance.task.goal),
        },
        "path_current": _path_payload(record, query.path_current),
        "path_alternative": _path_payload(record, query.path_alternative),
    }


def _cell_of(session: Session, vertex: int) -> list[int]:
    row, col = (int(v) for v in session.graph.labels[vertex].split(","))
    return [row, col]


def _state_payload(record: SessionRecord) -> dict:
    session = record.session
    return {
        "session_id": record.session_id,
        "status": session.status,
        "iteration": session.iteration,
        "budget": session.config.budget,
        "dimension": session.spec.dimension,
        "rows": session.space.num_rows,
        "policy": session.config.policy,
        "instances": [
            {
                "index": inst.index,
                "label": inst.task.label,
                "start": _cell_of(session, inst.task.start),
                "goal": _cell_of(session, inst.task.goal),
                "best_path": _path_payload(record, inst.path_best),
                "weights_shown": len(inst.shown_weights),
            }
            for inst in session.instances
        ],
    }


def _metrics_payload(record: SessionRecord, include_global: bool) -> dict:
    session = record.session
    router = session.router
    pairs = task_pairs(session.tasks)
    w0 = initial_weights(session.spec)
    w_final = session.final_weights()
    alpha_all = alpha_tasks = None
    if any(e.get("type") == "choice" for e in session.log):
        alpha_all, alpha_tasks = acceptance_rates(session.log)
    payload = {
        "initial": {
            "task_time_ratio": time_ratio(router, w0, pairs),
            "entropy_ratio": _nan_to_none(entropy_ratio(session.graph, session.spec, w0)),
        },
        "final": {
            "task_time_ratio": time_ratio(router, w_final, pairs),
            "entropy_ratio": _nan_to_none(
                entropy_ratio(session.graph, session.spec, w_final)
            ),
        },
        "alpha_all": alpha_all,
        "alpha_tasks": alpha_tasks,
        "w_final": w_final.tolist(),
    }
    if include_global:
        everywhere = global_pairs(session.graph)
        payload["initial"]["global_time_ratio"] = time_ratio(router, w0, everywhere)
        payload["final"]["global_time_ratio"] = time_ratio(router, w_final, everywhere)
    return payload


def _nan_to_none(value: float):
    return None if value != value else value


def handle_request(store: SessionStore, method: str, path: str, body: dict) -> tuple[int, dict]:
    """Route one request; returns (status, response payload)."""
    url = urlparse(path)
    parts = [p for p in url.path.split("/") if p]
    params = parse_qs(url.query)

    if method == "POST" and parts == ["sessions"]:
        if "environment" not in body:
            raise ServiceError(400, "environment: missing")
        record = store.create(body["environment"], body.get("config", {}))
        payload = _state_payload(record)
        payload["initial_metrics"] = _metrics_payload(record, include_global=False)["initial"]
        return 201, payload

    if len(parts) == 3 and parts[0] == "sessions":
        session_id, verb = parts[1], parts[2]
        record = store.get(session_id)
        with record.lock:
            session = record.session
            if method == "GET" and verb == "query":
                return 200, _query_payload(record)
            if method == "POST" and verb == "choice":
                if session.status != STATUS_ACTIVE or session.pending is None:
                    raise ServiceError(409, f"session is {session.status}; no outstanding query")
                try:
                    outcome = session.record_choice(
                        str(body.get("query_id")), str(body.get("choice"))
                    )
                except StaleQueryError as exc:
                    raise ServiceError(409, str(exc))
                except ValueError as exc:
                    raise ServiceError(400, str(exc))
                if record.writer is not None:
                    record.writer.sync_from(session.log)
                pairs = task_pairs(session.tasks)
                outcome["task_time_ratio"] = time_ratio(
                    session.router, session.final_weights(), pairs
                )
                return 200, outcome
            if method == "GET" and verb == "state":
                return 200, _state_payload(record)
            if method == "POST" and verb == "finalize":
                payload = _metrics_payload(record, include_global=False)
                payload["status"] = session.status
                payload["contradiction"] = session.status == "contradictory"
                payload["final_paths"] = [
                    _path_payload(record, p) for p in session.final_paths()
                ]
                session.log.append(
                    {
                        "type": "finalized",
                        "w_final": payload["w_final"],
                        "status": session.status,
                    }
                )
                if record.writer is not None:
                    record.writer.sync_from(session.log)
                return 200, payload
            if method == "GET" and verb == "metrics":
                include_global = params.get("global", ["0"])[0] in ("1", "true")
                return 200, _metrics_payload(record, include_global)

    raise ServiceError(404, f"no route for {method} {url.path}")


class _Handler(BaseHTTPRequestHandler):
    store: SessionStore  # set by make_server

    def _respond(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str) -> None:
        body = {}
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except json.JSONDecodeError as exc:
                self._respond(400, {"error": f"invalid JSON body: {exc.msg}"})
                return
        try:
            status, payload = handle_request(self.store, method, self.path, body)
            self._respond(status, payload)
        except ServiceError as exc:
            self._respond(exc.status, {"error": exc.message})
        except Exception as exc:  # surface engine bugs as 500s, keep serving
            self._respond(500, {"error": f"{type(exc).__name__}: {exc}"})

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def do_OPTIONS(self) -> None:
        self._respond(204, {})

    def log_message(self, fmt, *args) -> None:
        pass  # request logging stays out of stdout; session logs carry the state


def make_server(
    bind: str | None = None, log_dir: str | FilePath | None = None
) -> tuple[ThreadingHTTPServer, SessionStore]:
    bind = bind or os.environ.get(BIND_ENV_VAR, DEFAULT_BIND)
    host, _, port = bind.rpartition(":")
    store = SessionStore(log_dir=log_dir)
    handler = type("BoundHandler", (_Handler,), {"store": store})
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)
    return server, store


def serve_forever(bind: str | None = None, log_dir: str | FilePath | None = None) -> None:
    server, _ = make_server(bind, log_dir)
    host, port = server.server_address[:2]
    print(f"session service listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
