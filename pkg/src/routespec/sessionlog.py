"""Append-only session logs and bit-exact replay.

Every session event (creation with the full environment document, each issued
query with its sampled subset, each choice with the row it added) goes to one
JSON-lines file. Replaying a log rebuilds the session from the embedded
document and config, re-runs the engine against the recorded choices, and
verifies that every regenerated query matches the record float-for-float —
timestamps are metadata and excluded from comparison.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path as FilePath

from .environment import (
    ParsedEnvironment,
    build_graph,
    compile_zones,
    parse_environment,
    resolve_tasks,
    serialize_environment,
)
from .graph import Router
from .learning import Session, SessionConfig


class ReplayError(RuntimeError):
    """A replayed session diverged from its log."""


class LogWriter:
    """Append-only JSONL writer; one line per event, flushed immediately."""

    def __init__(self, path: str | FilePath):
        self.path = FilePath(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._written = 0

    def append(self, record: dict) -> None:
        stamped = dict(record)
        stamped.setdefault("ts", time.time())
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(stamped) + "\n")
        self._written += 1

    def sync_from(self, records: list[dict]) -> None:
        """Append any records beyond what this writer has already written."""
        for record in records[self._written :]:
            self.append(record)


def read_log(path: str | FilePath) -> list[dict]:
    records = []
    with FilePath(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def rebuild_session(records: list[dict], router: Router | None = None) -> tuple[Session, ParsedEnvironment]:
    """Construct a fresh session from a log's creation record."""
    if not records or records[0].get("type") != "created":
        raise ReplayError("log does not start with a creation record")
    created = records[0]
    if "environment" not in created:
        raise ReplayError("creation record carries no environment document")
    parsed = parse_environment(created["environment"])
    graph = build_graph(parsed.environment)
    spec, _ = compile_zones(parsed.zones, parsed.environment, graph)
    tasks = resolve_tasks(parsed.environment, parsed.tasks)
    config = SessionConfig(**created["config"])
    session = Session(
        graph,
        spec,
        tasks,
        config,
        router=router,
        origin={"environment": serialize_environment(parsed)},
    )
    return session, parsed


@dataclass
class ReplayResult:
    session: Session
    queries_replayed: int = 0
    choices_replayed: int = 0
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


_QUERY_FIELDS = ("instance", "w_new", "path_current", "path_alternative", "subset")


def replay_log(records: list[dict], router: Router | None = None) -> ReplayResult:
    """Re-run a logged session and verify each regenerated query bit-exactly."""
    session, _ = rebuild_session(records, router=router)
    result = ReplayResult(session=session)

    for record in records[1:]:
        kind = record.get("type")
        if kind == "query":
            query = session.next_query()
            if query is None:
                result.mismatches.append(
                    f"{record['query_id']}: log has a query but session is {session.status}"
                )
                break
            regenerated = {
                "instance": query.instance_index,
                "w_new": query.w_new.tolist(),
                "path_current": list(query.path_current.edge_ids),
                "path_alternative": list(query.path_alternative.edge_ids),
                "subset": list(query.subset),
            }
            for fieldname in _QUERY_FIELDS:
                if regenerated[fieldname] != record[fieldname]:
                    result.mismatches.append(
                        f"{record['query_id']}.{fieldname}: "
                        f"log {record[fieldname]!r} != replay {regenerated[fieldname]!r}"
                    )
            result.queries_replayed += 1
        elif kind == "choice":
            session.record_choice(record["query_id"], record["choice"])
            result.choices_replayed += 1
        elif kind == "converged":
            query = session.next_query()
            if query is not None or session.status != "converged":
                result.mismatches.append(
                    f"log converged at iteration {record['iteration']} but replay is "
                    f"{session.status}"
                )
        elif kind == "finalized":
            replayed_final = session.final_weights().tolist()
            if replayed_final != record["w_final"]:
                result.mismatches.append(
                    f"finalized.w_final: log {record['w_final']!r} != replay {replayed_final!r}"
                )
    return result
