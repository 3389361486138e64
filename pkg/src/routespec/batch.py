"""Batch simulation: run seeded simulated users through full sessions and
aggregate the metric shifts, deterministically in seed order."""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .environment import (
    ParsedEnvironment,
    build_graph,
    compile_zones,
    parse_environment,
    resolve_tasks,
    serialize_environment,
)
from .graph import Router
from .learning import (
    STATUS_CONTRADICTORY,
    Session,
    SessionConfig,
    initial_weights,
)
from .metrics import entropy_ratio, task_pairs, time_ratio
from .users import SimulatedUser, random_user

USER_SEED_OFFSET = 1_000_003


@dataclass
class BatchConfig:
    document: dict | str
    sessions: int = 100
    base_seed: int = 0
    budget: int = 20
    subset_size: int = 5
    policy: str = "minvertex"
    tie_rule: str = "prefer-current"
    # penalty weights for simulated users are sampled up to this many seconds;
    # None means the full (sum-of-all-edge-times) box, which yields users who
    # reject everything — see the ledger note on acceptance criteria 4/5
    user_scale: float | None | str = "task"


@dataclass
class SessionResult:
    seed: int
    status: str
    iterations: int
    accepted: int
    alpha_all: float | None
    alpha_tasks: float | None
    initial_task_time_ratio: float
    final_task_time_ratio: float
    initial_entropy_ratio: float
    final_entropy_ratio: float
    w_star: list[float]
    w_final: list[float]

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class BatchReport:
    results: list[SessionResult]
    aggregates: dict[str, float]
    config: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "aggregates": self.aggregates,
            "sessions": [r.to_dict() for r in self.results],
        }


def resolve_user_scale(config: BatchConfig, router: Router, tasks) -> float | None:
    if config.user_scale is None:
        return None
    if isinstance(config.user_scale, (int, float)):
        return float(config.user_scale)
    if config.user_scale == "task":
        zero = np.zeros(router.spec.dimension)
        durations = [router.shortest_path(zero, t).duration_s for t in tasks]
        return float(np.mean(durations))
    raise ValueError(f"unknown user_scale {config.user_scale!r}")


def run_session(
    session: Session,
    user: SimulatedUser,
    observer: Callable[[Session, SimulatedUser], None] | None = None,
) -> None:
    """Drive one session to a terminal state with a simulated user."""
    while True:
        query = session.next_query()
        if query is None:
            return
        choice = user.choose(query.path_current, query.path_alternative)
        session.record_choice(query.query_id, choice)
        if observer is not None:
            observer(session, user)
        if session.status == STATUS_CONTRADICTORY:
            return


def run_batch(
    config: BatchConfig,
    observer: Callable[[Session, SimulatedUser], None] | None = None,
) -> BatchReport:
    """Simulate config.sessions seeded users end to end on one environment.

    Bit-identical across reruns with the same seeds: one shared router caches
    planning across sessions, every random draw is seeded, and results
    aggregate in seed order. A contradiction under these deterministic users
    is an engine bug and raises immediately.
    """
    parsed = (
        parse_environment(config.document)
        if not isinstance(config.document, ParsedEnvironment)
        else config.document
    )
    graph = build_graph(parsed.environment)
    spec, _ = compile_zones(parsed.zones, parsed.environment, graph)
    tasks = resolve_tasks(parsed.environment, parsed.tasks)
    router = Router(graph, spec)
    scale = resolve_user_scale(config, router, tasks)
    pairs = task_pairs(tasks)
    w0 = initial_weights(spec)
    initial_ratio = time_ratio(router, w0, pairs)
    initial_entropy = entropy_ratio(graph, spec, w0)

    results: list[SessionResult] = []
    for offset in range(config.sessions):
        seed = config.base_seed + offset
        user = random_user(
            spec,
            random.Random(USER_SEED_OFFSET + seed),
            tie_rule=config.tie_rule,
            penalty_scale=scale,
        )
        session = Session(
            graph,
            spec,
            tasks,
            SessionConfig(
                budget=config.budget,
                subset_size=config.subset_size,
                policy=config.policy,
                seed=seed,
            ),
            router=router,
            origin={"environment": serialize_environment(parsed)},
        )
        run_session(session, user, observer)
        if session.status == STATUS_CONTRADICTORY:
            raise RuntimeError(
                f"seed {seed}: deterministic user produced a contradictory session"
            )
        w_final = session.final_weights()
        accepted = sum(
            1 for entry in session.log if entry.get("type") == "choice" and entry["accepted"]
        )
        choices = sum(1 for entry in session.log if entry.get("type") == "choice")
        presented = {
            entry["instance"] for entry in session.log if entry.get("type") == "choice"
        }
        accepted_tasks = {
            entry["instance"]
            for entry in session.log
            if entry.get("type") == "choice" and entry["accepted"]
        }
        results.append(
            SessionResult(
                seed=seed,
                status=session.status,
                iterations=session.iteration,
                accepted=accepted,
                alpha_all=(accepted / choices) if choices else None,
                alpha_tasks=(len(accepted_tasks) / len(presented)) if presented else None,
                initial_task_time_ratio=initial_ratio,
                final_task_time_ratio=time_ratio(router, w_final, pairs),
                initial_entropy_ratio=initial_entropy,
                final_entropy_ratio=entropy_ratio(graph, spec, w_final),
                w_star=user.w_star.tolist(),
                w_final=w_final.tolist(),
            )
        )

    aggregates = _aggregate(results)
    return BatchReport(
        results=results,
        aggregates=aggregates,
        config={
            "sessions": config.sessions,
            "base_seed": config.base_seed,
            "budget": config.budget,
            "subset_size": config.subset_size,
            "policy": config.policy,
            "tie_rule": config.tie_rule,
            "user_scale": scale,
        },
    )


def _aggregate(results: Sequence[SessionResult]) -> dict[str, float]:
    if not results:
        return {}
    initial = [r.initial_task_time_ratio for r in results]
    final = [r.final_task_time_ratio for r in results]
    alpha = [r.alpha_all for r in results if r.alpha_all is not None]
    return {
        "mean_initial_task_time_ratio": statistics.fmean(initial),
        "mean_final_task_time_ratio": statistics.fmean(final),
        "median_initial_task_time_ratio": statistics.median(initial),
        "median_final_task_time_ratio": statistics.median(final),
        "mean_initial_entropy_ratio": statistics.fmean(
            r.initial_entropy_ratio for r in results
        ),
        "mean_final_entropy_ratio": statistics.fmean(
            r.final_entropy_ratio for r in results
        ),
        "mean_alpha_all": statistics.fmean(alpha) if alpha else float("nan"),
        "sessions_time_ratio_decreased": sum(
            1 for r in results if r.final_task_time_ratio < r.initial_task_time_ratio
        ),
        "sessions_entropy_non_decreasing": sum(
            1
            for r in results
            if r.final_entropy_ratio >= r.initial_entropy_ratio - 1e-12
        ),
        "sessions_converged": sum(1 for r in results if r.status == "converged"),
    }
