"""The active-learning loop: initialize from the drawn specification, generate
query weights by walking the feasible polytope, pick the task with the largest
tentative time saving, fold choices back in as half-space rows, and extract the
final specification.

A session is a strictly serialized state machine: issue a query, record the
choice, repeat until the budget runs out, no task yields a new weight
(converged), or the recorded choices contradict each other.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import (
    EQUIVALENCE_TOLERANCE,
    Multigraph,
    Path,
    Router,
    Specification,
    Task,
    path_cost,
    validate_specification,
)
from .polytope import (
    FEASIBILITY_TOLERANCE,
    FeasibleSpace,
    InfeasibleError,
    PolytopeVertex,
    add_preference,
    adjacent_vertices,
    init_feasible_space,
    max_sum_vertex,
    solve_lp,
    vertex_at,
    vertex_with_active,
)

STATUS_ACTIVE = "active"
STATUS_CONVERGED = "converged"
STATUS_BUDGET_EXHAUSTED = "budget_exhausted"
STATUS_CONTRADICTORY = "contradictory"

POLICY_MIN_VERTEX = "minvertex"
POLICY_VERTEX_SEARCH = "vertexsearch"

DFS_EXPANSION_CAP = 500


class SessionStateError(RuntimeError):
    """Operation not valid in the session's current state."""


class StaleQueryError(SessionStateError):
    """The posted choice does not match the outstanding query."""


@dataclass
class SessionConfig:
    budget: int = 20
    subset_size: int = 5
    policy: str = POLICY_MIN_VERTEX
    seed: int = 0
    dfs_expansion_cap: int = DFS_EXPANSION_CAP

    def __post_init__(self) -> None:
        if self.policy not in (POLICY_MIN_VERTEX, POLICY_VERTEX_SEARCH):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.budget < 0 or self.subset_size < 1:
            raise ValueError("budget must be >= 0 and subset_size >= 1")


@dataclass
class LearningInstance:
    index: int
    task: Task
    w_best: np.ndarray
    path_best: Path
    shown_weights: list[np.ndarray]


@dataclass(frozen=True)
class PendingQuery:
    query_id: str
    iteration: int
    instance_index: int
    w_new: np.ndarray
    path_current: Path
    path_alternative: Path
    subset: tuple[int, ...]


@dataclass(frozen=True)
class Selection:
    instance_index: int
    w_new: np.ndarray
    path_alternative: Path
    time_saving: float


class SearchContext:
    """Task-scoped planning and equivalence for the weight-search policies."""

    def __init__(self, router: Router, task: Task):
        self.router = router
        self.task = task

    def plan(self, w: np.ndarray) -> Path:
        return self.router.shortest_path(w, self.task)

    def equivalent(self, w1: np.ndarray, w2: np.ndarray) -> bool:
        return self.router.weights_equivalent(w1, w2, self.task)


def initial_weights(spec: Specification) -> np.ndarray:
    """w0: upper bound for penalties, lower bound for rewards — the weighting
    under which optimal paths follow the drawn rules outright."""
    return np.array(
        [c.upper if c.kind == "penalty" else c.lower for c in spec.constraints],
        dtype=float,
    )


def violated_penalties(spec: Specification, path: Path) -> list[str]:
    return [
        c.constraint_id
        for k, c in enumerate(spec.constraints)
        if c.kind == "penalty" and path.features[k] > 0
    ]


def _weight_key(w: np.ndarray) -> bytes:
    return np.round(np.asarray(w, dtype=float), 9).tobytes()


class VertexStream:
    """Lazily expanded depth-first pop sequence over a polytope's vertices.

    The traversal (pop order, neighbor pushes) depends only on the space and
    the start vertex — never on which task is asking — so one stream serves
    every instance evaluated against the same feasible space in a round.
    """

    def __init__(
        self,
        space: FeasibleSpace,
        start: PolytopeVertex,
        cap: int,
        adjacency=None,
    ):
        self.space = space
        self.cap = cap
        self.popped: list[PolytopeVertex] = []
        self._adjacency = adjacency if adjacency is not None else adjacent_vertices
        self._stack = [start]
        self._on_stack = {_weight_key(start.w)}
        self._expanded: set[bytes] = set()

    def get(self, index: int) -> PolytopeVertex | None:
        """The index-th popped vertex, or None once the walk is exhausted."""
        while len(self.popped) <= index and self._stack and len(self.popped) < self.cap:
            vertex = self._stack.pop()
            key = _weight_key(vertex.w)
            self._on_stack.discard(key)
            self.popped.append(vertex)
            if key in self._expanded:
                continue
            self._expanded.add(key)
            for neighbor in self._adjacency(self.space, vertex):
                nkey = _weight_key(neighbor.w)
                if nkey not in self._expanded and nkey not in self._on_stack:
                    self._stack.append(neighbor)
                    self._on_stack.add(nkey)
        return self.popped[index] if index < len(self.popped) else None


def vertex_search(
    space: FeasibleSpace,
    k: int,
    shown: Sequence[np.ndarray],
    w_start: np.ndarray,
    ctx: SearchContext,
    expansion_cap: int = DFS_EXPANSION_CAP,
    stream: VertexStream | None = None,
) -> list[np.ndarray]:
    """Depth-first walk over polytope vertices from w_start, collecting up to k
    weights not task-equivalent to anything shown or already collected.

    An empty result after the walk exhausts (or the expansion cap trips) means
    no distinguishable weight remains reachable — the convergence signal.
    """
    if stream is None:
        start = _as_vertex(space, w_start)
        if start is None:
            return []
        stream = VertexStream(space, start, expansion_cap)
    found: list[np.ndarray] = []
    for index in range(expansion_cap):
        if len(found) >= k:
            break
        vertex = stream.get(index)
        if vertex is None:
            break
        if not _equivalent_to_any(ctx, vertex.w, shown, found):
            found.append(vertex.w)
    return found


def min_vertex_search(
    space: FeasibleSpace,
    k: int,
    shown: Sequence[np.ndarray],
    w_best: np.ndarray,
    ctx: SearchContext,
    expansion_cap: int = DFS_EXPANSION_CAP,
    stream_factory=None,
) -> list[np.ndarray]:
    """Probe the sum-minimizing vertex, then one objective flip per constraint
    the resulting path uses, then fall back to the depth-first vertex walk.

    Raises InfeasibleError when the space is empty (contradictory feedback).
    """
    d = space.dimension
    found: list[np.ndarray] = []
    ones = np.ones(d)
    min_vertex = solve_lp(space, ones)
    w_min = min_vertex.w
    if not _equivalent_to_any(ctx, w_min, shown, found):
        found.append(w_min)
        if len(found) >= k:
            return found

    min_path = ctx.plan(w_min)
    for coord in range(d):
        if min_path.features[coord] <= 0:
            continue
        flipped = ones.copy()
        flipped[coord] = -1.0
        candidate = solve_lp(space, flipped).w
        if not _equivalent_to_any(ctx, candidate, shown, found):
            found.append(candidate)
            if len(found) >= k:
                return found

    stream = (
        stream_factory(min_vertex)
        if stream_factory is not None
        else VertexStream(space, min_vertex, expansion_cap)
    )
    remainder = vertex_search(
        space,
        k - len(found),
        list(shown) + found,
        w_min,
        ctx,
        expansion_cap,
        stream=stream,
    )
    return found + remainder


def _equivalent_to_any(
    ctx: SearchContext,
    w: np.ndarray,
    shown: Sequence[np.ndarray],
    found: Sequence[np.ndarray],
) -> bool:
    for other in shown:
        if ctx.equivalent(w, other):
            return True
    for other in found:
        if ctx.equivalent(w, other):
            return True
    return False


def _as_vertex(space: FeasibleSpace, w: np.ndarray) -> PolytopeVertex | None:
    """Interpret w as a vertex, re-projecting when accumulated rows stripped
    its vertex status: hold the box-tight coordinates fixed and minimize the
    coordinate sum; an infeasible projection falls back to the global minimum."""
    if space.dimension == 0:
        return None
    vertex = vertex_at(space, w)
    if vertex is not None:
        return vertex
    tight_rows = []
    tight_rhs = []
    for coord in range(space.dimension):
        for bound in (space.lower[coord], space.upper[coord]):
            if abs(w[coord] - bound) <= 1e-7:
                unit = np.zeros(space.dimension)
                unit[coord] = 1.0
                tight_rows.extend([unit, -unit])
                tight_rhs.extend([bound, -bound])
                break
    try:
        if tight_rows:
            return solve_lp(
                space,
                np.ones(space.dimension),
                extra_rows=(np.array(tight_rows), np.array(tight_rhs)),
            )
        return solve_lp(space, np.ones(space.dimension))
    except InfeasibleError:
        return solve_lp(space, np.ones(space.dimension))


class Session:
    """One user's learning session over a shared feasible space."""

    def __init__(
        self,
        graph: Multigraph,
        spec: Specification,
        tasks: Sequence[Task],
        config: SessionConfig | None = None,
        router: Router | None = None,
        origin: dict | None = None,
    ):
        if not tasks:
            raise ValueError("a session needs at least one task")
        report = validate_specification(graph, spec)
        if not report.ok:
            raise SessionStateError(
                f"specification invalid: {len(report.offending_edges)} edges can go nonpositive"
            )
        self.graph = graph
        self.spec = spec
        self.config = config or SessionConfig()
        self.router = router if router is not None else Router(graph, spec)
        self.space = init_feasible_space(spec)
        self.rng = random.Random(self.config.seed)
        self.iteration = 0
        self.status = STATUS_ACTIVE
        self.pending: PendingQuery | None = None
        self.contradiction_row: dict | None = None
        self.log: list[dict] = []
        self._search_memo: dict[tuple[int, int, int], Selection | None] = {}
        self._streams: dict[tuple[int, bytes], VertexStream] = {}
        # vertex-key -> (rows count at compute time, neighbor weights)
        self._adjacency_memo: dict[bytes, tuple[int, list[np.ndarray]]] = {}

        w0 = initial_weights(spec)
        self.instances = [
            LearningInstance(
                index=i,
                task=task,
                w_best=w0.copy(),
                path_best=self.router.shortest_path(w0, task),
                shown_weights=[w0.copy()],
            )
            for i, task in enumerate(tasks)
        ]
        if spec.dimension == 0:
            self.status = STATUS_CONVERGED
        if self.config.budget == 0 and self.status == STATUS_ACTIVE:
            self.status = STATUS_BUDGET_EXHAUSTED
        created = {
            "type": "created",
            "config": {
                "budget": self.config.budget,
                "subset_size": self.config.subset_size,
                "policy": self.config.policy,
                "seed": self.config.seed,
            },
            "tasks": [t.label for t in tasks],
            "w0": w0.tolist(),
            "status": self.status,
        }
        if origin:
            created.update(origin)
        self.log.append(created)

    # -- query generation ------------------------------------------------------

    def next_query(self) -> PendingQuery | None:
        """The outstanding query, generating one if needed; None when terminal.

        Idempotent until a choice is recorded. Convergence is declared only
        after the FULL instance set yields no new weight; when merely the
        sampled subset comes up empty, the full-set selection is used instead.
        """
        if self.pending is not None:
            return self.pending
        if self.status != STATUS_ACTIVE:
            return None
        if self.iteration >= self.config.budget:
            self.status = STATUS_BUDGET_EXHAUSTED
            return None

        subset = sorted(
            self.rng.sample(
                range(len(self.instances)),
                min(self.config.subset_size, len(self.instances)),
            )
        )
        selection = self._choose_among(subset)
        if selection is None and len(subset) < len(self.instances):
            selection = self._choose_among(range(len(self.instances)))
        if selection is None:
            self.status = STATUS_CONVERGED
            self.log.append({"type": "converged", "iteration": self.iteration})
            return None

        instance = self.instances[selection.instance_index]
        self.pending = PendingQuery(
            query_id=f"q{self.iteration}",
            iteration=self.iteration,
            instance_index=selection.instance_index,
            w_new=selection.w_new,
            path_current=instance.path_best,
            path_alternative=selection.path_alternative,
            subset=tuple(subset),
        )
        self.log.append(
            {
                "type": "query",
                "query_id": self.pending.query_id,
                "iteration": self.iteration,
                "subset": list(subset),
                "instance": selection.instance_index,
                "task": instance.task.label,
                "w_new": selection.w_new.tolist(),
                "path_current": list(instance.path_best.edge_ids),
                "path_alternative": list(selection.path_alternative.edge_ids),
            }
        )
        return self.pending

    def choose_task(self, indices: Sequence[int] | None = None) -> Selection | None:
        """Alg-3 style selection: evaluate each candidate instance and return
        the one whose tentative alternative saves the most time; None when no
        instance yields a new weight."""
        return self._choose_among(
            range(len(self.instances)) if indices is None else indices
        )

    def _choose_among(self, indices) -> Selection | None:
        best: Selection | None = None
        for i in indices:
            candidate = self._evaluate_instance(i)
            if candidate is None:
                continue
            if best is None or candidate.time_saving > best.time_saving:
                best = candidate
        return best

    def _evaluate_instance(self, index: int) -> Selection | None:
        instance = self.instances[index]
        memo_key = (index, self.space.num_rows, len(instance.shown_weights))
        if memo_key in self._search_memo:
            return self._search_memo[memo_key]

        ctx = SearchContext(self.router, instance.task)
        if self.config.policy == POLICY_MIN_VERTEX:
            candidates = min_vertex_search(
                self.space,
                1,
                instance.shown_weights,
                instance.w_best,
                ctx,
                self.config.dfs_expansion_cap,
                stream_factory=self._stream_for,
            )
        else:
            start = _as_vertex(self.space, instance.w_best)
            if start is None:
                candidates = []
            else:
                candidates = vertex_search(
                    self.space,
                    1,
                    instance.shown_weights,
                    instance.w_best,
                    ctx,
                    self.config.dfs_expansion_cap,
                    stream=self._stream_for(start),
                )
        if not candidates:
            selection = None
        else:
            w_new = candidates[0]
            alternative = ctx.plan(w_new)
            selection = Selection(
                instance_index=index,
                w_new=w_new,
                path_alternative=alternative,
                time_saving=instance.path_best.duration_s - alternative.duration_s,
            )
        self._search_memo[memo_key] = selection
        return selection

    def _stream_for(self, start: PolytopeVertex) -> VertexStream:
        """One shared depth-first traversal per (feasible space, start vertex):
        the walk is task-independent, so instances evaluated in the same round
        reuse it, and unchanged spaces reuse it across rounds."""
        key = (self.space.num_rows, _weight_key(start.w))
        stream = self._streams.get(key)
        if stream is None:
            stream = VertexStream(
                self.space, start, self.config.dfs_expansion_cap, self._cached_adjacent
            )
            self._streams[key] = stream
        return stream

    def _cached_adjacent(self, space: FeasibleSpace, vertex: PolytopeVertex):
        """adjacent_vertices with cross-round reuse: a vertex's neighbors only
        change when a row appended since they were computed is tight at (or
        cuts) the vertex or one of the cached neighbors."""
        key = _weight_key(vertex.w)
        hit = self._adjacency_memo.get(key)
        if hit is not None:
            rows_then, neighbor_ws = hit
            if self._adjacency_fresh(space, vertex.w, neighbor_ws, rows_then):
                return [vertex_with_active(space, w) for w in neighbor_ws]
        neighbors = adjacent_vertices(space, vertex)
        self._adjacency_memo[key] = (space.num_rows, [n.w for n in neighbors])
        return neighbors

    def _adjacency_fresh(
        self,
        space: FeasibleSpace,
        w: np.ndarray,
        neighbor_ws: list[np.ndarray],
        rows_then: int,
    ) -> bool:
        if space.num_rows == rows_then:
            return True
        new_a = space.rows_a[rows_then:]
        new_b = space.rows_b[rows_then:]
        if np.any(new_a @ w > new_b - FEASIBILITY_TOLERANCE):
            return False  # a new row is tight at (or cuts) the vertex
        for neighbor in neighbor_ws:
            if np.any(new_a @ neighbor > new_b + FEASIBILITY_TOLERANCE):
                return False  # a new row cut this edge short
        return True

    # -- feedback ----------------------------------------------------------------

    def record_choice(self, query_id: str, choice: str) -> dict:
        """Fold one answer in: append the preference row, promote the
        alternative when it won, advance the iteration counter."""
        if self.status != STATUS_ACTIVE:
            raise SessionStateError(f"session is {self.status}")
        if self.pending is None:
            raise StaleQueryError("no outstanding query")
        if query_id != self.pending.query_id:
            raise StaleQueryError(
                f"choice targets {query_id}, outstanding query is {self.pending.query_id}"
            )
        if choice not in ("current", "alternative"):
            raise ValueError(f"choice must be 'current' or 'alternative', got {choice!r}")

        pending = self.pending
        instance = self.instances[pending.instance_index]
        accepted = choice == "alternative"
        chosen = pending.path_alternative if accepted else pending.path_current
        rejected = pending.path_current if accepted else pending.path_alternative

        grown = add_preference(self.space, chosen, rejected)
        informative = grown.num_rows > self.space.num_rows
        row_entry = None
        if informative:
            row_entry = {
                "a": grown.rows_a[-1].tolist(),
                "b": float(grown.rows_b[-1]),
            }
            try:
                solve_lp(grown, np.ones(self.space.dimension))
                self.space = grown
            except InfeasibleError:
                # keep the last consistent space; flag the contradiction
                self.status = STATUS_CONTRADICTORY
                self.contradiction_row = row_entry

        if accepted:
            instance.w_best = pending.w_new
            instance.path_best = pending.path_alternative
        instance.shown_weights.append(pending.w_new)
        self.iteration += 1
        self.pending = None
        if self.status == STATUS_ACTIVE and self.iteration >= self.config.budget:
            self.status = STATUS_BUDGET_EXHAUSTED

        self.log.append(
            {
                "type": "choice",
                "query_id": pending.query_id,
                "iteration": self.iteration,
                "instance": pending.instance_index,
                "task": instance.task.label,
                "choice": choice,
                "accepted": accepted,
                "row": row_entry,
                "contradictory": self.status == STATUS_CONTRADICTORY,
                "status": self.status,
            }
        )
        return {
            "status": self.status,
            "iteration": self.iteration,
            "accepted": accepted,
        }

    # -- final specification ------------------------------------------------------

    def final_weights(self) -> np.ndarray:
        """The conservative final pick: the coordinate-sum maximizing vertex of
        the (last consistent) feasible space."""
        return max_sum_vertex(self.space)

    def final_paths(self) -> list[Path]:
        """Optimal paths at the final weight.

        The final weight routinely sits on learned tie hyperplanes (they are
        what caps the coordinate sum), where several paths share the optimal
        cost; among those ties the user-approved best path wins over the
        planner's lexicographic default."""
        w_final = self.final_weights()
        paths = []
        for instance in self.instances:
            candidate = self.router.shortest_path(w_final, instance.task)
            best = instance.path_best
            if candidate.edge_ids != best.edge_ids:
                candidate_cost = path_cost(candidate.features, candidate.duration_s, w_final)
                best_cost = path_cost(best.features, best.duration_s, w_final)
                if best_cost <= candidate_cost + EQUIVALENCE_TOLERANCE:
                    candidate = best
            paths.append(candidate)
        return paths

    @property
    def tasks(self) -> list[Task]:
        return [inst.task for inst in self.instances]
