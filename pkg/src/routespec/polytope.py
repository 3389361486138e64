"""Feasible weight space: box bounds plus preference half-spaces, and the
linear-programming machinery the learning policies walk on.

Everything the session ever learns about the hidden weights lives here as the
polytope  l <= w <= u,  A w <= b.  Choices append half-space rows (monotone
refinement); the search policies need optimal vertices, vertex adjacency, and
task-scoped weight equivalence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import Multigraph, Path, Router, Specification, Task

FEASIBILITY_TOLERANCE = 1e-7
_PIVOT_TOLERANCE = 1e-9
_INFEASIBILITY_TOLERANCE = 1e-7
_MAX_PIVOTS = 20_000


class InfeasibleError(Exception):
    """The feasible space is empty — recorded choices contradict each other."""


class LPError(RuntimeError):
    """Internal solver failure (unbounded problem or pivot-limit hit)."""


@dataclass(frozen=True)
class FeasibleSpace:
    """Box bounds plus accumulated half-space rows a·w <= b, append-only."""

    lower: np.ndarray
    upper: np.ndarray
    rows_a: np.ndarray  # (m, d)
    rows_b: np.ndarray  # (m,)

    def __post_init__(self) -> None:
        d = len(self.lower)
        eye = np.eye(d)
        object.__setattr__(self, "_g", np.vstack([-eye, eye, self.rows_a]))
        object.__setattr__(
            self, "_h", np.concatenate([-self.lower, self.upper, self.rows_b])
        )

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def num_rows(self) -> int:
        return len(self.rows_b)

    def with_row(self, a: np.ndarray, b: float) -> "FeasibleSpace":
        a = np.asarray(a, dtype=float)
        if a.shape != (self.dimension,):
            raise ValueError(f"row has dimension {a.shape}, space has {self.dimension}")
        if not np.any(np.abs(a) > 0.0):
            return self
        return FeasibleSpace(
            lower=self.lower,
            upper=self.upper,
            rows_a=np.vstack([self.rows_a, a[None, :]]),
            rows_b=np.append(self.rows_b, float(b)),
        )

    def constraint_system(self) -> tuple[np.ndarray, np.ndarray]:
        """Unified G w <= h with index order: lower bounds, upper bounds, rows."""
        return self._g, self._h

    def contains(self, w: Sequence[float], tol: float = FEASIBILITY_TOLERANCE) -> bool:
        w = np.asarray(w, dtype=float)
        if self._g.shape[0] == 0:
            return True
        return bool(np.all(self._g @ w <= self._h + tol))


@dataclass(frozen=True)
class PolytopeVertex:
    w: np.ndarray
    active: tuple[int, ...]  # tight indices into constraint_system() order


def init_feasible_space(spec: Specification) -> FeasibleSpace:
    d = spec.dimension
    return FeasibleSpace(
        lower=spec.lower_bounds(),
        upper=spec.upper_bounds(),
        rows_a=np.zeros((0, d)),
        rows_b=np.zeros(0),
    )


def add_preference(space: FeasibleSpace, chosen: Path, rejected: Path) -> FeasibleSpace:
    """Append the half-space implied by preferring `chosen` over `rejected`:
    (features_chosen - features_rejected) · w <= duration_rejected - duration_chosen.

    A zero normal (identical feature vectors) carries no information and is
    dropped, returning the space unchanged.
    """
    a = np.asarray(chosen.features, dtype=float) - np.asarray(rejected.features, dtype=float)
    if a.shape != (space.dimension,):
        raise ValueError(f"feature dimension {a.shape} does not match space {space.dimension}")
    return space.with_row(a, rejected.duration_s - chosen.duration_s)


def solve_lp(
    space: FeasibleSpace,
    objective: Sequence[float],
    extra_rows: tuple[np.ndarray, np.ndarray] | None = None,
) -> PolytopeVertex:
    """Minimize objective·w over the space; returns an optimal vertex.

    Deterministic under Bland's smallest-index pivot rule. Raises
    InfeasibleError when the space is empty. Unboundedness cannot occur (box).
    `extra_rows` adds temporary rows (used for re-projection) that do not
    participate in the returned active set.
    """
    d = space.dimension
    c = np.asarray(objective, dtype=float)
    if c.shape != (d,):
        raise ValueError(f"objective has dimension {c.shape}, space has {d}")
    if d == 0:
        return PolytopeVertex(w=np.zeros(0), active=())

    lower, upper = space.lower, space.upper
    rows_a, rows_b = space.rows_a, space.rows_b
    if extra_rows is not None:
        rows_a = np.vstack([rows_a, extra_rows[0]])
        rows_b = np.concatenate([rows_b, extra_rows[1]])

    # Shift to y = w - l >= 0; upper bounds and rows become M y <= q.
    m_upper = np.eye(d)
    q_upper = upper - lower
    if len(rows_b):
        m_rows = rows_a
        q_rows = rows_b - rows_a @ lower
        big_m = np.vstack([m_upper, m_rows])
        big_q = np.concatenate([q_upper, q_rows])
    else:
        big_m, big_q = m_upper, q_upper

    y = _simplex_min(c, big_m, big_q)
    w = lower + y
    w = _refine_vertex(space, w)
    return PolytopeVertex(w=w, active=_active_set(space, w))


def max_sum_vertex(space: FeasibleSpace) -> np.ndarray:
    """The coordinate-sum maximizing vertex — the final-specification weight."""
    return solve_lp(space, -np.ones(space.dimension)).w


def vertex_with_active(space: FeasibleSpace, w: np.ndarray) -> PolytopeVertex:
    """Wrap a known-vertex weight with its tight set in this space."""
    return PolytopeVertex(w=w, active=_active_set(space, w))


def vertex_at(space: FeasibleSpace, w: Sequence[float]) -> PolytopeVertex | None:
    """Interpret w as a vertex of the space, or None if it is not one."""
    w = np.asarray(w, dtype=float)
    if not space.contains(w):
        return None
    active = _active_set(space, w)
    if space.dimension == 0:
        return PolytopeVertex(w=w, active=active)
    g, _ = space.constraint_system()
    if len(active) < space.dimension:
        return None
    if np.linalg.matrix_rank(g[list(active)], tol=1e-9) < space.dimension:
        return None
    return PolytopeVertex(w=w, active=active)


def adjacent_vertices(space: FeasibleSpace, vertex: PolytopeVertex) -> list[PolytopeVertex]:
    """Vertices one polytope edge away from `vertex`.

    At a nondegenerate vertex (exactly d tight constraints) every edge drops
    one tight constraint; the directions are the columns of the negated
    inverse of the tight-normal matrix. Degenerate vertices fall back to
    enumerating (d-1)-subsets of the tight set with their nullspace rays.
    Deterministic: candidates enumerate in active-index order, duplicates
    within tolerance collapse.
    """
    d = space.dimension
    if d == 0:
        return []
    g, h = space.constraint_system()
    w = vertex.w
    tight = list(vertex.active)
    found: list[PolytopeVertex] = []

    if len(tight) == d:
        normals = g[tight]
        try:
            directions = -np.linalg.inv(normals)
        except np.linalg.LinAlgError:
            directions = None  # not a proper vertex; try the subset route
        if directions is not None:
            exclude = set(tight)
            for drop_idx in range(d):
                direction = directions[:, drop_idx]
                kept = [tight[i] for i in range(d) if i != drop_idx]
                _step_and_collect(space, g, h, w, direction, kept, exclude, found)
            return found

    # duplicate rows (append-only log) repeat hyperplanes in the tight set;
    # one representative per distinct hyperplane keeps the enumeration small
    representatives: list[int] = []
    seen_planes: set[tuple] = set()
    for i in tight:
        norm = np.linalg.norm(g[i])
        plane = tuple(np.round(np.append(g[i] / norm, h[i] / norm), 10))
        anti = tuple(np.round(np.append(-g[i] / norm, -h[i] / norm), 10))
        if plane in seen_planes or anti in seen_planes:
            continue
        seen_planes.add(plane)
        representatives.append(i)

    for subset in itertools.combinations(representatives, d - 1):
        kept_rows = g[list(subset)] if subset else np.zeros((0, d))
        direction = _edge_direction(kept_rows, d)
        if direction is None:
            continue
        others = [i for i in tight if i not in subset]
        oriented = _orient(direction, g, others)
        if oriented is None:
            continue
        _step_and_collect(space, g, h, w, oriented, list(subset), set(subset), found)
    return found


def _step_and_collect(
    space: FeasibleSpace,
    g: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    direction: np.ndarray,
    kept: list[int],
    exclude: set[int],
    found: list[PolytopeVertex],
) -> None:
    """Ratio-test along `direction`, land on the blocking constraint, snap the
    candidate onto its defining hyperplanes, and append it if new."""
    slack = np.maximum(h - g @ w, 0.0)
    slope = g @ direction
    movable = slope > 1e-12
    for i in exclude:
        movable[i] = False
    if not movable.any():
        return
    candidates = np.where(movable)[0]
    steps = slack[candidates] / slope[candidates]
    pick = int(np.argmin(steps))
    step = float(steps[pick])
    blocker = int(candidates[pick])
    if step <= FEASIBILITY_TOLERANCE:
        return
    candidate = w + step * direction
    system = kept + [blocker]
    if len(system) == space.dimension:
        normals = g[system]
        try:
            candidate = np.linalg.solve(normals, h[system])
        except np.linalg.LinAlgError:
            candidate = _refine_vertex(space, candidate)
    else:
        candidate = _refine_vertex(space, candidate)
    if np.max(np.abs(candidate - w)) <= FEASIBILITY_TOLERANCE:
        return
    if not space.contains(candidate):
        return
    for prior in found:
        if np.max(np.abs(candidate - prior.w)) <= FEASIBILITY_TOLERANCE:
            return
    found.append(PolytopeVertex(w=candidate, active=_active_set(space, candidate)))


def weights_equivalent(
    w1: Sequence[float],
    w2: Sequence[float],
    graph: Multigraph,
    spec: Specification,
    task: Task,
) -> bool:
    """Task-scoped equivalence: both weightings share an optimal path."""
    return Router(graph, spec).weights_equivalent(w1, w2, task)


# -- internals ---------------------------------------------------------------


def _active_set(space: FeasibleSpace, w: np.ndarray) -> tuple[int, ...]:
    g, h = space.constraint_system()
    if g.shape[0] == 0:
        return ()
    residual = np.abs(g @ w - h)
    return tuple(int(i) for i in np.where(residual <= FEASIBILITY_TOLERANCE)[0])


def _refine_vertex(space: FeasibleSpace, w: np.ndarray) -> np.ndarray:
    """Snap w onto its tight constraints (least-squares) to shed solver drift."""
    g, h = space.constraint_system()
    if g.shape[0] == 0:
        return w
    residual = g @ w - h
    tight = np.where(np.abs(residual) <= 1e-6)[0]
    if len(tight) == 0:
        return w
    delta, *_ = np.linalg.lstsq(g[tight], -(residual[tight]), rcond=None)
    refined = w + delta
    if np.max(g @ refined - h) <= max(np.max(residual), 0.0) + 1e-12:
        return refined
    return w


def _edge_direction(kept: np.ndarray, d: int) -> np.ndarray | None:
    """Unit nullspace direction of the kept normals, or None if rank-deficient."""
    if kept.shape[0] == 0:
        return np.ones(1) if d == 1 else None
    _, s, vt = np.linalg.svd(kept)
    rank = int(np.sum(s > 1e-9 * max(1.0, s[0] if len(s) else 1.0)))
    if rank != d - 1:
        return None
    return vt[-1]


def _orient(direction: np.ndarray, g: np.ndarray, others: list[int]) -> np.ndarray | None:
    """Pick the sign of `direction` that leaves every other tight constraint
    satisfied; None when neither sign does (not a feasible edge)."""
    if not others:
        # a vertex always has more tight constraints than the d-1 kept ones
        return None
    slopes = g[others] @ direction
    if np.all(slopes <= 1e-9):
        return direction
    if np.all(-slopes <= 1e-9):
        return -direction
    return None


def _ratio_test(
    g: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    direction: np.ndarray,
    exclude: set[int],
) -> float | None:
    slack = h - g @ w
    slope = g @ direction
    best: float | None = None
    for i in range(len(h)):
        if i in exclude or slope[i] <= 1e-12:
            continue
        step = max(slack[i], 0.0) / slope[i]
        if best is None or step < best:
            best = step
    return best


def _simplex_min(c: np.ndarray, big_m: np.ndarray, q: np.ndarray) -> np.ndarray:
    """min c·y  s.t.  M y <= q,  y >= 0.  Two-phase dense tableau simplex with
    Bland's smallest-index anticycling rule."""
    m, n = big_m.shape
    negative = q < 0
    n_art = int(np.sum(negative))
    total = n + m + n_art

    tableau = np.zeros((m, total))
    rhs = q.astype(float).copy()
    basis = np.zeros(m, dtype=int)
    next_art = n + m
    for i in range(m):
        if negative[i]:
            tableau[i, :n] = -big_m[i]
            tableau[i, n + i] = -1.0
            tableau[i, next_art] = 1.0
            rhs[i] = -q[i]
            basis[i] = next_art
            next_art += 1
        else:
            tableau[i, :n] = big_m[i]
            tableau[i, n + i] = 1.0
            basis[i] = n + i

    allowed = np.ones(total, dtype=bool)
    if n_art:
        phase1_cost = np.zeros(total)
        phase1_cost[n + m :] = 1.0
        _pivot_until_optimal(tableau, rhs, basis, phase1_cost, allowed)
        if phase1_cost[basis] @ rhs > _INFEASIBILITY_TOLERANCE:
            raise InfeasibleError("feasible space is empty")
        # drive lingering zero-valued artificials out of the basis
        for i in range(m):
            if basis[i] >= n + m:
                for j in range(n + m):
                    if abs(tableau[i, j]) > _PIVOT_TOLERANCE:
                        _pivot(tableau, rhs, basis, i, j)
                        break
        allowed[n + m :] = False

    phase2_cost = np.zeros(total)
    phase2_cost[:n] = c
    _pivot_until_optimal(tableau, rhs, basis, phase2_cost, allowed)

    values = np.zeros(total)
    values[basis] = rhs
    return values[:n]


def _pivot_until_optimal(
    tableau: np.ndarray,
    rhs: np.ndarray,
    basis: np.ndarray,
    cost: np.ndarray,
    allowed: np.ndarray,
) -> None:
    for _ in range(_MAX_PIVOTS):
        reduced = cost - cost[basis] @ tableau
        candidates = np.where(allowed & (reduced < -_PIVOT_TOLERANCE))[0]
        if len(candidates) == 0:
            return
        entering = int(candidates[0])  # Bland: smallest variable index
        column = tableau[:, entering]
        rows = np.where(column > _PIVOT_TOLERANCE)[0]
        if len(rows) == 0:
            raise LPError("LP unbounded; the box bounds should prevent this")
        ratios = rhs[rows] / column[rows]
        best = ratios.min()
        near = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        leaving = int(near[np.argmin(basis[near])])  # Bland: smallest basic index
        _pivot(tableau, rhs, basis, leaving, entering)
    raise LPError("pivot limit exceeded")


def _pivot(tableau: np.ndarray, rhs: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    pivot = tableau[row, col]
    tableau[row] /= pivot
    rhs[row] /= pivot
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    rhs -= factors * rhs[row]
    rhs[(rhs < 0.0) & (rhs > -1e-9)] = 0.0  # shed float drift, keep real bugs visible
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0
    basis[row] = col
