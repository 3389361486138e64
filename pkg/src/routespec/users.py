"""Simulated users answering path-pair queries from hidden true weights.

The deterministic linear model: a user prefers whichever path has the lower
true cost (features dotted with the hidden weights, plus duration); exact ties
fall to a configured rule. A flip-probability hook exists for robustness
experiments but defaults to off and stays out of acceptance runs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .graph import Path, Specification, path_cost

TIE_PREFER_CURRENT = "prefer-current"
TIE_PREFER_ALTERNATIVE = "prefer-alternative"


@dataclass
class SimulatedUser:
    w_star: np.ndarray
    tie_rule: str = TIE_PREFER_CURRENT
    flip_probability: float = 0.0
    rng: random.Random | None = None

    def __post_init__(self) -> None:
        self.w_star = np.asarray(self.w_star, dtype=float)
        if self.tie_rule not in (TIE_PREFER_CURRENT, TIE_PREFER_ALTERNATIVE):
            raise ValueError(f"unknown tie rule {self.tie_rule!r}")
        if self.flip_probability and self.rng is None:
            self.rng = random.Random(0)

    def true_cost(self, path: Path) -> float:
        return path_cost(path.features, path.duration_s, self.w_star)

    def choose(self, path_current: Path, path_alternative: Path) -> str:
        """'current' or 'alternative', by strictly lower true cost."""
        cost_current = self.true_cost(path_current)
        cost_alternative = self.true_cost(path_alternative)
        if cost_alternative < cost_current:
            answer = "alternative"
        elif cost_current < cost_alternative:
            answer = "current"
        else:
            answer = (
                "current" if self.tie_rule == TIE_PREFER_CURRENT else "alternative"
            )
        if self.flip_probability > 0.0 and self.rng.random() < self.flip_probability:
            answer = "alternative" if answer == "current" else "current"
        return answer


def simulate_choice(user: SimulatedUser, path_current: Path, path_alternative: Path) -> str:
    return user.choose(path_current, path_alternative)


def random_user(
    spec: Specification,
    rng: random.Random,
    tie_rule: str = TIE_PREFER_CURRENT,
    penalty_scale: float | None = None,
) -> SimulatedUser:
    """Draw a hidden weight uniformly per coordinate.

    Penalties draw from [0, min(upper, penalty_scale)]: the raw upper bound is
    the sum of every edge time, orders of magnitude beyond any achievable path
    saving, and sampling up there yields users who never accept anything.
    Capping at a task-time scale produces the mixed accept/reject populations
    the batch experiments need; pass None to sample the full box. Rewards draw
    from their full [lower, 0] range either way.
    """
    values = []
    for constraint in spec.constraints:
        if constraint.kind == "penalty":
            high = constraint.upper
            if penalty_scale is not None:
                high = min(high, penalty_scale)
            values.append(rng.uniform(0.0, high))
        else:
            values.append(rng.uniform(constraint.lower, 0.0))
    return SimulatedUser(w_star=np.array(values), tie_rule=tie_rule)
