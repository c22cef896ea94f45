"""Constrained-MDP accounting: returns, safety predicates, fitness.

Everything here is a pure function over value data, so any number of
worker processes can share the module without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

DEFAULT_GAMMA = 0.99
DEFAULT_PENALTY = 1.0e6

SafetyKind = Literal["traditional", "zero_violation", "almost_surely"]


@dataclass(frozen=True)
class SafetyRequirement:
    """A constraint on the discounted cumulative cost of a policy.

    traditional:    mean episode cost stays at or below d.
    zero_violation: traditional with d pinned to 0.
    almost_surely:  at most an epsilon share of episodes may individually
                    exceed d.
    """

    kind: SafetyKind = "traditional"
    d: float = 10.0
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("traditional", "zero_violation", "almost_surely"):
            raise ValueError(f"unknown safety kind: {self.kind!r}")
        if self.d < 0:
            raise ValueError(f"cost threshold must be >= 0, got {self.d}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0,1], got {self.epsilon}")

    @property
    def threshold(self) -> float:
        return 0.0 if self.kind == "zero_violation" else self.d


@dataclass
class Trajectory:
    """One episode of experience, stored as parallel arrays.

    shaped_rewards mirrors rewards exactly when no cost shaping is active.
    """

    observations: np.ndarray  # (n, n_features)
    actions: np.ndarray       # (n, 2)
    rewards: np.ndarray       # (n,)
    costs: np.ndarray         # (n,) entries in {0, 1}
    shaped_rewards: np.ndarray  # (n,)
    terminated_at_goal: bool

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class EpisodeStats:
    j_r: float
    j_c: float
    undiscounted_cost: float
    reached_goal: bool
    touched_hazard: bool

    @classmethod
    def from_trajectory(
        cls, traj: Trajectory, gamma: float = DEFAULT_GAMMA
    ) -> "EpisodeStats":
        raw_cost = float(np.sum(traj.costs))
        return cls(
            j_r=discounted_return(traj.rewards, gamma),
            j_c=discounted_return(traj.costs, gamma),
            undiscounted_cost=raw_cost,
            reached_goal=traj.terminated_at_goal,
            touched_hazard=raw_cost > 0,
        )


def discounted_return(values: Sequence[float], gamma: float) -> float:
    """Sum of gamma**t * values[t]; an empty sequence gives 0."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0,1], got {gamma}")
    total = 0.0
    for v in reversed(list(values)):
        total = float(v) + gamma * total
    return total


def satisfies(req: SafetyRequirement, episodes: Sequence[EpisodeStats]) -> bool:
    """Whether a batch of evaluation episodes meets the requirement."""
    if not episodes:
        raise ValueError("need at least one episode to check a requirement")
    costs = np.array([e.j_c for e in episodes], dtype=np.float64)
    if req.kind == "almost_surely":
        violating = float(np.mean(costs > req.d))
        return violating <= req.epsilon
    return float(np.mean(costs)) <= req.threshold


def constrained_fitness(
    j_r: float, j_c: float, d: float, n: float = DEFAULT_PENALTY
) -> float:
    """Piecewise policy fitness: a large penalty -n when the cost budget
    is exceeded, the reward estimate otherwise.  The boundary j_c == d
    counts as feasible.
    """
    if n <= 0:
        raise ValueError(f"penalty magnitude must be positive, got {n}")
    if j_c > d:
        return -n
    return j_r
