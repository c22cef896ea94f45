"""Point-robot navigation arena with static circular hazards.

A point robot with double-integrator dynamics moves in a square arena
toward a fixed goal circle; crossing a hazard circle emits a unit cost
per step but does not end the episode.  The default layout places both
hazards so that the greedy straight path to the goal clips one of them,
which is what makes cost shaping consequential on this task.

Observations are an 11-feature vector; the feature name registry below
is the namespace the cost expression language validates against, and
its order is fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FEATURES = (
    "x",
    "y",
    "vx",
    "vy",
    "goal_dx",
    "goal_dy",
    "dist_goal",
    "dist_hazard_min",
    "in_hazard",
    "speed",
    "progress",
)

_SPAWN_ATTEMPTS = 10_000


def feature_registry() -> tuple[str, ...]:
    """The fixed, ordered feature-name registry."""
    return FEATURES


@dataclass(frozen=True)
class EnvConfig:
    arena_half_extent: float = 2.0
    goal_center: tuple[float, float] = (1.5, 1.5)
    goal_radius: float = 0.3
    hazards: tuple[tuple[tuple[float, float], float], ...] = (
        ((0.0, 0.5), 0.5),
        ((0.8, -0.4), 0.5),
    )
    dt: float = 0.1
    accel_gain: float = 4.0
    max_speed: float = 1.0
    max_episode_steps: int = 300
    goal_bonus: float = 10.0
    progress_coefficient: float = 1.0

    def __post_init__(self) -> None:
        he = self.arena_half_extent
        if he <= 0:
            raise ValueError("arena half-extent must be positive")
        if self.goal_radius <= 0:
            raise ValueError("goal radius must be positive")
        circles = [(self.goal_center, self.goal_radius)]
        circles += [(c, r) for c, r in self.hazards]
        for (cx, cy), r in circles:
            if r <= 0:
                raise ValueError("circle radii must be positive")
            if abs(cx) + r > he or abs(cy) + r > he:
                raise ValueError(
                    f"circle at ({cx}, {cy}) radius {r} leaves the arena"
                )
        if self.max_episode_steps < 1:
            raise ValueError("need at least one step per episode")


def hazard_free_config() -> EnvConfig:
    """Layout used by dynamics sanity checks; no hazards at all."""
    return EnvConfig(hazards=())


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    cost: float
    done: bool
    done_reason: str | None  # "goal" | "timeout" | None while running


def feature_ranges(config: EnvConfig) -> dict[str, tuple[float, float]]:
    """Plausible [lo, hi] interval per feature, used by the lint probes."""
    he = config.arena_half_extent
    diag = 2 * he * math.sqrt(2.0)
    max_haz_r = max((r for _, r in config.hazards), default=0.0)
    step_dist = config.max_speed * config.dt
    return {
        "x": (-he, he),
        "y": (-he, he),
        "vx": (-config.max_speed, config.max_speed),
        "vy": (-config.max_speed, config.max_speed),
        "goal_dx": (-2 * he, 2 * he),
        "goal_dy": (-2 * he, 2 * he),
        "dist_goal": (0.0, diag),
        "dist_hazard_min": (-max_haz_r, diag),
        "in_hazard": (0.0, 1.0),
        "speed": (0.0, config.max_speed),
        "progress": (-step_dist, step_dist),
    }


def _dist_hazard_min(config: EnvConfig, x: float, y: float) -> float:
    """Distance to the nearest hazard boundary; negative inside one."""
    best = math.inf
    for (cx, cy), r in config.hazards:
        best = min(best, math.hypot(x - cx, y - cy) - r)
    if best is math.inf:
        # No hazards configured; report the arena diagonal so that
        # "far from every hazard" stays true.
        best = 2 * config.arena_half_extent * math.sqrt(2.0)
    return best


def observation_at(
    config: EnvConfig,
    pos: np.ndarray,
    vel: np.ndarray | None = None,
    progress: float = 0.0,
) -> np.ndarray:
    """The observation the robot would see at a given pose.  Used by the
    environment itself and by anything that needs features for a
    hypothetical position (lint probes, heatmaps).
    """
    gx, gy = config.goal_center
    x, y = float(pos[0]), float(pos[1])
    vx, vy = (0.0, 0.0) if vel is None else (float(vel[0]), float(vel[1]))
    dist_hazard = _dist_hazard_min(config, x, y)
    return np.array(
        [
            x,
            y,
            vx,
            vy,
            gx - x,
            gy - y,
            math.hypot(gx - x, gy - y),
            dist_hazard,
            1.0 if dist_hazard < 0.0 else 0.0,
            math.hypot(vx, vy),
            progress,
        ],
        dtype=np.float64,
    )


def features_at(config: EnvConfig, x: float, y: float) -> dict[str, float]:
    """Feature map for a robot at rest at (x, y)."""
    return feature_map(observation_at(config, np.array([x, y])))


class PointGoalEnv:
    """Single-threaded environment instance; run copies in parallel
    workers instead of sharing one.
    """

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self._pos = np.zeros(2)
        self._vel = np.zeros(2)
        self._prev_dist_goal = 0.0
        self._steps = 0
        self._done = True

    def reset(self, seed: int) -> np.ndarray:
        """Spawn uniformly at random outside hazard and goal interiors."""
        rng = np.random.default_rng(seed)
        he = self.config.arena_half_extent
        for _ in range(_SPAWN_ATTEMPTS):
            pos = rng.uniform(-he, he, size=2)
            if self._inside_goal(pos) or self._inside_hazard(pos):
                continue
            break
        else:
            raise ValueError(
                "no free spawn area: hazards and goal cover the arena"
            )
        self._pos = pos
        self._vel = np.zeros(2)
        self._prev_dist_goal = self._dist_goal(pos)
        self._steps = 0
        self._done = False
        return self._observe(progress=0.0)

    def step(self, action: np.ndarray) -> StepResult:
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        cfg = self.config
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)

        self._vel = self._vel + a * cfg.accel_gain * cfg.dt
        speed = float(np.linalg.norm(self._vel))
        if speed > cfg.max_speed:
            self._vel *= cfg.max_speed / speed
        self._pos = np.clip(
            self._pos + self._vel * cfg.dt,
            -cfg.arena_half_extent,
            cfg.arena_half_extent,
        )
        self._steps += 1

        dist_goal = self._dist_goal(self._pos)
        progress = self._prev_dist_goal - dist_goal
        self._prev_dist_goal = dist_goal

        at_goal = self._inside_goal(self._pos)
        reward = cfg.progress_coefficient * progress
        if at_goal:
            reward += cfg.goal_bonus
        cost = 1.0 if self._inside_hazard(self._pos) else 0.0

        done_reason = None
        if at_goal:
            done_reason = "goal"
        elif self._steps >= cfg.max_episode_steps:
            done_reason = "timeout"
        self._done = done_reason is not None

        return StepResult(
            observation=self._observe(progress=progress),
            reward=reward,
            cost=cost,
            done=self._done,
            done_reason=done_reason,
        )

    # -- geometry ------------------------------------------------------

    def _dist_goal(self, pos: np.ndarray) -> float:
        gx, gy = self.config.goal_center
        return math.hypot(pos[0] - gx, pos[1] - gy)

    def _inside_goal(self, pos: np.ndarray) -> bool:
        return self._dist_goal(pos) < self.config.goal_radius

    def _inside_hazard(self, pos: np.ndarray) -> bool:
        return _dist_hazard_min(self.config, pos[0], pos[1]) < 0.0

    def _observe(self, progress: float) -> np.ndarray:
        return observation_at(self.config, self._pos, self._vel, progress)


def feature_map(observation: np.ndarray) -> dict[str, float]:
    """Name -> value view of an observation, for expression evaluation."""
    return {name: float(observation[i]) for i, name in enumerate(FEATURES)}
