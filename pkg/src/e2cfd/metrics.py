"""Safety metrics, time-ratio accounting, cost distributions, and
cost-function heatmaps.

All computations here read raw (unshaped) episode statistics, which is
what keeps candidates comparable no matter what shaping they trained
under.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cmdp import EpisodeStats
from .dsl import Expr, evaluate
from .env import EnvConfig, features_at


def compute_rates(episodes: Sequence[EpisodeStats]) -> tuple[float, float]:
    """Task-completion and hazard-exposure rates over a batch of
    episodes: the fractions reaching the goal and touching any hazard.
    """
    if not episodes:
        raise ValueError("need at least one episode")
    n = len(episodes)
    tcr = sum(1 for e in episodes if e.reached_goal) / n
    her = sum(1 for e in episodes if e.touched_hazard) / n
    return tcr, her


def time_ratio(t_algo: float, t_ppo: float) -> float:
    """Wall-clock cost of a method relative to the plain PPO baseline."""
    if t_ppo <= 0:
        raise ValueError(f"baseline time must be positive, got {t_ppo}")
    return t_algo / t_ppo


@dataclass(frozen=True)
class CostDistribution:
    low: float
    q25: float
    median: float
    q75: float
    high: float
    outliers: tuple[float, ...]


def _quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear interpolation between closest ranks on presorted data."""
    n = len(sorted_values)
    if n == 1:
        return float(sorted_values[0])
    position = (n - 1) * q
    lower = int(math.floor(position))
    frac = position - lower
    if lower + 1 >= n:
        return float(sorted_values[-1])
    a = float(sorted_values[lower])
    b = float(sorted_values[lower + 1])
    return a + (b - a) * frac


def cost_distribution(episodes: Sequence[EpisodeStats]) -> CostDistribution:
    """Five-number summary of per-episode cumulative costs, with
    outliers flagged by the 1.5 IQR rule.
    """
    if not episodes:
        raise ValueError("need at least one episode")
    values = sorted(e.j_c for e in episodes)
    q25 = _quantile(values, 0.25)
    median = _quantile(values, 0.5)
    q75 = _quantile(values, 0.75)
    iqr = q75 - q25
    fence_lo = q25 - 1.5 * iqr
    fence_hi = q75 + 1.5 * iqr
    outliers = tuple(v for v in values if v < fence_lo or v > fence_hi)
    return CostDistribution(
        low=values[0],
        q25=q25,
        median=median,
        q75=q75,
        high=values[-1],
        outliers=outliers,
    )


@dataclass
class RunSummary:
    """What one training job leaves behind for reporting."""

    algorithm: str
    final_tcr: float
    final_her: float
    wall_clock_s: float
    episode_costs: list[float] = field(default_factory=list)
    lambda_history: list[float] = field(default_factory=list)


@dataclass
class HeatmapGrid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    resolution: int
    values: np.ndarray  # (resolution, resolution), row i = y_i, col j = x_j

    def x_coords(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.resolution)

    def y_coords(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.resolution)

    def to_csv(self) -> str:
        lines = ["x,y,value"]
        xs = self.x_coords()
        ys = self.y_coords()
        for i, y in enumerate(ys):
            for j, x in enumerate(xs):
                lines.append(
                    f"{float(x)!r},{float(y)!r},{float(self.values[i, j])!r}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "HeatmapGrid":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "x,y,value":
            raise ValueError("unrecognized heatmap CSV header")
        xs: list[float] = []
        ys: list[float] = []
        vals: list[float] = []
        for ln in lines[1:]:
            x, y, v = ln.split(",")
            xs.append(float(x))
            ys.append(float(y))
            vals.append(float(v))
        resolution = int(math.isqrt(len(vals)))
        if resolution * resolution != len(vals):
            raise ValueError("heatmap CSV is not a square grid")
        values = np.array(vals).reshape(resolution, resolution)
        return cls(
            x_min=min(xs),
            x_max=max(xs),
            y_min=min(ys),
            y_max=max(ys),
            resolution=resolution,
            values=values,
        )

    def to_pgm(self) -> str:
        """Plain-text PGM (P2), values scaled so the maximum maps to 255."""
        lo = float(np.min(self.values))
        hi = float(np.max(self.values))
        if hi > lo:
            scaled = np.rint((self.values - lo) / (hi - lo) * 255).astype(int)
        else:
            scaled = np.zeros_like(self.values, dtype=int)
        lines = [f"P2", f"{self.resolution} {self.resolution}", "255"]
        for row in scaled:
            lines.append(" ".join(str(v) for v in row))
        return "\n".join(lines) + "\n"


def heatmap(
    candidate: Expr, env_config: EnvConfig, resolution: int = 50
) -> HeatmapGrid:
    """Evaluate a candidate over the arena with the robot hypothetically
    at rest in each cell.  Regeneration is bit-identical for the same
    candidate and config.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    he = env_config.arena_half_extent
    xs = np.linspace(-he, he, resolution)
    ys = np.linspace(-he, he, resolution)
    values = np.empty((resolution, resolution))
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            values[i, j] = evaluate(
                candidate, features_at(env_config, float(x), float(y))
            )
    return HeatmapGrid(
        x_min=-he, x_max=he, y_min=-he, y_max=he,
        resolution=resolution, values=values,
    )
