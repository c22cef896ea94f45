"""Fast policy evaluation: short shaped training runs that score candidates.

Each candidate gets a fresh policy trained for a small number of epochs
with the candidate expression added to the reward, then a fixed batch of
deterministic evaluation episodes with the shaping switched off.  The
resulting aggregate metrics feed a scoring expression over a small,
fixed feature set.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from . import env as env_module
from .cmdp import EpisodeStats
from .dsl import Expr, evaluate, parse
from .ecf import CandidateRecord, advance
from .metrics import compute_rates
from .nets import GaussianPolicy, Mlp
from .ppo import PpoConfig, ShapingError, TrainReport, run_eval_episodes, train

SCORE_FEATURES = ("avg_return", "avg_cost", "tcr", "her", "d", "n")
BUILTIN_SCORE_TEXT = "if(avg_cost > d, 0 - n, avg_return)"

EVAL_SEED_OFFSET = 10_000

DEFAULT_EARLY_EPOCHS = 5
DEFAULT_LATE_EPOCHS = 20
DEFAULT_EVAL_EPISODES = 20


@dataclass(frozen=True)
class EvalPhase:
    """How long to train and how many episodes to judge on."""

    label: Literal["early", "late"]
    epochs: int
    eval_episodes: int = DEFAULT_EVAL_EPISODES

    def __post_init__(self) -> None:
        if self.label not in ("early", "late"):
            raise ValueError(f"unknown phase label {self.label!r}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")


def default_phases() -> tuple[EvalPhase, EvalPhase]:
    return (
        EvalPhase("early", DEFAULT_EARLY_EPOCHS),
        EvalPhase("late", DEFAULT_LATE_EPOCHS),
    )


@dataclass(frozen=True)
class MetricsAggregate:
    """Evaluation summary for one candidate at one phase."""

    avg_return: float
    avg_cost: float
    tcr: float
    her: float
    episodes: int
    wall_clock_s: float

    def as_dict(self) -> dict:
        return {
            "avg_return": self.avg_return,
            "avg_cost": self.avg_cost,
            "tcr": self.tcr,
            "her": self.her,
            "episodes": self.episodes,
            "wall_clock_s": self.wall_clock_s,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsAggregate":
        return cls(**{k: data[k] for k in (
            "avg_return", "avg_cost", "tcr", "her", "episodes", "wall_clock_s"
        )})


@dataclass
class FpeResult:
    metrics: MetricsAggregate
    policy: GaussianPolicy
    report: TrainReport


def aggregate_episodes(
    episodes: list[EpisodeStats], wall_clock_s: float
) -> MetricsAggregate:
    tcr, her = compute_rates(episodes)
    return MetricsAggregate(
        avg_return=float(np.mean([e.j_r for e in episodes])),
        avg_cost=float(np.mean([e.j_c for e in episodes])),
        tcr=tcr,
        her=her,
        episodes=len(episodes),
        wall_clock_s=wall_clock_s,
    )


def fpe_run(
    candidate: CandidateRecord,
    phase: EvalPhase,
    env_config: env_module.EnvConfig,
    ppo_config: PpoConfig,
    seed: int,
) -> FpeResult:
    """Train a fresh policy with the candidate as shaping, then measure
    it over deterministic unshaped evaluation episodes.

    Raises ShapingError when the candidate cannot be evaluated inside
    the training loop; callers turn that into a soft failure.
    """
    if candidate.ast is None:
        raise ValueError(f"candidate {candidate.id} has no parsed expression")
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    obs_dim = len(env_module.FEATURES)
    policy = GaussianPolicy(obs_dim, 2, rng)
    value_net = Mlp([obs_dim, 64, 64, 1], rng)
    config = replace(ppo_config, epochs=phase.epochs, seed=seed)
    report = train(
        env_config, policy, value_net, config, shaping=candidate.ast
    )
    episodes = run_eval_episodes(
        env_config,
        policy,
        phase.eval_episodes,
        seed=seed + EVAL_SEED_OFFSET,
        gamma=config.gamma,
    )
    wall = time.perf_counter() - start
    return FpeResult(aggregate_episodes(episodes, wall), policy, report)


def score(
    metrics: MetricsAggregate, expr: Expr, d: float, n: float = 1e6
) -> float:
    """Evaluate a scoring expression over the aggregate-metric features."""
    if n <= 0:
        raise ValueError("penalty n must be positive")
    features = {
        "avg_return": metrics.avg_return,
        "avg_cost": metrics.avg_cost,
        "tcr": metrics.tcr,
        "her": metrics.her,
        "d": d,
        "n": n,
    }
    return evaluate(expr, features)


def builtin_score_expr() -> Expr:
    return parse(BUILTIN_SCORE_TEXT)


def evaluate_candidate(
    record: CandidateRecord,
    phase: EvalPhase,
    env_config: env_module.EnvConfig,
    ppo_config: PpoConfig,
    seed: int,
    score_expr: Expr,
    d: float,
    n: float = 1e6,
) -> FpeResult | None:
    """FPE one approved candidate and write metrics and fitness onto it.

    A candidate whose shaping blows up during training is not a hard
    error; it scores the infeasibility penalty and the loop moves on.
    Returns None in that case.
    """
    if record.status != "approved":
        raise ValueError(f"{record.id} is {record.status}, not approved")
    try:
        result = fpe_run(record, phase, env_config, ppo_config, seed)
    except ShapingError as exc:
        record.fitness = -n
        record.failure_reason = f"shaping failed during training: {exc}"
        advance(record, "evaluated")
        return None
    record.fpe_metrics = result.metrics
    record.fitness = score(result.metrics, score_expr, d, n)
    advance(record, "evaluated")
    return result
