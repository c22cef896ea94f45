"""Proximal policy optimization with GAE, plus a Lagrangian variant.

Rollout collection applies additive reward shaping from a generated cost
expression; the raw environment rewards and costs are recorded
unchanged, so the safety metrics stay comparable across candidates no
matter what shaping was active.

Each training run owns its policy, value nets, and environment.  Runs
for distinct candidates can execute in parallel workers; a single run is
single-threaded.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels as k
from .cmdp import EpisodeStats, discounted_return
from .dsl import DslError, Expr, evaluate
from .env import PointGoalEnv, EnvConfig, feature_map
from .nets import Adam, GaussianPolicy, Mlp, LOG_STD_MIN, LOG_STD_MAX

_LOG_2PI = float(np.log(2.0 * np.pi))


class ShapingError(Exception):
    """A shaping expression failed to evaluate during rollout collection.

    This is a candidate-level failure: the orchestrator records it
    against the candidate instead of crashing the run.
    """


@dataclass(frozen=True)
class PpoConfig:
    epochs: int = 50
    steps_per_epoch: int = 4000
    max_episode_steps: int = 300
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    policy_lr: float = 3e-4
    value_lr: float = 1e-3
    update_iters: int = 10
    minibatch_size: int = 256
    entropy_coefficient: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps_per_epoch < self.max_episode_steps:
            raise ValueError(
                "steps_per_epoch must cover at least one full episode"
            )
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError(f"clip_ratio must be in (0,1), got {self.clip_ratio}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gamma and gae_lambda must be in [0,1]")


@dataclass(frozen=True)
class LagrangeState:
    lam: float = 0.0
    lambda_lr: float = 0.05
    d: float = 10.0

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError("multiplier must be nonnegative")


def lagrange_update(state: LagrangeState, measured_cost: float) -> LagrangeState:
    """Dual ascent on the cost constraint, projected onto lam >= 0."""
    lam = max(0.0, state.lam + state.lambda_lr * (measured_cost - state.d))
    return dataclasses.replace(state, lam=lam)


def shaped_reward(
    raw_reward: float,
    cost_expr: Expr | None,
    features: Mapping[str, float],
    scale: float = 1.0,
) -> float:
    """Additive shaping: raw reward plus the scaled penalty expression."""
    if cost_expr is None:
        return raw_reward
    return raw_reward + scale * evaluate(cost_expr, features)


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    episode_bounds: Sequence[tuple[int, int]],
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and value targets over a flat multi-episode batch.

    values carries one bootstrap entry per episode beyond the per-step
    estimates: episode e spanning rewards[start:end] owns the slice
    values[start + e : end + e + 1].
    """
    n = len(rewards)
    total = sum(end - start for start, end in episode_bounds)
    if total != n:
        raise ValueError(f"bounds cover {total} steps, rewards have {n}")
    if len(values) != n + len(episode_bounds):
        raise ValueError(
            f"values length {len(values)} != steps {n} + "
            f"episodes {len(episode_bounds)}"
        )
    advantages = np.empty(n, dtype=np.float64)
    flat_values = np.empty(n, dtype=np.float64)
    for e, (start, end) in enumerate(episode_bounds):
        vslice = np.ascontiguousarray(values[start + e : end + e + 1])
        rslice = np.ascontiguousarray(rewards[start:end])
        advantages[start:end] = k.gae_scan(rslice, vslice, gamma, lam)
        flat_values[start:end] = vslice[:-1]
    return advantages, advantages + flat_values


@dataclass
class RolloutBuffer:
    observations: np.ndarray    # (n, obs_dim)
    actions: np.ndarray         # (n, act_dim) raw pre-clamp samples
    log_probs: np.ndarray       # (n,)
    shaped_rewards: np.ndarray  # (n,)
    raw_rewards: np.ndarray     # (n,)
    costs: np.ndarray           # (n,)
    values: np.ndarray          # (n + n_episodes,) with bootstraps
    episode_bounds: list[tuple[int, int]]


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    avg_return: float
    avg_cost: float
    avg_shaped_return: float
    episodes: int
    tcr: float
    her: float
    wall_clock_s: float


@dataclass
class TrainReport:
    rows: list[EpochRow] = field(default_factory=list)
    wall_clock_s: float = 0.0
    lambda_history: list[float] = field(default_factory=list)

    CSV_HEADER = (
        "epoch,avg_return,avg_cost,avg_shaped_return,"
        "episodes,tcr,her,wall_clock_s"
    )

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.epoch},{r.avg_return!r},{r.avg_cost!r},"
                f"{r.avg_shaped_return!r},{r.episodes},"
                f"{r.tcr!r},{r.her!r},{r.wall_clock_s!r}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrainReport":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != cls.CSV_HEADER:
            raise ValueError("unrecognized training report CSV header")
        rows = []
        for ln in lines[1:]:
            parts = ln.split(",")
            rows.append(
                EpochRow(
                    epoch=int(parts[0]),
                    avg_return=float(parts[1]),
                    avg_cost=float(parts[2]),
                    avg_shaped_return=float(parts[3]),
                    episodes=int(parts[4]),
                    tcr=float(parts[5]),
                    her=float(parts[6]),
                    wall_clock_s=float(parts[7]),
                )
            )
        total = sum(r.wall_clock_s for r in rows)
        return cls(rows=rows, wall_clock_s=total)

    def deterministic_view(self) -> list[tuple]:
        """Row tuples with the wall-clock column dropped; two runs with
        the same seed and config must agree on this view exactly (wall
        time is the one field that legitimately differs).
        """
        return [
            (r.epoch, r.avg_return, r.avg_cost, r.avg_shaped_return,
             r.episodes, r.tcr, r.her)
            for r in self.rows
        ]


def _collect(
    env: PointGoalEnv,
    policy: GaussianPolicy,
    value_net: Mlp,
    cost_value_net: Mlp | None,
    cfg: PpoConfig,
    rng: np.random.Generator,
    shaping: Expr | None,
    scale: float,
) -> tuple[RolloutBuffer, np.ndarray | None, list[EpisodeStats], list[float]]:
    """One epoch of experience plus per-episode stats.

    The final episode is cut at the step budget, bootstrapped from the
    value of its successor observation, and excluded from the episode
    stats (its steps still train).  Goal terminations bootstrap with 0;
    timeouts bootstrap from the successor state like cuts do.
    """
    n = cfg.steps_per_epoch
    obs = env.reset(seed=int(rng.integers(2**31)))
    observations = np.empty((n, obs.shape[0]))
    actions = np.empty((n, policy.act_dim))
    log_probs = np.empty(n)
    shaped_rewards = np.empty(n)
    raw_rewards = np.empty(n)
    costs = np.empty(n)
    bounds: list[tuple[int, int]] = []
    # Successor observation to bootstrap each episode's tail value from;
    # None marks a true terminal (goal reached), worth exactly 0.
    tails: list[np.ndarray | None] = []
    finished: list[bool] = []
    reached: list[bool] = []

    start = 0
    t = 0
    while t < n:
        action, raw, logp = policy.sample(obs, rng)
        result = env.step(action)
        observations[t] = obs
        actions[t] = raw
        log_probs[t] = logp
        raw_rewards[t] = result.reward
        costs[t] = result.cost
        try:
            shaped_rewards[t] = shaped_reward(
                result.reward, shaping, feature_map(result.observation), scale
            )
        except DslError as exc:
            raise ShapingError(str(exc)) from exc
        obs = result.observation
        t += 1
        if result.done:
            bounds.append((start, t))
            at_goal = result.done_reason == "goal"
            tails.append(None if at_goal else obs)
            finished.append(True)
            reached.append(at_goal)
            start = t
            if t < n:
                obs = env.reset(seed=int(rng.integers(2**31)))
        elif t == n:
            bounds.append((start, t))
            tails.append(obs)
            finished.append(False)
            reached.append(False)

    values = _values_with_tails(value_net, observations, bounds, tails)
    cost_values = None
    if cost_value_net is not None:
        cost_values = _values_with_tails(
            cost_value_net, observations, bounds, tails
        )

    completed: list[EpisodeStats] = []
    shaped_returns: list[float] = []
    for (s, e), done, at_goal in zip(bounds, finished, reached):
        if not done:
            continue
        raw_cost = float(np.sum(costs[s:e]))
        completed.append(
            EpisodeStats(
                j_r=discounted_return(raw_rewards[s:e], cfg.gamma),
                j_c=discounted_return(costs[s:e], cfg.gamma),
                undiscounted_cost=raw_cost,
                reached_goal=at_goal,
                touched_hazard=raw_cost > 0,
            )
        )
        shaped_returns.append(discounted_return(shaped_rewards[s:e], cfg.gamma))

    buffer = RolloutBuffer(
        observations=observations,
        actions=actions,
        log_probs=log_probs,
        shaped_rewards=shaped_rewards,
        raw_rewards=raw_rewards,
        costs=costs,
        values=values,
        episode_bounds=bounds,
    )
    return buffer, cost_values, completed, shaped_returns


def _values_with_tails(
    net: Mlp,
    observations: np.ndarray,
    bounds: Sequence[tuple[int, int]],
    tails: Sequence[np.ndarray | None],
) -> np.ndarray:
    """Per-step value estimates interleaved with one bootstrap entry per
    episode, in the layout gae() expects.
    """
    flat = net.forward(observations).reshape(-1)
    out = np.empty(len(flat) + len(bounds))
    cursor = 0
    for (s, e), tail in zip(bounds, tails):
        out[cursor : cursor + (e - s)] = flat[s:e]
        cursor += e - s
        out[cursor] = 0.0 if tail is None else float(net.forward(tail)[0])
        cursor += 1
    return out


def _normalized(advantages: np.ndarray) -> np.ndarray:
    mean = float(np.mean(advantages))
    std = float(np.std(advantages))
    if std < 1e-8:
        return advantages - mean
    out = (advantages - mean) / std
    assert abs(float(np.mean(out))) < 1e-8
    assert abs(float(np.std(out)) - 1.0) < 1e-6
    return out


def _update_policy(
    policy: GaussianPolicy,
    optimizer: Adam,
    obs: np.ndarray,
    raw_actions: np.ndarray,
    logp_old: np.ndarray,
    advantages: np.ndarray,
    cfg: PpoConfig,
) -> None:
    """One clipped-surrogate gradient step on a minibatch."""
    batch = len(obs)
    mean, acts = policy.mean_net.forward_full(obs)
    log_std = policy.effective_log_std()
    std = np.exp(log_std)
    z = (raw_actions - mean) / std
    logp = np.sum(-0.5 * z * z - log_std - 0.5 * _LOG_2PI, axis=-1)
    ratio = np.exp(logp - logp_old)

    lo, hi = 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio
    clipped = np.clip(ratio, lo, hi)
    # Gradient flows only through samples where the unclipped surrogate
    # is the active branch of the min.
    active = ratio * advantages <= clipped * advantages
    dlogp = -(ratio * advantages * active) / batch

    mean_grad = (dlogp[:, None] * z) / std
    grads = policy.mean_net.backward(acts, mean_grad)

    log_std_grad = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0)
    log_std_grad -= cfg.entropy_coefficient
    # No gradient where the clamp saturates.
    interior = (policy.log_std > LOG_STD_MIN) & (policy.log_std < LOG_STD_MAX)
    log_std_grad *= interior
    grads.append(log_std_grad)

    optimizer.step(policy.params(), grads)


def _update_value(
    net: Mlp,
    optimizer: Adam,
    obs: np.ndarray,
    targets: np.ndarray,
) -> None:
    batch = len(obs)
    predicted, acts = net.forward_full(obs)
    upstream = 2.0 * (predicted - targets[:, None]) / batch
    grads = net.backward(acts, upstream)
    optimizer.step(net.params(), grads)


def train(
    env_config: EnvConfig,
    policy: GaussianPolicy,
    value_net: Mlp,
    config: PpoConfig,
    shaping: Expr | None = None,
    shaping_scale: float = 1.0,
    stop_after: int | None = None,
    seed: int | None = None,
    lagrange: LagrangeState | None = None,
    cost_value_net: Mlp | None = None,
) -> TrainReport:
    """Run PPO (or PPO-Lagrangian when a LagrangeState is given),
    mutating the policy and value nets in place.

    Deterministic given (seed, config, shaping): two runs produce
    reports with identical deterministic_view()s.  stop_after truncates
    the epoch count for fast candidate evaluation; stop_after=0 returns
    an empty report and leaves the nets untouched.
    """
    if lagrange is not None and cost_value_net is None:
        raise ValueError("the Lagrangian variant needs a cost value net")
    env = PointGoalEnv(
        dataclasses.replace(
            env_config, max_episode_steps=config.max_episode_steps
        )
    )
    rng = np.random.default_rng(config.seed if seed is None else seed)
    policy_opt = Adam(policy.params(), lr=config.policy_lr)
    value_opt = Adam(value_net.params(), lr=config.value_lr)
    cost_opt = None
    if cost_value_net is not None:
        cost_opt = Adam(cost_value_net.params(), lr=config.value_lr)

    epochs = config.epochs if stop_after is None else min(config.epochs, stop_after)
    report = TrainReport()
    total_start = time.perf_counter()

    for epoch in range(1, epochs + 1):
        epoch_start = time.perf_counter()
        buffer, cost_values, episodes, shaped_returns = _collect(
            env, policy, value_net, cost_value_net, config, rng,
            shaping, shaping_scale,
        )
        advantages, value_targets = gae(
            buffer.shaped_rewards, buffer.values, buffer.episode_bounds,
            config.gamma, config.gae_lambda,
        )
        cost_targets = None
        if lagrange is not None:
            cost_adv, cost_targets = gae(
                buffer.costs, cost_values, buffer.episode_bounds,
                config.gamma, config.gae_lambda,
            )
            advantages = (advantages - lagrange.lam * cost_adv) / (
                1.0 + lagrange.lam
            )
        advantages = _normalized(advantages)

        n = config.steps_per_epoch
        for _ in range(config.update_iters):
            order = rng.permutation(n)
            for lo in range(0, n, config.minibatch_size):
                idx = order[lo : lo + config.minibatch_size]
                _update_policy(
                    policy,
                    policy_opt,
                    np.ascontiguousarray(buffer.observations[idx]),
                    np.ascontiguousarray(buffer.actions[idx]),
                    buffer.log_probs[idx],
                    advantages[idx],
                    config,
                )
                _update_value(
                    value_net,
                    value_opt,
                    np.ascontiguousarray(buffer.observations[idx]),
                    value_targets[idx],
                )
                if cost_opt is not None and cost_targets is not None:
                    _update_value(
                        cost_value_net,
                        cost_opt,
                        np.ascontiguousarray(buffer.observations[idx]),
                        cost_targets[idx],
                    )

        if lagrange is not None and episodes:
            measured = float(np.mean([e.j_c for e in episodes]))
            lagrange = lagrange_update(lagrange, measured)
            report.lambda_history.append(lagrange.lam)

        n_ep = len(episodes)
        report.rows.append(
            EpochRow(
                epoch=epoch,
                avg_return=float(np.mean([e.j_r for e in episodes])) if n_ep else 0.0,
                avg_cost=float(np.mean([e.j_c for e in episodes])) if n_ep else 0.0,
                avg_shaped_return=float(np.mean(shaped_returns)) if shaped_returns else 0.0,
                episodes=n_ep,
                tcr=float(np.mean([e.reached_goal for e in episodes])) if n_ep else 0.0,
                her=float(np.mean([e.touched_hazard for e in episodes])) if n_ep else 0.0,
                wall_clock_s=time.perf_counter() - epoch_start,
            )
        )

    report.wall_clock_s = time.perf_counter() - total_start
    return report


def run_eval_episodes(
    env_config: EnvConfig,
    policy: GaussianPolicy,
    n_episodes: int,
    seed: int,
    gamma: float = 0.99,
) -> list[EpisodeStats]:
    """Deterministic-policy rollouts (mean action, no shaping) used for
    metric collection; raw rewards and costs only.
    """
    env = PointGoalEnv(env_config)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_episodes):
        obs = env.reset(seed=int(rng.integers(2**31)))
        rewards: list[float] = []
        costs: list[float] = []
        reached = False
        done = False
        while not done:
            action = np.clip(policy.mean_net.forward(obs), -1.0, 1.0)
            result = env.step(action)
            rewards.append(result.reward)
            costs.append(result.cost)
            obs = result.observation
            done = result.done
            reached = result.done_reason == "goal"
        raw_cost = float(np.sum(costs))
        out.append(
            EpisodeStats(
                j_r=discounted_return(rewards, gamma),
                j_c=discounted_return(costs, gamma),
                undiscounted_cost=raw_cost,
                reached_goal=reached,
                touched_hazard=raw_cost > 0,
            )
        )
    return out
