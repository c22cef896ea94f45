"""The evolution loop: generate, filter, evaluate, recombine.

Each iteration builds a population of candidate penalty expressions
(seed library plus generated ones), pushes them through the filter
pipeline, trains each survivor briefly to get a fitness score, then
combines the survivors into one expression weighted by normalized
fitness.  That combination gets the longer evaluation run, and the best
combination seen so far is fed back into the next generation prompt.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Sequence

from . import env as env_module
from .cmdp import SafetyRequirement
from .dsl import LimitError, UnknownFeatureError, parse, pretty, validate, weighted_sum
from .ecf import (
    AutoReviewer,
    CandidateRecord,
    ReviewDecision,
    Reviewer,
    advance,
    approved,
    filter_candidates,
)
from .env import EnvConfig
from .fpe import (
    BUILTIN_SCORE_TEXT,
    SCORE_FEATURES,
    EvalPhase,
    MetricsAggregate,
    evaluate_candidate,
)
from .llm import (
    CompletionClient,
    LlmError,
    PromptBundle,
    generate_candidates,
    generate_score_expr,
    render_safety,
)
from .nets import write_policy_checkpoint
from .ppo import PpoConfig
from .rundir import RunDir

logger = logging.getLogger(__name__)

TASK_DESCRIPTION = (
    "A velocity-controlled point robot must reach a goal circle inside a "
    "square arena that contains circular hazard regions. Observations "
    "expose position, velocity, goal-relative features, hazard distance, "
    "and a hazard-occupancy flag."
)

SCORE_TASK_DESCRIPTION = (
    "Write one scalar scoring expression that ranks trained policies. "
    "Higher must mean better. It sees aggregate evaluation metrics: "
    "avg_return, avg_cost, tcr (target completion rate), her (hazard "
    "entry rate), the cost limit d, and a large penalty constant n."
)


class NoViableCandidateError(Exception):
    """Every iteration ended without an evaluated combination."""


def default_seed_library() -> tuple[str, ...]:
    """The hand-written penalty expressions shipped with the package."""
    from importlib import resources

    root = resources.files("e2cfd").joinpath("data/seeds")
    entries = sorted(
        (p for p in root.iterdir() if p.name.endswith(".cost")),
        key=lambda p: p.name,
    )
    return tuple(p.read_text().strip() for p in entries)


@dataclass(frozen=True)
class EvolutionConfig:
    iterations: int = 2
    population: int = 4
    early_epochs: int = 5
    late_epochs: int = 20
    eval_episodes: int = 20
    penalty_n: float = 1e6
    lint_probes: int = 32
    lint_margin: float = 0.0
    score_expr_text: str = BUILTIN_SCORE_TEXT
    llm_score_expr: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if not 0 < self.early_epochs < self.late_epochs:
            raise ValueError("need 0 < early_epochs < late_epochs")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.penalty_n <= 0:
            raise ValueError("penalty_n must be positive")


@dataclass
class BestRecord:
    candidate_id: str
    source_text: str
    fitness: float
    iteration: int
    metrics: MetricsAggregate | None

    def as_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "source_text": self.source_text,
            "fitness": self.fitness,
            "iteration": self.iteration,
            "metrics": self.metrics.as_dict() if self.metrics else None,
        }


@dataclass
class EvolveResult:
    best: BestRecord
    iterations: list[dict]
    score_expr_text: str
    wall_clock_s: float
    run_path: str


def normalize_scores(scores: Sequence[float]) -> list[float]:
    """Shift scores so the minimum sits at zero, then scale to sum one.

    A population with no spread (all scores equal) gets uniform weights.
    """
    if len(scores) == 0:
        raise ValueError("cannot normalize an empty score list")
    lo = min(scores)
    shifted = [s - lo for s in scores]
    total = sum(shifted)
    if total <= 0.0:
        return [1.0 / len(scores)] * len(scores)
    return [s / total for s in shifted]


def candidate_seed(base: int, iteration: int, index: int) -> int:
    """Stable, collision-free per-candidate training seed."""
    return base + 1009 * iteration + 31 * index


def make_prompt_bundle(
    env_config: EnvConfig,
    safety: SafetyRequirement,
    best_so_far: str | None = None,
) -> PromptBundle:
    original = (
        "reward: per-step decrease in goal distance scaled by "
        f"{env_config.progress_coefficient} plus a bonus of "
        f"{env_config.goal_bonus} on reaching the goal; "
        "cost: 1 for every step spent inside any hazard circle."
    )
    return PromptBundle(
        task_description=TASK_DESCRIPTION,
        safety_requirement=render_safety(safety),
        original_functions=original,
        best_so_far=best_so_far,
        feature_registry=tuple(env_module.FEATURES),
    )


def _score_prompt_bundle(safety: SafetyRequirement) -> PromptBundle:
    return PromptBundle(
        task_description=SCORE_TASK_DESCRIPTION,
        safety_requirement=render_safety(safety),
        original_functions=(
            "the default ranking returns avg_return unless avg_cost "
            "exceeds d, in which case it returns -n"
        ),
        feature_registry=SCORE_FEATURES,
    )


def _population_texts(
    iteration: int,
    evo: EvolutionConfig,
    seed_library: Sequence[str],
    client: CompletionClient | None,
    best: BestRecord | None,
    env_config: EnvConfig,
    safety: SafetyRequirement,
    run_dir: RunDir,
) -> list[tuple[str, str]]:
    """(text, origin) pairs for one iteration, at most ``population``.

    The first iteration starts from the seed library and lets the
    generator fill the remaining slots; later iterations are generated
    around the best combination so far, padding from the seeds when the
    model under-delivers.
    """
    k = evo.population
    picks: list[tuple[str, str]] = []
    if iteration == 0:
        picks = [(text, "seed") for text in seed_library[:k]]
    generated: list[str] = []
    if client is not None and len(picks) < k:
        bundle = make_prompt_bundle(
            env_config, safety, best.source_text if best else None
        )
        try:
            generated = generate_candidates(bundle, k - len(picks), client)
        except LlmError as exc:
            run_dir.audit(
                "generation-failed", iteration=iteration, reason=str(exc)
            )
    picks += [(text, "llm") for text in generated]
    if client is not None and len(picks) < k and seed_library:
        # pad by cycling the seed library
        i = 0
        while len(picks) < k:
            picks.append((seed_library[i % len(seed_library)], "seed"))
            i += 1
    if client is None and iteration > 0:
        picks = [(text, "seed") for text in seed_library[:k]]
    return picks[:k]


def _audit_transitions(run_dir: RunDir, record: CandidateRecord, seen: dict) -> None:
    start = seen.get(record.id, 0)
    for old, new in record.history[start:]:
        run_dir.audit(
            "transition", candidate=record.id, from_status=old, to_status=new
        )
    seen[record.id] = len(record.history)


def _metrics_row(iteration: int, record: CandidateRecord, phase: EvalPhase) -> dict:
    m = record.fpe_metrics
    return {
        "iteration": iteration,
        "candidate_id": record.id,
        "origin": record.origin,
        "phase": phase.label,
        "epochs": phase.epochs,
        "avg_return": m.avg_return if m else "",
        "avg_cost": m.avg_cost if m else "",
        "tcr": m.tcr if m else "",
        "her": m.her if m else "",
        "fitness": record.fitness,
        "wall_clock_s": m.wall_clock_s if m else "",
    }


def _resolve_score_expr(
    evo: EvolutionConfig,
    safety: SafetyRequirement,
    client: CompletionClient | None,
    run_dir: RunDir,
) -> tuple:
    text = evo.score_expr_text
    if evo.llm_score_expr and client is not None:
        text, fell_back = generate_score_expr(
            _score_prompt_bundle(safety), client, SCORE_FEATURES,
            evo.score_expr_text,
        )
        if fell_back:
            run_dir.audit("score-expr-fallback", fallback=text)
        else:
            run_dir.audit("score-expr-generated", text=text)
    expr = parse(text)
    try:
        validate(expr, SCORE_FEATURES)
    except UnknownFeatureError as exc:
        raise ValueError(f"score expression uses unknown metric: {exc}") from exc
    return expr, text


def evolve(
    env_config: EnvConfig,
    ppo_config: PpoConfig,
    evo: EvolutionConfig,
    safety: SafetyRequirement,
    run_dir: RunDir,
    seed_library: Sequence[str] = (),
    client: CompletionClient | None = None,
    reviewer: Reviewer | None = None,
    config_echo: dict | None = None,
) -> EvolveResult:
    if reviewer is None:
        reviewer = AutoReviewer()
    if client is None and not seed_library:
        raise ValueError("need a generator client or a non-empty seed library")
    run_dir.ensure()
    start = time.perf_counter()
    score_expr, score_text = _resolve_score_expr(evo, safety, client, run_dir)
    info: dict = {
        "run_id": run_dir.run_id,
        "created_at": time.time(),
        "status": "running",
        "config": config_echo or {},
        "score_expr": score_text,
        "iterations": [],
        "best": None,
    }
    run_dir.write_run_info(info)
    run_dir.audit("run-started", run_id=run_dir.run_id, seed=evo.seed)

    early = EvalPhase("early", evo.early_epochs, evo.eval_episodes)
    late = EvalPhase("late", evo.late_epochs, evo.eval_episodes)
    best: BestRecord | None = None
    seen_transitions: dict = {}
    summaries: list[dict] = []

    for i in range(evo.iterations):
        picks = _population_texts(
            i, evo, seed_library, client, best, env_config, safety, run_dir
        )
        if not picks:
            run_dir.audit("iteration-skipped", iteration=i, reason="no candidates")
            summaries.append({"iteration": i, "skipped": True,
                              "reason": "no candidates", "candidates": []})
            continue
        records = [
            CandidateRecord(f"i{i:02d}-c{j:02d}", text, origin)
            for j, (text, origin) in enumerate(picks)
        ]
        for rec in records:
            run_dir.audit(
                "candidate-created", candidate=rec.id, origin=rec.origin,
                iteration=i,
            )
        logger.info(
            "iteration %d: %d candidates (%s)",
            i, len(records),
            ", ".join(f"{r.id}:{r.origin}" for r in records),
        )
        filter_candidates(
            records, env_config, reviewer,
            lint_probes=evo.lint_probes, margin=evo.lint_margin,
        )
        for rec in records:
            _audit_transitions(run_dir, rec, seen_transitions)
            run_dir.save_candidate(rec)
        survivors = approved(records)
        logger.info(
            "iteration %d: %d/%d approved", i, len(survivors), len(records)
        )
        if not survivors:
            run_dir.audit("iteration-skipped", iteration=i,
                          reason="no candidate survived the filter")
            summaries.append({
                "iteration": i, "skipped": True,
                "reason": "no candidate survived the filter",
                "candidates": [{"id": r.id, "status": r.status} for r in records],
            })
            info["iterations"] = summaries
            run_dir.write_run_info(info)
            continue

        for j, rec in enumerate(records):
            if rec.status != "approved":
                continue
            result = evaluate_candidate(
                rec, early, env_config, ppo_config,
                seed=candidate_seed(evo.seed, i, j),
                score_expr=score_expr, d=safety.threshold, n=evo.penalty_n,
            )
            _audit_transitions(run_dir, rec, seen_transitions)
            run_dir.save_candidate(rec)
            run_dir.append_metrics_row(_metrics_row(i, rec, early))
            if result is not None:
                run_dir.save_curve(rec.id, result.report)

        scores = [rec.fitness for rec in survivors]
        weights = normalize_scores(scores)
        run_dir.audit(
            "weights", iteration=i,
            weights={rec.id: w for rec, w in zip(survivors, weights)},
        )
        try:
            combined = weighted_sum([rec.ast for rec in survivors], weights)
        except LimitError:
            top = max(survivors, key=lambda r: r.fitness)
            run_dir.audit(
                "combination-too-large", iteration=i, fallback=top.id
            )
            combined = top.ast
        wrec = CandidateRecord(
            f"i{i:02d}-weighted", pretty(combined), "weighted", ast=combined
        )
        # a weighted sum of approved penalties needs no second review
        advance(wrec, "pending_review")
        advance(wrec, "approved")
        wrec.decision = ReviewDecision(
            "approve", "combination of approved candidates", source="auto"
        )
        result = evaluate_candidate(
            wrec, late, env_config, ppo_config,
            seed=candidate_seed(evo.seed, i, 9973),
            score_expr=score_expr, d=safety.threshold, n=evo.penalty_n,
        )
        _audit_transitions(run_dir, wrec, seen_transitions)
        run_dir.save_candidate(wrec)
        run_dir.append_metrics_row(_metrics_row(i, wrec, late))
        if result is not None:
            run_dir.save_curve(wrec.id, result.report)

        if result is not None and (best is None or wrec.fitness > best.fitness):
            best = BestRecord(
                wrec.id, wrec.source_text, wrec.fitness, i, wrec.fpe_metrics
            )
            run_dir.save_best(best.as_dict(), best.source_text)
            write_policy_checkpoint(
                run_dir.path / "best_policy.ckpt", result.policy
            )
            run_dir.audit(
                "best-updated", candidate=wrec.id, fitness=wrec.fitness,
                iteration=i,
            )
            logger.info(
                "iteration %d: new best %s fitness %.4f",
                i, wrec.id, wrec.fitness,
            )
        summaries.append({
            "iteration": i,
            "skipped": False,
            "candidates": [
                {"id": r.id, "status": r.status, "fitness": r.fitness}
                for r in records
            ],
            "weighted": {"id": wrec.id, "status": wrec.status,
                         "fitness": wrec.fitness},
            "best_fitness": best.fitness if best else None,
        })
        info["iterations"] = summaries
        info["best"] = best.as_dict() if best else None
        run_dir.write_run_info(info)

    wall = time.perf_counter() - start
    if best is None:
        info["status"] = "failed"
        info["wall_clock_s"] = wall
        run_dir.write_run_info(info)
        run_dir.audit("run-failed", reason="no viable candidate")
        raise NoViableCandidateError(
            "no iteration produced an evaluated combination"
        )
    info["status"] = "finished"
    info["wall_clock_s"] = wall
    run_dir.write_run_info(info)
    run_dir.audit("run-finished", best=best.candidate_id, fitness=best.fitness)
    return EvolveResult(best, summaries, score_text, wall, str(run_dir.path))
