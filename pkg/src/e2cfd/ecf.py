"""Candidate filtering: syntax gate, semantic lint, and review.

Every generated expression passes three stages before it may be
evaluated.  The syntax gate parses the text, checks feature names, and
probes the expression on a fixed set of feature maps.  The lint stage
samples points inside and outside the hazard regions and flags
expressions that pay the agent for standing in a hazard, plus a warning
for values large enough to destabilise training.  Review is pluggable:
automatic, interactive on a terminal, or parked on a queue for a remote
reviewer with a timeout fallback.

Candidate lifecycle::

    generated -> syntax_failed
              -> pending_review -> lint_failed
                                -> approved -> evaluated
                                -> rejected
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable, Literal, Protocol, Sequence

import numpy as np

from . import env as env_module
from .dsl import (
    DslError,
    Expr,
    ParseError,
    UnknownFeatureError,
    evaluate,
    parse,
    validate,
)

if TYPE_CHECKING:
    from .fpe import MetricsAggregate

SYNTAX_PROBE_COUNT = 16
SYNTAX_PROBE_SEED = 2024
LINT_PROBE_SEED = 7
MAGNITUDE_LIMIT = 1e4
REVIEW_TIMEOUT_S = 600.0

RULE_REWARDS_HAZARD = "rewards-hazard"
RULE_UNBOUNDED = "unbounded-magnitude"

Origin = Literal["llm", "seed", "weighted"]
Status = Literal[
    "generated",
    "syntax_failed",
    "pending_review",
    "lint_failed",
    "approved",
    "rejected",
    "evaluated",
]

_TRANSITIONS: dict[str, set[str]] = {
    "generated": {"syntax_failed", "pending_review"},
    "pending_review": {"lint_failed", "approved", "rejected"},
    "approved": {"evaluated"},
}


class AlreadyDecidedError(Exception):
    """A second verdict arrived for a candidate that already has one."""

    def __init__(self, decision: "ReviewDecision"):
        super().__init__(f"already decided: {decision.verdict}")
        self.decision = decision


@dataclass(frozen=True)
class LintFinding:
    rule: str
    severity: Literal["error", "warning"]
    message: str

    def as_dict(self) -> dict:
        return {"rule": self.rule, "severity": self.severity,
                "message": self.message}


@dataclass(frozen=True)
class ReviewDecision:
    verdict: Literal["approve", "reject"]
    note: str = ""
    source: str = "auto"

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "note": self.note,
                "source": self.source}


@dataclass
class CandidateRecord:
    """One candidate expression moving through the pipeline."""

    id: str
    source_text: str
    origin: Origin
    ast: Expr | None = None
    status: Status = "generated"
    failure_reason: str = ""
    lint_findings: tuple[LintFinding, ...] = ()
    decision: ReviewDecision | None = None
    fpe_metrics: "MetricsAggregate | None" = None
    fitness: float | None = None
    history: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.origin not in ("llm", "seed", "weighted"):
            raise ValueError(f"unknown origin {self.origin!r}")

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "source_text": self.source_text,
            "origin": self.origin,
            "status": self.status,
            "failure_reason": self.failure_reason,
            "lint_findings": [f.as_dict() for f in self.lint_findings],
            "decision": self.decision.as_dict() if self.decision else None,
            "fpe_metrics": self.fpe_metrics.as_dict() if self.fpe_metrics else None,
            "fitness": self.fitness,
            "history": [list(step) for step in self.history],
        }


def advance(record: CandidateRecord, new_status: Status) -> None:
    allowed = _TRANSITIONS.get(record.status, set())
    if new_status not in allowed:
        raise ValueError(
            f"illegal transition {record.status} -> {new_status} for {record.id}"
        )
    record.history.append((record.status, new_status))
    record.status = new_status


def probe_feature_maps(
    ranges: dict[str, tuple[float, float]],
    count: int = SYNTAX_PROBE_COUNT,
    seed: int = SYNTAX_PROBE_SEED,
) -> list[dict[str, float]]:
    """Deterministic probe set: the centroid of the feature ranges plus
    seeded corner patterns (each feature pinned to one end of its range).
    """
    names = list(ranges)
    maps = [{n: (lo + hi) / 2.0 for n, (lo, hi) in ranges.items()}]
    rng = np.random.default_rng(seed)
    for _ in range(count - 1):
        bits = rng.integers(0, 2, size=len(names))
        maps.append(
            {n: ranges[n][bit] for n, bit in zip(names, bits)}
        )
    return maps


def syntax_check(
    text: str, ranges: dict[str, tuple[float, float]]
) -> tuple[Expr | None, str]:
    """Parse, check feature names, probe for finite output.

    Returns (ast, "") on success or (None, reason) on failure.
    """
    try:
        ast = parse(text)
    except ParseError as exc:
        return None, f"parse error: {exc}"
    try:
        validate(ast, ranges.keys())
    except UnknownFeatureError as exc:
        return None, f"unknown feature: {exc}"
    for fmap in probe_feature_maps(ranges):
        try:
            value = evaluate(ast, fmap)
        except DslError as exc:
            return None, f"probe evaluation failed: {exc}"
        if not math.isfinite(value):
            return None, f"non-finite probe value {value!r}"
    return ast, ""


def _hazard_points(
    config: env_module.EnvConfig, probes: int, rng: np.random.Generator
) -> list[tuple[float, float]]:
    points = []
    for i in range(probes):
        (cx, cy), radius = config.hazards[i % len(config.hazards)]
        r = radius * math.sqrt(rng.uniform())
        angle = rng.uniform(0.0, 2.0 * math.pi)
        points.append((cx + r * math.cos(angle), cy + r * math.sin(angle)))
    return points


def _safe_points(
    config: env_module.EnvConfig, probes: int, rng: np.random.Generator
) -> list[tuple[float, float]]:
    he = config.arena_half_extent
    points: list[tuple[float, float]] = []
    while len(points) < probes:
        x = rng.uniform(-he, he)
        y = rng.uniform(-he, he)
        if env_module._dist_hazard_min(config, x, y) > 0.05:
            points.append((x, y))
    return points


def semantic_lint(
    ast: Expr,
    env_config: env_module.EnvConfig,
    probes: int = 32,
    seed: int = LINT_PROBE_SEED,
    margin: float = 0.0,
) -> tuple[LintFinding, ...]:
    """Sample the expression inside hazards and in the safe region.

    An expression whose mean value inside hazards exceeds the mean
    outside by more than ``margin`` is paying the agent to enter them;
    that is an error.  Values beyond MAGNITUDE_LIMIT anywhere draw a
    warning.
    """
    rng = np.random.default_rng(seed)
    findings: list[LintFinding] = []
    outside = [
        evaluate(ast, env_module.features_at(env_config, x, y))
        for x, y in _safe_points(env_config, probes, rng)
    ]
    inside: list[float] = []
    if env_config.hazards:
        inside = [
            evaluate(ast, env_module.features_at(env_config, x, y))
            for x, y in _hazard_points(env_config, probes, rng)
        ]
        mean_in = float(np.mean(inside))
        mean_out = float(np.mean(outside))
        if mean_in > mean_out + margin:
            findings.append(
                LintFinding(
                    RULE_REWARDS_HAZARD,
                    "error",
                    f"mean value inside hazards ({mean_in:.4g}) exceeds the "
                    f"safe-region mean ({mean_out:.4g}); the expression "
                    "rewards hazard entry",
                )
            )
    worst = max((abs(v) for v in inside + outside), default=0.0)
    if worst > MAGNITUDE_LIMIT:
        findings.append(
            LintFinding(
                RULE_UNBOUNDED,
                "warning",
                f"probe values reach magnitude {worst:.4g}, which can "
                "destabilise training",
            )
        )
    return tuple(findings)


def has_errors(findings: Iterable[LintFinding]) -> bool:
    return any(f.severity == "error" for f in findings)


class Reviewer(Protocol):
    def decide(self, record: CandidateRecord) -> ReviewDecision: ...


class AutoReviewer:
    """Approves exactly when the lint stage found no errors."""

    def decide(self, record: CandidateRecord) -> ReviewDecision:
        errors = [f for f in record.lint_findings if f.severity == "error"]
        if errors:
            return ReviewDecision(
                "reject", f"lint errors: {', '.join(f.rule for f in errors)}",
                source="auto",
            )
        return ReviewDecision("approve", "no lint errors", source="auto")


class InteractiveReviewer:
    """Prompts on the terminal.  Injection points exist for testing."""

    def __init__(
        self,
        input_fn: Callable[[str], str] = input,
        print_fn: Callable[[str], None] = print,
    ):
        self.input_fn = input_fn
        self.print_fn = print_fn

    def decide(self, record: CandidateRecord) -> ReviewDecision:
        self.print_fn(f"candidate {record.id} ({record.origin}):")
        self.print_fn(f"  {record.source_text}")
        for finding in record.lint_findings:
            self.print_fn(f"  [{finding.severity}] {finding.rule}: {finding.message}")
        while True:
            answer = self.input_fn("approve? [y/n] ").strip().lower()
            if answer in ("y", "yes"):
                return ReviewDecision("approve", "", source="interactive")
            if answer in ("n", "no"):
                note = self.input_fn("reason (optional): ").strip()
                return ReviewDecision("reject", note, source="interactive")
            self.print_fn("please answer y or n")


class ReviewQueue:
    """Thread-safe hand-off point between the orchestrator and the
    review service.  Submissions block in RemoteReviewer until a verdict
    arrives or the timeout fires.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._records: dict[str, CandidateRecord] = {}
        self._decisions: dict[str, ReviewDecision] = {}
        self._events: dict[str, threading.Event] = {}

    def submit(self, record: CandidateRecord) -> None:
        with self._lock:
            self._records[record.id] = record
            self._events.setdefault(record.id, threading.Event())

    def record(self, candidate_id: str) -> CandidateRecord:
        with self._lock:
            return self._records[candidate_id]

    def pending(self) -> list[CandidateRecord]:
        with self._lock:
            return [
                rec
                for cid, rec in self._records.items()
                if cid not in self._decisions
            ]

    def decision(self, candidate_id: str) -> ReviewDecision | None:
        with self._lock:
            return self._decisions.get(candidate_id)

    def decide(
        self,
        candidate_id: str,
        verdict: str,
        note: str = "",
        source: str = "remote",
    ) -> ReviewDecision:
        if verdict not in ("approve", "reject"):
            raise ValueError(f"verdict must be approve or reject, got {verdict!r}")
        with self._lock:
            if candidate_id not in self._records:
                raise KeyError(candidate_id)
            existing = self._decisions.get(candidate_id)
            if existing is not None:
                raise AlreadyDecidedError(existing)
            decision = ReviewDecision(verdict, note, source=source)
            self._decisions[candidate_id] = decision
            self._events[candidate_id].set()
            return decision

    def wait(self, candidate_id: str, timeout: float) -> ReviewDecision | None:
        with self._lock:
            event = self._events.setdefault(candidate_id, threading.Event())
        event.wait(timeout)
        return self.decision(candidate_id)


class RemoteReviewer:
    """Parks candidates on a queue and blocks for a remote verdict.

    When nothing arrives within the timeout the fallback reviewer (auto
    by default) decides, and that verdict is written back to the queue
    so a late remote decision gets a conflict instead of silently
    disagreeing.
    """

    def __init__(
        self,
        queue: ReviewQueue,
        timeout_s: float = REVIEW_TIMEOUT_S,
        fallback: Reviewer | None = None,
    ):
        self.queue = queue
        self.timeout_s = timeout_s
        self.fallback = fallback if fallback is not None else AutoReviewer()

    def decide(self, record: CandidateRecord) -> ReviewDecision:
        self.queue.submit(record)
        decision = self.queue.wait(record.id, self.timeout_s)
        if decision is not None:
            return decision
        fb = self.fallback.decide(record)
        fb = ReviewDecision(
            fb.verdict,
            f"review timed out after {self.timeout_s:g}s; {fb.note}".strip(),
            source="auto-fallback",
        )
        try:
            return self.queue.decide(record.id, fb.verdict, fb.note, fb.source)
        except AlreadyDecidedError as exc:
            # the remote verdict landed in the race window; honour it
            return exc.decision


def review(record: CandidateRecord, reviewer: Reviewer) -> ReviewDecision:
    if record.status != "pending_review":
        raise ValueError(f"{record.id} is {record.status}, not pending_review")
    decision = reviewer.decide(record)
    record.decision = decision
    advance(record, "approved" if decision.verdict == "approve" else "rejected")
    return decision


def process_candidate(
    record: CandidateRecord,
    env_config: env_module.EnvConfig,
    reviewer: Reviewer,
    lint_probes: int = 32,
    margin: float = 0.0,
) -> CandidateRecord:
    """Run one candidate through syntax gate, lint, and review."""
    ranges = env_module.feature_ranges(env_config)
    ast, reason = syntax_check(record.source_text, ranges)
    if ast is None:
        record.failure_reason = reason
        advance(record, "syntax_failed")
        return record
    record.ast = ast
    advance(record, "pending_review")
    record.lint_findings = semantic_lint(
        ast, env_config, probes=lint_probes, margin=margin
    )
    if has_errors(record.lint_findings):
        record.failure_reason = "; ".join(
            f.message for f in record.lint_findings if f.severity == "error"
        )
        advance(record, "lint_failed")
        return record
    review(record, reviewer)
    return record


def filter_candidates(
    records: Sequence[CandidateRecord],
    env_config: env_module.EnvConfig,
    reviewer: Reviewer,
    lint_probes: int = 32,
    margin: float = 0.0,
) -> list[CandidateRecord]:
    """The full gate over a population; returns the same records with
    their statuses settled.
    """
    for record in records:
        process_candidate(
            record, env_config, reviewer, lint_probes=lint_probes, margin=margin
        )
    return list(records)


def approved(records: Iterable[CandidateRecord]) -> list[CandidateRecord]:
    return [r for r in records if r.status == "approved"]
