"""Chat-completion client for candidate generation, plus a fixture mock.

The live client speaks the OpenAI-compatible chat API (POST
{base_url}/chat/completions, bearer auth).  The mock replays a directory
of numbered fixture files in order, which keeps every test that touches
generation fully deterministic.  Both expose ``complete(prompt) ->
text`` so callers never care which one they hold.
"""

from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .cmdp import SafetyRequirement
from .dsl import ParseError, UnknownFeatureError, parse, validate

ENV_BASE_URL = "E2CFD_LLM_BASE_URL"
ENV_API_KEY = "E2CFD_LLM_API_KEY"
ENV_MODEL = "E2CFD_LLM_MODEL"

GRAMMAR_SUMMARY = """\
Expressions are arithmetic over named features. Operators: + - * / with
usual precedence, parentheses, unary minus. Functions: abs(x), exp(x),
log(x), sqrt(x), tanh(x), step(x) (1 if x > 0 else 0), min(a, b),
max(a, b), clip(x, lo, hi), if(cond, then, else) where cond compares two
expressions with < <= > >= ==. Numbers are decimal literals. No loops,
no assignments, no other functions."""


class LlmError(Exception):
    """Base class for all generation-client failures."""


class EndpointUnavailableError(LlmError):
    """Transport failed and retries were exhausted."""


class LlmTimeoutError(LlmError):
    """A request ran past the configured timeout."""


class AuthError(LlmError):
    """The endpoint rejected the credentials."""


class ProtocolError(LlmError):
    """The endpoint answered with something that is not a chat response."""


class EmptyGenerationError(LlmError):
    """The model's reply contained no fenced code blocks."""


class MockExhaustedError(LlmError):
    """The fixture script ran out of responses."""


@dataclass(frozen=True)
class PromptBundle:
    """Everything the generation prompt is built from.

    The first three fields are the mandatory information categories:
    what the task is, what safety constraint must hold, and what the
    existing reward/cost functions look like.
    """

    task_description: str
    safety_requirement: str
    original_functions: str
    best_so_far: str | None = None
    feature_registry: tuple[str, ...] = ()
    grammar: str = GRAMMAR_SUMMARY

    def __post_init__(self) -> None:
        for name in ("task_description", "safety_requirement",
                     "original_functions"):
            if not getattr(self, name).strip():
                raise ValueError(f"prompt section {name} must be non-empty")


def render_safety(req: SafetyRequirement) -> str:
    if req.kind == "zero_violation":
        return "No episode may incur any cumulative cost (limit 0)."
    if req.kind == "almost_surely":
        return (
            f"At most a {req.epsilon:.0%} share of episodes may exceed a "
            f"discounted cumulative cost of {req.d}."
        )
    return (
        f"The expected discounted cumulative cost per episode must stay "
        f"at or below {req.d}."
    )


def render_prompt(bundle: PromptBundle) -> str:
    """Deterministic prompt text; a pure function of the bundle."""
    parts = [
        "You design per-step penalty expressions for a reinforcement "
        "learning agent.",
        "",
        "## Task",
        bundle.task_description,
        "",
        "## Safety requirement",
        bundle.safety_requirement,
        "",
        "## Current reward and cost functions",
        bundle.original_functions,
    ]
    if bundle.best_so_far:
        parts += ["", "## Best penalty found so far", bundle.best_so_far]
    if bundle.feature_registry:
        parts += [
            "",
            "## Available features",
            ", ".join(bundle.feature_registry),
        ]
    parts += [
        "",
        "## Expression language",
        bundle.grammar,
        "",
        "Reply ONLY with candidate expressions, each in its own fenced "
        "code block (```), no commentary.",
    ]
    return "\n".join(parts)


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str
    api_key: str = ""
    model: str = "gpt-4"
    temperature: float = 0.7
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_s: float = 1.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def from_env(cls, **overrides) -> "LlmEndpointConfig":
        values = dict(
            base_url=os.environ.get(ENV_BASE_URL, ""),
            api_key=os.environ.get(ENV_API_KEY, ""),
            model=os.environ.get(ENV_MODEL, "gpt-4"),
        )
        values.update(overrides)
        if not values["base_url"]:
            raise ValueError(f"{ENV_BASE_URL} is not set")
        return cls(**values)


class CompletionClient(Protocol):
    def complete(self, prompt: str) -> str: ...


class ChatEndpoint:
    """Live OpenAI-compatible endpoint.  Safe for concurrent use."""

    def __init__(self, config: LlmEndpointConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        return chat(prompt, self.config)


def chat(prompt: str, config: LlmEndpointConfig) -> str:
    """One chat completion, retried with exponential backoff on 429 and
    5xx responses.  Auth failures and malformed bodies do not retry.
    """
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    body = {
        "model": config.model,
        "temperature": config.temperature,
        "messages": [{"role": "user", "content": prompt}],
    }
    last_status = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(config.backoff_base_s * 2 ** (attempt - 1))
        try:
            response = requests.post(
                url, json=body, headers=headers, timeout=config.timeout_s
            )
        except requests.Timeout as exc:
            raise LlmTimeoutError(f"request to {url} timed out") from exc
        except requests.RequestException as exc:
            last_status = f"transport error: {exc}"
            continue
        if response.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credentials ({response.status_code})")
        if response.status_code == 429 or response.status_code >= 500:
            last_status = f"status {response.status_code}"
            continue
        if response.status_code != 200:
            raise ProtocolError(
                f"unexpected status {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(
                f"malformed chat response: {response.text[:200]}"
            ) from exc
    raise EndpointUnavailableError(
        f"gave up after {config.max_retries + 1} attempts ({last_status})"
    )


class MockScript:
    """Replays fixture files in filename order; thread-safe cursor."""

    def __init__(self, fixture_paths: Sequence):
        self.paths = list(fixture_paths)
        self.cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_dir(cls, directory: str | Path) -> "MockScript":
        directory = Path(directory)
        paths = sorted(
            (p for p in directory.iterdir() if p.is_file()),
            key=lambda p: p.name,
        )
        if not paths:
            raise ValueError(f"no fixture files in {directory}")
        return cls(paths)

    @classmethod
    def packaged(cls) -> "MockScript":
        """The fixture replies shipped with the package."""
        from importlib import resources

        root = resources.files("e2cfd").joinpath("data/fixtures")
        paths = sorted(
            (p for p in root.iterdir() if p.is_file()), key=lambda p: p.name
        )
        return cls(paths)

    def complete(self, prompt: str) -> str:
        with self._lock:
            if self.cursor >= len(self.paths):
                raise MockExhaustedError(
                    f"fixture script exhausted after {len(self.paths)} responses"
                )
            path = self.paths[self.cursor]
            self.cursor += 1
        return path.read_text()


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_blocks(text: str) -> list[str]:
    """Every fenced code block in a reply, stripped."""
    return [m.group(1).strip() for m in _FENCE_RE.finditer(text)]


def generate_candidates(
    bundle: PromptBundle, k: int, client: CompletionClient
) -> list[str]:
    """Up to k candidate texts from one completion; the caller pads from
    the seed library when the model under-delivers.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    reply = client.complete(render_prompt(bundle))
    blocks = extract_blocks(reply)
    if not blocks:
        raise EmptyGenerationError("reply contained no fenced code blocks")
    return blocks[:k]


def generate_score_expr(
    bundle: PromptBundle,
    client: CompletionClient,
    registry: Sequence[str],
    fallback: str,
) -> tuple[str, bool]:
    """One scoring-expression candidate; falls back to the supplied
    built-in when the reply does not validate against the score
    registry.  Returns (expression text, fell_back).
    """
    try:
        reply = client.complete(render_prompt(bundle))
        blocks = extract_blocks(reply)
    except LlmError:
        return fallback, True
    for block in blocks:
        try:
            validate(parse(block), registry)
            return block, False
        except (ParseError, UnknownFeatureError):
            continue
    return fallback, True
