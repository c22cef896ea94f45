"""Run configuration: one JSON file drives every subcommand.

The file is strict: a `schema_version` field is required and unknown
keys anywhere are errors, so a typo like "populaton" fails loudly
instead of silently running with defaults.  All validation problems are
collected into one ConfigError so the user sees the full list at once.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .cmdp import SafetyRequirement
from .env import EnvConfig
from .evolution import EvolutionConfig
from .ppo import PpoConfig

SCHEMA_VERSION = 1

LLM_MODES = ("off", "mock", "live")
REVIEW_MODES = ("auto", "interactive", "remote")


class ConfigError(Exception):
    """Carries every schema problem found in one pass."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

    def render(self) -> str:
        lines = ["invalid configuration:"]
        lines += [f"  - {p}" for p in self.problems]
        return "\n".join(lines)


@dataclass(frozen=True)
class LlmSection:
    mode: str = "off"
    fixtures_dir: str | None = None
    base_url: str = ""
    model: str = "gpt-4"
    temperature: float = 0.7
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_s: float = 1.0
    score_expr_from_llm: bool = False

    def __post_init__(self) -> None:
        if self.mode not in LLM_MODES:
            raise ValueError(f"llm.mode must be one of {LLM_MODES}")


@dataclass(frozen=True)
class ReviewSection:
    mode: str = "auto"
    timeout_s: float = 600.0
    addr: str = "127.0.0.1:8337"

    def __post_init__(self) -> None:
        if self.mode not in REVIEW_MODES:
            raise ValueError(f"review.mode must be one of {REVIEW_MODES}")
        if self.timeout_s <= 0:
            raise ValueError("review.timeout_s must be positive")


@dataclass(frozen=True)
class OutputSection:
    dir: str = "runs"
    run_id: str | None = None


@dataclass(frozen=True)
class RunConfig:
    schema_version: int
    env: EnvConfig
    ppo: PpoConfig
    evolution: EvolutionConfig
    llm: LlmSection
    safety: SafetyRequirement
    output: OutputSection
    review: ReviewSection
    seed_library: tuple[str, ...] | None = None

    def as_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "env": _section_dict(self.env),
            "ppo": _section_dict(self.ppo),
            "evolution": _section_dict(self.evolution),
            "llm": _section_dict(self.llm),
            "safety": _section_dict(self.safety),
            "output": _section_dict(self.output),
            "review": _section_dict(self.review),
            "seed_library": (
                list(self.seed_library) if self.seed_library is not None else None
            ),
        }


def _section_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, tuple):
            value = _tuples_to_lists(value)
        out[f.name] = value
    return out


def _tuples_to_lists(value):
    if isinstance(value, tuple):
        return [_tuples_to_lists(v) for v in value]
    return value


def _lists_to_tuples(value):
    if isinstance(value, list):
        return tuple(_lists_to_tuples(v) for v in value)
    return value


_SECTION_TYPES = {
    "env": EnvConfig,
    "ppo": PpoConfig,
    "evolution": EvolutionConfig,
    "llm": LlmSection,
    "safety": SafetyRequirement,
    "output": OutputSection,
    "review": ReviewSection,
}

# tuple-typed fields arrive from JSON as lists
_TUPLE_FIELDS = {"goal_center", "hazards"}


def _build_section(name: str, cls, data: dict, problems: list[str]):
    if not isinstance(data, dict):
        problems.append(f"section {name!r} must be an object")
        return None
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    for key in unknown:
        problems.append(
            f"unknown key '{name}.{key}' (known: {', '.join(sorted(known))})"
        )
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            continue
        if key in _TUPLE_FIELDS:
            value = _lists_to_tuples(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"section {name!r}: {exc}")
        return None


def parse_config(data: dict) -> RunConfig:
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a JSON object"])
    version = data.get("schema_version")
    if version is None:
        problems.append("missing required key 'schema_version'")
    elif version != SCHEMA_VERSION:
        problems.append(
            f"unsupported schema_version {version!r} (this build reads "
            f"{SCHEMA_VERSION})"
        )
    known_top = set(_SECTION_TYPES) | {"schema_version", "seed_library"}
    for key in sorted(set(data) - known_top):
        problems.append(f"unknown top-level key {key!r}")

    sections = {}
    for name, cls in _SECTION_TYPES.items():
        sections[name] = _build_section(name, cls, data.get(name, {}), problems)

    seed_library = data.get("seed_library")
    if seed_library is not None:
        if not isinstance(seed_library, list) or not all(
            isinstance(s, str) for s in seed_library
        ):
            problems.append("seed_library must be a list of strings")
            seed_library = None
        else:
            seed_library = tuple(seed_library)

    if problems:
        raise ConfigError(problems)
    return RunConfig(
        schema_version=SCHEMA_VERSION,
        seed_library=seed_library,
        **sections,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path} is not valid JSON: {exc}"]) from exc
    return parse_config(data)


def default_config() -> RunConfig:
    return RunConfig(
        schema_version=SCHEMA_VERSION,
        env=EnvConfig(),
        ppo=PpoConfig(),
        evolution=EvolutionConfig(),
        llm=LlmSection(),
        safety=SafetyRequirement(),
        output=OutputSection(),
        review=ReviewSection(),
    )


def dump_config(config: RunConfig) -> str:
    return json.dumps(config.as_dict(), indent=2) + "\n"
