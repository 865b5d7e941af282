"""LLM-as-judge QE metrics: direct assessment and error-annotation prompting.

Two judge families are implemented over a plain chat backend:

* gemba_da           - ask for a 0-100 quality score, parse the number
* eaprompt           - ask for an itemized error list with severities, score
                       as -(minor + 8 * major)
* eaprompt_critical  - same, with a critical severity weighted at 100

Direct-assessment replies sometimes fail to contain a usable number; scoring
retries with a non-decreasing temperature schedule and discards the candidate
after the final attempt. Transport failures are retried separately with
exponential backoff and never consume parse attempts.

Prompt templates are versioned data files shipped with the package.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib.resources import files
from typing import Callable, Protocol

from .errors import (
    BackendUnreachable,
    EmptyInput,
    InvalidConfig,
    MissingExample,
    ParseFailure,
)
from .lang import language_name
from .strategies import DocScore

__all__ = [
    "MetricKind",
    "JudgeConfig",
    "ParsedDA",
    "ParsedErrors",
    "InContextExample",
    "ChatBackend",
    "build_gemba_prompt",
    "build_eaprompt",
    "load_example",
    "parse_da",
    "parse_errors",
    "ea_score",
    "score_with_retries",
]

DEFAULT_TEMPERATURE_SCHEDULE = (0.0, 0.25, 0.5, 0.75, 1.0)

# A standalone integer: not part of a word, a larger number, or a decimal.
_STANDALONE_INT_RE = re.compile(r"(?<![\w.])(\d+)(?!\.?\d)")
_LABELED_SCORE_RE = re.compile(r"\bscore\b\s*[:=]?\s*(\d+)", re.IGNORECASE)
# One itemized error per line: optional bullet, severity word, colon.
_ERROR_LINE_RE = re.compile(
    r"^\s*(?:[-*•]\s*)?(critical|major|minor)\s*[:：]", re.IGNORECASE
)

_MINOR_WEIGHT = 1
_MAJOR_WEIGHT = 8
_CRITICAL_WEIGHT = 100

# Number-only replies need almost no room; itemized error lists need plenty.
_DEFAULT_OUTPUT_TOKENS = {"gemba_da": 16, "eaprompt": 512, "eaprompt_critical": 512}


class MetricKind:
    GEMBA_DA = "gemba_da"
    EAPROMPT = "eaprompt"
    EAPROMPT_CRITICAL = "eaprompt_critical"

    ALL = (GEMBA_DA, EAPROMPT, EAPROMPT_CRITICAL)


class ChatBackend(Protocol):
    def complete(self, prompt: str, temperature: float, max_output_tokens: int) -> str:
        """Return the model's reply text for one prompt."""
        ...


@dataclass(frozen=True, slots=True)
class JudgeConfig:
    """Retry and decoding policy for one judge metric."""

    metric_kind: str
    max_attempts: int = 5
    temperature_schedule: tuple[float, ...] = DEFAULT_TEMPERATURE_SCHEDULE
    max_output_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.metric_kind not in MetricKind.ALL:
            raise InvalidConfig(f"unknown metric kind {self.metric_kind!r}")
        if self.max_attempts < 1:
            raise InvalidConfig("max_attempts must be >= 1")
        if len(self.temperature_schedule) != self.max_attempts:
            raise InvalidConfig(
                f"temperature schedule has {len(self.temperature_schedule)} entries "
                f"for {self.max_attempts} attempts"
            )
        if any(t < 0 for t in self.temperature_schedule):
            raise InvalidConfig("temperatures must be >= 0")
        if any(
            b < a
            for a, b in zip(self.temperature_schedule, self.temperature_schedule[1:])
        ):
            raise InvalidConfig("temperature schedule must be non-decreasing")
        if self.max_output_tokens is not None and self.max_output_tokens < 1:
            raise InvalidConfig("max_output_tokens must be >= 1")

    @property
    def resolved_max_output_tokens(self) -> int:
        if self.max_output_tokens is not None:
            return self.max_output_tokens
        return _DEFAULT_OUTPUT_TOKENS[self.metric_kind]


@dataclass(frozen=True, slots=True)
class ParsedDA:
    """A direct-assessment score extracted from a reply."""

    score: int

    def __post_init__(self) -> None:
        if not 0 <= self.score <= 100:
            raise ValueError(f"DA score out of range: {self.score}")


@dataclass(frozen=True, slots=True)
class ParsedErrors:
    """Severity counts extracted from an itemized error list."""

    minor: int = 0
    major: int = 0
    critical: int = 0

    def __post_init__(self) -> None:
        if min(self.minor, self.major, self.critical) < 0:
            raise ValueError("error counts must be >= 0")


@dataclass(frozen=True, slots=True)
class InContextExample:
    """A worked annotation example embedded in error-annotation prompts."""

    src_lang: str
    tgt_lang: str
    source: str
    translation: str
    error_lines: tuple[str, ...]


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return files("docqe.prompts").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def _examples() -> tuple[InContextExample, ...]:
    raw = json.loads(_template("eaprompt_examples.json"))
    return tuple(
        InContextExample(
            src_lang=entry["src_lang"],
            tgt_lang=entry["tgt_lang"],
            source=entry["source"],
            translation=entry["translation"],
            error_lines=tuple(entry["errors"]),
        )
        for entry in raw
    )


def load_example(src_lang: str, tgt_lang: str) -> InContextExample:
    """Find the shipped in-context example for a language pair."""
    for example in _examples():
        if example.src_lang == src_lang and example.tgt_lang == tgt_lang:
            return example
    raise MissingExample(f"no in-context example for {src_lang}->{tgt_lang}")


def build_gemba_prompt(
    src_text: str, cand_text: str, src_lang: str, tgt_lang: str
) -> str:
    """Fill the direct-assessment template for one document pair."""
    if not src_text.strip():
        raise EmptyInput("source text is empty")
    if not cand_text.strip():
        raise EmptyInput("candidate text is empty")
    return _template("gemba_da.txt").format(
        src_lang=language_name(src_lang),
        tgt_lang=language_name(tgt_lang),
        src_text=src_text,
        tgt_text=cand_text,
    )


def build_eaprompt(
    src_text: str,
    cand_text: str,
    example: InContextExample,
    *,
    critical_enabled: bool = False,
) -> str:
    """Fill the error-annotation template with a worked example."""
    if not src_text.strip():
        raise EmptyInput("source text is empty")
    if not cand_text.strip():
        raise EmptyInput("candidate text is empty")
    severity_lines = "- major: <description>\n- minor: <description>"
    if critical_enabled:
        severity_lines = "- critical: <description>\n" + severity_lines
    return _template("eaprompt.txt").format(
        src_lang=language_name(example.src_lang),
        tgt_lang=language_name(example.tgt_lang),
        severity_lines=severity_lines,
        example_source=example.source,
        example_translation=example.translation,
        example_errors="\n".join(example.error_lines),
        src_text=src_text,
        tgt_text=cand_text,
    )


def parse_da(reply: str) -> ParsedDA:
    """Extract a 0-100 score from a direct-assessment reply.

    Labeled scores ("score: 87") take precedence; multiple conflicting labels
    fail. Otherwise the first standalone integer is used. Anything out of
    range, decimal-only, or absent raises ParseFailure.
    """
    labeled = [int(m.group(1)) for m in _LABELED_SCORE_RE.finditer(reply)]
    if labeled:
        if len(set(labeled)) > 1:
            raise ParseFailure(f"conflicting labeled scores {sorted(set(labeled))}")
        value = labeled[0]
    else:
        match = _STANDALONE_INT_RE.search(reply)
        if match is None:
            raise ParseFailure("no standalone integer in reply")
        value = int(match.group(1))
    if not 0 <= value <= 100:
        raise ParseFailure(f"score {value} outside [0, 100]")
    return ParsedDA(score=value)


def parse_errors(reply: str, *, critical_enabled: bool = False) -> ParsedErrors:
    """Count itemized errors by severity; lenient, never fails.

    Only line-anchored severity markers count; conversational mentions of
    severity words inside a line do not. Critical markers are ignored unless
    the critical severity was part of the instructed format.
    """
    counts = {"minor": 0, "major": 0, "critical": 0}
    for line in reply.splitlines():
        match = _ERROR_LINE_RE.match(line)
        if match:
            counts[match.group(1).lower()] += 1
    if not critical_enabled:
        counts["critical"] = 0
    return ParsedErrors(**counts)


def ea_score(errors: ParsedErrors, *, critical_enabled: bool = False) -> float:
    """Negative weighted error count: minor x1, major x8, critical x100."""
    penalty = _MINOR_WEIGHT * errors.minor + _MAJOR_WEIGHT * errors.major
    if critical_enabled:
        penalty += _CRITICAL_WEIGHT * errors.critical
    return float(-penalty)


def _parse_reply(reply: str, metric_kind: str) -> float:
    if metric_kind == MetricKind.GEMBA_DA:
        return float(parse_da(reply).score)
    critical = metric_kind == MetricKind.EAPROMPT_CRITICAL
    return ea_score(
        parse_errors(reply, critical_enabled=critical), critical_enabled=critical
    )


def _complete_with_transport_retries(
    backend: ChatBackend,
    prompt: str,
    temperature: float,
    max_output_tokens: int,
    transport_retries: int,
    backoff_base: float,
    sleep: Callable[[float], None],
) -> str:
    for attempt in range(transport_retries + 1):
        try:
            return backend.complete(prompt, temperature, max_output_tokens)
        except BackendUnreachable:
            if attempt == transport_retries:
                raise
            sleep(backoff_base * (2**attempt))
    raise AssertionError("unreachable")


def score_with_retries(
    backend: ChatBackend,
    prompt: str,
    cfg: JudgeConfig,
    rng_seed: int = 0,
    *,
    metric_id: str | None = None,
    transport_retries: int = 3,
    backoff_base: float = 0.1,
    sleep: Callable[[float], None] = time.sleep,
) -> DocScore:
    """Judge one prompt, retrying unparseable replies up to the schedule.

    Attempt i runs at temperature_schedule[i]; the first parseable reply wins
    with status "ok". When every attempt fails to parse, the result is
    status "discarded" with no value. Deterministic given a deterministic
    backend; rng_seed is recorded for provenance.
    """
    temperatures_used: list[float] = []
    last_reply: str | None = None
    for attempt, temperature in enumerate(cfg.temperature_schedule, start=1):
        reply = _complete_with_transport_retries(
            backend,
            prompt,
            temperature,
            cfg.resolved_max_output_tokens,
            transport_retries,
            backoff_base,
            sleep,
        )
        temperatures_used.append(temperature)
        last_reply = reply
        try:
            value = _parse_reply(reply, cfg.metric_kind)
        except ParseFailure as exc:
            diagnostics_failure = str(exc)
            continue
        return DocScore(
            metric_id=metric_id or cfg.metric_kind,
            status="ok",
            value=value,
            request_count=attempt,
            diagnostics={
                "attempts": attempt,
                "temperatures": tuple(temperatures_used),
                "raw_reply": reply,
                "rng_seed": rng_seed,
            },
        )
    return DocScore(
        metric_id=metric_id or cfg.metric_kind,
        status="discarded",
        value=None,
        request_count=cfg.max_attempts,
        diagnostics={
            "attempts": cfg.max_attempts,
            "temperatures": tuple(temperatures_used),
            "raw_reply": last_reply,
            "last_error": diagnostics_failure,
            "rng_seed": rng_seed,
        },
    )
