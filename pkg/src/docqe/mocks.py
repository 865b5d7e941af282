"""Deterministic in-process mock backends.

Every mock derives its behavior from sha256 hashes of its inputs, so runs are
reproducible across processes and machines. Latency is simulated, never
slept: mocks report a configured elapsed_s in their responses and the clients
prefer the reported value, which keeps timing columns byte-identical across
reruns.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .clients import (
    GeneratedCandidate,
    ScoreResult,
    Strategy,
    TranslationResult,
)
from .errors import BackendUnreachable
from .lang import approx_token_count

__all__ = [
    "stable_unit_score",
    "stable_int",
    "MockTranslator",
    "MockScorer",
    "MockChat",
]


def _digest(parts: Sequence[str]) -> bytes:
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()


def stable_unit_score(*parts: str) -> float:
    """Hash-derived float in [0, 1), stable across processes."""
    return int.from_bytes(_digest(parts)[:8], "big") / 2**64


def stable_int(upper: int, *parts: str) -> int:
    """Hash-derived integer in [0, upper], stable across processes."""
    return int.from_bytes(_digest(parts)[:8], "big") % (upper + 1)


@dataclass
class MockTranslator:
    """Echo-style generator: candidate i is the source plus a stable marker.

    fail_times makes the first calls raise BackendUnreachable (for retry
    tests); short_by returns fewer candidates than requested (partial pools);
    latency_per_candidate is reported, not slept.
    """

    name: str = "mock-translator"
    seed: int = 0
    latency_per_candidate: float = 0.0
    fail_times: int = 0
    short_by: int = 0
    supported_strategies: frozenset = frozenset(Strategy.ALL)
    calls: list = field(default_factory=list)

    def translate(
        self,
        source_text: str,
        source_lang: str,
        target_lang: str,
        decoding: dict,
        max_tokens: int,
    ) -> TranslationResult:
        self.calls.append(
            {
                "source_text": source_text,
                "target_lang": target_lang,
                "decoding": dict(decoding),
                "max_tokens": max_tokens,
            }
        )
        if self.fail_times > 0:
            self.fail_times -= 1
            raise BackendUnreachable("mock translator outage", endpoint=self.name)
        requested = decoding["n"]
        count = max(0, requested - self.short_by)
        candidates = []
        for i in range(count):
            marker = _digest([self.name, str(self.seed), source_text, str(i)]).hex()[:8]
            text = f"{source_text} ⟦{target_lang}:{marker}⟧"
            finish_reason = "stop"
            if approx_token_count(text, target_lang) > max_tokens:
                words = text.split()
                text = " ".join(words[: max(1, int(max_tokens / 1.3))])
                finish_reason = "length"
            candidates.append(GeneratedCandidate(text=text, finish_reason=finish_reason))
        return TranslationResult(
            candidates=tuple(candidates),
            elapsed_s=self.latency_per_candidate * count,
        )


@dataclass
class MockScorer:
    """Hash scorer: a stable value in [0, 1) per (model, src, tgt, ref)."""

    name: str = "mock-scorer"
    latency_per_request: float = 0.0
    fail_times: int = 0
    calls: list = field(default_factory=list)

    def score(self, pairs: list[dict], model: str) -> ScoreResult:
        self.calls.append({"model": model, "size": len(pairs)})
        if self.fail_times > 0:
            self.fail_times -= 1
            raise BackendUnreachable("mock scorer outage", endpoint=self.name)
        scores = tuple(
            stable_unit_score(model, p["src"], p["tgt"], p.get("ref", ""))
            for p in pairs
        )
        return ScoreResult(
            scores=scores, elapsed_s=self.latency_per_request * len(pairs)
        )


@dataclass
class MockChat:
    """Chat mock with scripted replies or hash-derived 0-100 assessments.

    A script (list of replies) is consumed call by call regardless of prompt,
    which is what retry tests need. Keyed sequences play per-prompt. Without
    either, the reply is a stable integer in [0, 100] for the prompt. Every
    call is recorded with its temperature so tests can assert the schedule.
    """

    script: Sequence[str] | None = None
    sequences: Mapping[str, Sequence[str]] | None = None
    seed: int = 0
    fail_times: int = 0
    latency_per_call: float = 0.0
    calls: list = field(default_factory=list)
    _cursor: int = 0
    _per_prompt: dict = field(default_factory=dict)

    def complete(self, prompt: str, temperature: float, max_output_tokens: int) -> str:
        self.calls.append(
            {
                "prompt": prompt,
                "temperature": temperature,
                "max_output_tokens": max_output_tokens,
            }
        )
        if self.fail_times > 0:
            self.fail_times -= 1
            raise BackendUnreachable("mock chat outage", endpoint="mock-chat")
        if self.script is not None:
            reply = self.script[min(self._cursor, len(self.script) - 1)]
            self._cursor += 1
            return reply
        if self.sequences is not None and prompt in self.sequences:
            seq = self.sequences[prompt]
            attempt = self._per_prompt.get(prompt, 0)
            self._per_prompt[prompt] = attempt + 1
            return seq[min(attempt, len(seq) - 1)]
        return str(stable_int(100, "mock-chat", str(self.seed), prompt))
