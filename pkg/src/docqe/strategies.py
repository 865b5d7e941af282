"""Document-adaptation strategies for sentence-level QE scoring backends.

Each planner turns a (source document, candidate document) pair into a list of
scoring requests plus an aggregation rule. Four strategies are provided:

* full_doc       - the whole documents as one request
* sentence_avg   - order-aligned sentence pairs, mean over pairs
* doc_context    - sentence pairs with up to k preceding sentences attached
                   as masked context on both sides
* slide          - fixed-sentence-width strided windows, weighted mean with
                   window size as the weight

Aggregation is always the weighted arithmetic mean of per-request scores; the
uniform-weight strategies are the plain mean as a special case.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyInput, EmptyScores, InvalidConfig, LengthMismatch
from .lang import approx_token_count, join_sentences
from .segmentation import SegmentedDoc, align_and_pad

__all__ = [
    "ScoreRequest",
    "ScorePlan",
    "Window",
    "SlideConfig",
    "DocScore",
    "plan_full_doc",
    "plan_sentence_avg",
    "plan_doc_context",
    "plan_slide",
    "enumerate_windows",
    "aggregate",
    "STRATEGY_NAMES",
]

STRATEGY_NAMES = ("full_doc", "sentence_avg", "doc_context", "slide")


@dataclass(frozen=True, slots=True)
class ScoreRequest:
    """One unit of work for a scoring backend.

    Context fields are None when the strategy uses no context; mask_context
    asks the backend to condition on the context without scoring it, so it
    requires the context fields to be present (possibly empty near the
    document start).
    """

    src_text: str
    tgt_text: str
    src_context: str | None = None
    tgt_context: str | None = None
    mask_context: bool = False
    weight: float = 1.0
    approx_src_tokens: int = 0
    approx_tgt_tokens: int = 0

    def __post_init__(self) -> None:
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"request weight must be positive, got {self.weight}")
        if self.mask_context and self.src_context is None and self.tgt_context is None:
            raise ValueError("mask_context set but no context field present")


@dataclass(frozen=True, slots=True)
class ScorePlan:
    """The requests for one candidate document plus their aggregation rule."""

    strategy: str
    requests: tuple[ScoreRequest, ...]

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(r.weight for r in self.requests)

    def aggregate(self, scores: Sequence[float]) -> float:
        return aggregate(scores, self.weights)


@dataclass(frozen=True, slots=True)
class Window:
    """A half-open sentence range [start, start + length)."""

    start: int
    length: int
    is_partial: bool

    def __post_init__(self) -> None:
        if self.start < 0 or self.length < 1:
            raise ValueError(f"bad window ({self.start}, {self.length})")


@dataclass(frozen=True, slots=True)
class SlideConfig:
    """Window width and stride, both in sentences."""

    w: int = 7
    s: int = 7

    def __post_init__(self) -> None:
        if self.w < 1 or self.s < 1:
            raise InvalidConfig(f"window width and stride must be >= 1, got w={self.w} s={self.s}")
        if self.s > self.w:
            warnings.warn(
                f"stride {self.s} exceeds width {self.w}; windows will skip sentences",
                stacklevel=2,
            )


@dataclass(frozen=True, slots=True)
class DocScore:
    """A document-level QE score for one candidate.

    status is "ok" (value is a finite float) or "discarded" (value is None;
    the candidate could not be scored and never re-enters selection with a
    number attached). request_count records how many backend requests or
    judge attempts the score consumed.
    """

    metric_id: str
    status: str
    value: float | None
    request_count: int
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.status not in ("ok", "discarded"):
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == "ok":
            if self.value is None or not math.isfinite(self.value):
                raise ValueError(f"ok score must be finite, got {self.value!r}")
        elif self.value is not None:
            raise ValueError("discarded score must not carry a value")
        if self.request_count < 1:
            raise ValueError("request_count must be >= 1")


def _annotated(
    src_text: str,
    tgt_text: str,
    src_lang: str,
    tgt_lang: str,
    *,
    src_context: str | None = None,
    tgt_context: str | None = None,
    mask_context: bool = False,
    weight: float = 1.0,
) -> ScoreRequest:
    """Build a request carrying approximate lengths for truncation diagnostics."""
    return ScoreRequest(
        src_text=src_text,
        tgt_text=tgt_text,
        src_context=src_context,
        tgt_context=tgt_context,
        mask_context=mask_context,
        weight=weight,
        approx_src_tokens=approx_token_count(src_text, src_lang),
        approx_tgt_tokens=approx_token_count(tgt_text, tgt_lang),
    )


def plan_full_doc(src: SegmentedDoc, cand: SegmentedDoc) -> ScorePlan:
    """Score the whole documents as a single segment pair."""
    if not src.raw_text.strip():
        raise EmptyInput("source document is empty")
    if not cand.raw_text.strip():
        raise EmptyInput("candidate document is empty")
    request = _annotated(src.raw_text, cand.raw_text, src.language, cand.language)
    return ScorePlan(strategy="full_doc", requests=(request,))


def plan_sentence_avg(src: SegmentedDoc, cand: SegmentedDoc) -> ScorePlan:
    """Score order-aligned sentence pairs and average them."""
    aligned = align_and_pad(src, cand)
    requests = tuple(
        _annotated(s, t, src.language, cand.language) for s, t in aligned.pairs
    )
    return ScorePlan(strategy="sentence_avg", requests=requests)


def plan_doc_context(src: SegmentedDoc, cand: SegmentedDoc, k: int = 2) -> ScorePlan:
    """Sentence pairs with up to ``k`` preceding sentences as masked context.

    Context comes from the aligned (padded) sequences so both sides stay in
    step; near the document start fewer (or zero) sentences are available and
    the context strings are correspondingly shorter or empty.
    """
    if k < 0:
        raise InvalidConfig(f"context size must be >= 0, got {k}")
    aligned = align_and_pad(src, cand)
    src_side = aligned.source_texts
    tgt_side = aligned.target_texts
    requests = []
    for i in range(len(aligned)):
        lo = max(0, i - k)
        requests.append(
            _annotated(
                src_side[i],
                tgt_side[i],
                src.language,
                cand.language,
                src_context=join_sentences(src_side[lo:i], src.language),
                tgt_context=join_sentences(tgt_side[lo:i], cand.language),
                mask_context=True,
            )
        )
    return ScorePlan(strategy="doc_context", requests=tuple(requests))


def enumerate_windows(n: int, cfg: SlideConfig) -> tuple[Window, ...]:
    """Enumerate strided sentence windows over a document of ``n`` sentences.

    A document no longer than the window width yields exactly one window
    covering the whole document. Otherwise window starts advance by the
    stride while they fall inside the document, and the final windows shrink
    at the document end rather than running past it.
    """
    if n < 1:
        raise EmptyInput(f"cannot window a document of {n} sentences")
    if n <= cfg.w:
        return (Window(start=0, length=n, is_partial=n < cfg.w),)
    windows: list[Window] = []
    start = 0
    while start < n:
        length = min(cfg.w, n - start)
        window = Window(start=start, length=length, is_partial=length < cfg.w)
        if not windows or (windows[-1].start, windows[-1].length) != (start, length):
            windows.append(window)
        start += cfg.s
    return tuple(windows)


def plan_slide(src: SegmentedDoc, cand: SegmentedDoc, cfg: SlideConfig) -> ScorePlan:
    """Score strided sentence windows, weighting each by its sentence count."""
    aligned = align_and_pad(src, cand)
    src_side = aligned.source_texts
    tgt_side = aligned.target_texts
    requests = []
    for window in enumerate_windows(len(aligned), cfg):
        stop = window.start + window.length
        requests.append(
            _annotated(
                join_sentences(src_side[window.start : stop], src.language),
                join_sentences(tgt_side[window.start : stop], cand.language),
                src.language,
                cand.language,
                weight=float(window.length),
            )
        )
    return ScorePlan(strategy="slide", requests=tuple(requests))


def aggregate(scores: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted arithmetic mean of ``scores``."""
    if len(scores) != len(weights):
        raise LengthMismatch(
            f"{len(scores)} scores vs {len(weights)} weights"
        )
    if len(scores) == 0:
        raise EmptyScores("cannot aggregate zero scores")
    for w in weights:
        if not (w > 0 and math.isfinite(w)):
            raise ValueError(f"weights must be positive and finite, got {w}")
    total = math.fsum(w * x for w, x in zip(weights, scores))
    return total / math.fsum(weights)
