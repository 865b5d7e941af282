"""Candidate-pool trimming and QE-based best-candidate selection.

Pools are ordered by generation; smaller pools are prefixes of larger ones so
pool-size sweeps reuse one generation pass. Selection is the argmax over
scored candidates, with exact ties broken by a seeded uniform draw and a
configurable fallback score list when every primary score was discarded.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .errors import LengthMismatch, NoValidCandidate, PoolTooSmall
from .strategies import DocScore

__all__ = [
    "Candidate",
    "CandidatePool",
    "RerankOutcome",
    "trim_pool",
    "select_best",
    "derive_seed",
    "outcome_to_dict",
]


@dataclass(frozen=True, slots=True)
class Candidate:
    """One generated translation with its decoding metadata."""

    index: int
    text: str
    decode_meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"candidate index must be >= 0, got {self.index}")


@dataclass(frozen=True, slots=True)
class CandidatePool:
    """An ordered list of candidates for one source document."""

    candidates: tuple[Candidate, ...]
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for expected, candidate in enumerate(self.candidates):
            if candidate.index != expected:
                raise ValueError(
                    f"candidate indices must be 0..N-1 in order; "
                    f"got {candidate.index} at position {expected}"
                )

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(c.text for c in self.candidates)


@dataclass(frozen=True, slots=True)
class RerankOutcome:
    """The result of selecting one candidate from a scored pool."""

    chosen_index: int
    metric_id: str
    pool_size: int
    scores: tuple[DocScore, ...]
    used_fallback: bool = False
    tie_broken: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.chosen_index < self.pool_size:
            raise ValueError(
                f"chosen index {self.chosen_index} outside pool of {self.pool_size}"
            )


def trim_pool(pool: CandidatePool, n: int) -> CandidatePool:
    """Keep the first ``n`` candidates in generation order."""
    if n < 1 or n > len(pool):
        raise PoolTooSmall(f"cannot trim pool of {len(pool)} to {n}")
    return CandidatePool(candidates=pool.candidates[:n], meta=pool.meta)


def _argmax_with_ties(scores: Sequence[DocScore], seed: int) -> tuple[int, bool]:
    valid = [(i, s.value) for i, s in enumerate(scores) if s.status == "ok"]
    if not valid:
        raise NoValidCandidate("no candidate with an ok score")
    best = max(value for _, value in valid)
    tied = [i for i, value in valid if value == best]
    if len(tied) == 1:
        return tied[0], False
    return random.Random(seed).choice(tied), True


def select_best(
    scores: Sequence[DocScore],
    fallback: Sequence[DocScore] | None = None,
    seed: int = 0,
) -> RerankOutcome:
    """Pick the best-scored candidate.

    Discarded scores never win. When every primary score is discarded the
    fallback scores (aligned by candidate index) are consulted instead; with
    no usable fallback either, NoValidCandidate is raised. Exact ties are
    broken uniformly at random with the given seed, so reruns with the same
    seed select the same candidate.
    """
    if not scores:
        raise NoValidCandidate("empty score list")
    primary = tuple(scores)
    try:
        chosen, tie_broken = _argmax_with_ties(primary, seed)
        used_fallback = False
        metric_id = primary[chosen].metric_id
    except NoValidCandidate:
        if fallback is None:
            raise
        fb = tuple(fallback)
        if len(fb) != len(primary):
            raise LengthMismatch(
                f"fallback has {len(fb)} scores for a pool of {len(primary)}"
            ) from None
        chosen, tie_broken = _argmax_with_ties(fb, seed)
        used_fallback = True
        metric_id = fb[chosen].metric_id
    return RerankOutcome(
        chosen_index=chosen,
        metric_id=metric_id,
        pool_size=len(primary),
        scores=primary,
        used_fallback=used_fallback,
        tie_broken=tie_broken,
    )


def derive_seed(*parts: Any) -> int:
    """Stable 64-bit seed from arbitrary parts (process-independent)."""
    digest = hashlib.sha256("\x1f".join(repr(p) for p in parts).encode("utf-8"))
    return int.from_bytes(digest.digest()[:8], "big")


def outcome_to_dict(outcome: RerankOutcome, chosen_text: str | None = None) -> dict:
    """JSON-serializable view of an outcome for logs and CLI output."""
    record = {
        "chosen_index": outcome.chosen_index,
        "metric_id": outcome.metric_id,
        "pool_size": outcome.pool_size,
        "used_fallback": outcome.used_fallback,
        "tie_broken": outcome.tie_broken,
        "scores": [
            {"index": i, "status": s.status}
            if s.value is None
            else {"index": i, "status": s.status, "value": s.value}
            for i, s in enumerate(outcome.scores)
        ],
    }
    if chosen_text is not None:
        record["chosen_text"] = chosen_text
    return record
