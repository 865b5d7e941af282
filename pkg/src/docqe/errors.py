"""Exception types shared across the toolkit.

Every error raised by docqe derives from DocQEError so callers can catch the
whole family at once; the CLI maps subfamilies onto exit codes.
"""

from __future__ import annotations

__all__ = [
    "DocQEError",
    "EmptyInput",
    "BothEmpty",
    "InvalidConfig",
    "LengthMismatch",
    "EmptyScores",
    "ParseFailure",
    "MissingExample",
    "PoolTooSmall",
    "NoValidCandidate",
    "BackendUnreachable",
    "BackendRequestError",
    "ScoreCountMismatch",
    "DatasetError",
    "MissingReference",
    "MissingBaseline",
    "IoFailure",
]


class DocQEError(Exception):
    """Base class for all docqe errors."""


class EmptyInput(DocQEError):
    """An operation received empty text or an empty collection it cannot use."""


class BothEmpty(EmptyInput):
    """Both sides of an alignment have zero sentences."""


class InvalidConfig(DocQEError):
    """A configuration object or file failed validation."""


class LengthMismatch(DocQEError):
    """Two parallel sequences differ in length."""


class EmptyScores(DocQEError):
    """An aggregation was asked to combine zero scores."""


class ParseFailure(DocQEError):
    """A judge reply did not contain a usable score; signals a retry."""


class MissingExample(DocQEError):
    """No in-context example is available for the requested language pair."""


class PoolTooSmall(DocQEError):
    """A candidate pool cannot be trimmed to the requested size."""


class NoValidCandidate(DocQEError):
    """Every candidate score was discarded and no fallback was available."""


class BackendUnreachable(DocQEError):
    """Transport-level failure talking to a backend; retried with backoff."""

    def __init__(self, message: str, endpoint: str | None = None) -> None:
        super().__init__(message)
        self.endpoint = endpoint


class BackendRequestError(DocQEError):
    """The backend rejected a request (4xx); not retried."""

    def __init__(self, message: str, status_code: int | None = None) -> None:
        super().__init__(message)
        self.status_code = status_code


class ScoreCountMismatch(DocQEError):
    """A scoring backend returned the wrong number of scores for a batch."""


class DatasetError(DocQEError):
    """Malformed or inconsistent dataset input."""


class MissingReference(DatasetError):
    """A source segment has no reference translation."""


class MissingBaseline(DocQEError):
    """Delta computation found no pool-size-1 baseline for a group."""


class IoFailure(DocQEError):
    """Reading or writing an artifact file failed."""
