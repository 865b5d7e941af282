"""Backend clients: candidate generation, batched QE scoring, chat judging.

Backends are duck-typed protocols so the same operations run against real
HTTP services or in-process mocks. Transport failures are retried with
exponential backoff; the adaptive max-token budget keeps generation requests
bounded for long documents.

Wire contracts (JSON over HTTP):

* generation  POST {endpoint}
    request   {source_text, source_lang, target_lang, decoding{...}, max_tokens}
    response  {candidates: [{text, finish_reason}]}
* scoring     POST {endpoint}/v1/score
    request   {pairs: [{src, tgt, ...}], model, batch_hint}
    response  {scores: [float, ...]}
* chat        POST {endpoint}/v1/chat
    request   {prompt, temperature, max_output_tokens}
    response  {text}
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import httpx

from .errors import (
    BackendRequestError,
    BackendUnreachable,
    InvalidConfig,
    ScoreCountMismatch,
)
from .lang import approx_token_count
from .rerank import Candidate, CandidatePool
from .segmentation import SegmentedDoc
from .strategies import ScoreRequest

__all__ = [
    "Strategy",
    "DecodingConfig",
    "DECODING_PRESETS",
    "TokenBudget",
    "max_tokens",
    "GeneratedCandidate",
    "TranslationResult",
    "ScoreResult",
    "ScoreRun",
    "TranslatorBackend",
    "ScorerBackend",
    "generate_pool",
    "score_requests",
    "validate_for_backend",
    "HttpTranslator",
    "HttpScorer",
    "HttpChat",
]

DEFAULT_BATCH_LIMIT = 32


class Strategy:
    NUCLEUS = "nucleus"
    EPSILON = "epsilon"
    DIVERSE_BEAM = "diverse_beam"

    ALL = (NUCLEUS, EPSILON, DIVERSE_BEAM)


@dataclass(frozen=True, slots=True)
class DecodingConfig:
    """Decoding parameters passed through to a generation backend.

    Each strategy requires its own fields: nucleus needs p and temperature,
    epsilon needs epsilon and temperature, diverse beam needs group count and
    diversity penalty.
    """

    strategy: str
    num_candidates: int = 1
    p: float | None = None
    epsilon: float | None = None
    temperature: float | None = None
    groups: int | None = None
    diversity: float | None = None

    def __post_init__(self) -> None:
        if self.strategy not in Strategy.ALL:
            raise InvalidConfig(f"unknown decoding strategy {self.strategy!r}")
        if self.num_candidates < 1:
            raise InvalidConfig("num_candidates must be >= 1")
        if self.strategy == Strategy.NUCLEUS:
            if self.p is None or not 0 < self.p <= 1:
                raise InvalidConfig(f"nucleus sampling needs p in (0, 1], got {self.p}")
            self._require_temperature()
        elif self.strategy == Strategy.EPSILON:
            if self.epsilon is None or self.epsilon < 0:
                raise InvalidConfig(f"epsilon sampling needs epsilon >= 0, got {self.epsilon}")
            self._require_temperature()
        else:
            if self.groups is None or self.groups < 1:
                raise InvalidConfig(f"diverse beam needs groups >= 1, got {self.groups}")
            if self.diversity is None or self.diversity < 0:
                raise InvalidConfig(f"diverse beam needs diversity >= 0, got {self.diversity}")
            if self.groups > self.num_candidates:
                raise InvalidConfig(
                    f"diverse beam groups ({self.groups}) exceed num_candidates "
                    f"({self.num_candidates})"
                )

    def _require_temperature(self) -> None:
        if self.temperature is None or self.temperature < 0:
            raise InvalidConfig(f"sampling needs temperature >= 0, got {self.temperature}")

    def to_wire(self) -> dict:
        wire = {"strategy": self.strategy, "n": self.num_candidates}
        for key in ("p", "epsilon", "temperature", "groups", "diversity"):
            value = getattr(self, key)
            if value is not None:
                wire[key] = value
        return wire


def _preset(strategy: str, **kwargs) -> Callable[[int], DecodingConfig]:
    def build(num_candidates: int = 1) -> DecodingConfig:
        return DecodingConfig(strategy=strategy, num_candidates=num_candidates, **kwargs)

    return build


# Default parameterizations per strategy family.
DECODING_PRESETS = {
    Strategy.NUCLEUS: _preset(Strategy.NUCLEUS, p=0.9, temperature=0.6),
    Strategy.EPSILON: _preset(Strategy.EPSILON, epsilon=0.02, temperature=0.5),
    Strategy.DIVERSE_BEAM: _preset(Strategy.DIVERSE_BEAM, groups=16, diversity=0.5),
}


@dataclass(frozen=True, slots=True)
class TokenBudget:
    """Adaptive output-token budget scaled by the dataset's length ratio.

    The allowance for an input of L tokens is
    ceil(L * alpha_m * mu_tgt / mu_src + alpha_a), capped at ``ceiling``.
    mu_src and mu_tgt are dataset mean source/target token counts.
    """

    mu_src: float = 1.0
    mu_tgt: float = 1.0
    alpha_a: float = 10.0
    alpha_m: float = 2.0
    ceiling: int = 2048

    def __post_init__(self) -> None:
        for name in ("mu_src", "mu_tgt", "alpha_a", "alpha_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidConfig(f"{name} must be positive and finite, got {value}")
        if self.ceiling < 1:
            raise InvalidConfig(f"ceiling must be >= 1, got {self.ceiling}")


def max_tokens(input_tokens: int, budget: TokenBudget) -> int:
    """Output-token allowance for an input of ``input_tokens`` tokens."""
    if input_tokens < 0:
        raise InvalidConfig(f"input token count must be >= 0, got {input_tokens}")
    allowance = math.ceil(
        input_tokens * budget.alpha_m * (budget.mu_tgt / budget.mu_src)
        + budget.alpha_a
    )
    return min(budget.ceiling, allowance)


@dataclass(frozen=True, slots=True)
class GeneratedCandidate:
    text: str
    finish_reason: str = "stop"


@dataclass(frozen=True, slots=True)
class TranslationResult:
    """One generation response; elapsed_s is backend-reported when present."""

    candidates: tuple[GeneratedCandidate, ...]
    elapsed_s: float | None = None


@dataclass(frozen=True, slots=True)
class ScoreResult:
    """One scoring response for a single batch."""

    scores: tuple[float, ...]
    elapsed_s: float | None = None


@dataclass(frozen=True, slots=True)
class ScoreRun:
    """All scores for a request list, in request order, with latency shares."""

    scores: tuple[float, ...]
    request_latencies: tuple[float, ...]
    batch_count: int

    @property
    def elapsed_s(self) -> float:
        return math.fsum(self.request_latencies)


class TranslatorBackend(Protocol):
    name: str

    def translate(
        self,
        source_text: str,
        source_lang: str,
        target_lang: str,
        decoding: dict,
        max_tokens: int,
    ) -> TranslationResult: ...


class ScorerBackend(Protocol):
    name: str

    def score(self, pairs: list[dict], model: str) -> ScoreResult: ...


def validate_for_backend(cfg: DecodingConfig, backend: TranslatorBackend) -> None:
    """Reject decoding strategies the backend declares unsupported."""
    supported = getattr(backend, "supported_strategies", None)
    if supported is not None and cfg.strategy not in supported:
        raise InvalidConfig(
            f"backend {getattr(backend, 'name', '?')} does not support "
            f"{cfg.strategy} decoding (supports: {sorted(supported)})"
        )


def _retrying(
    call: Callable[[], object],
    transport_retries: int,
    backoff_base: float,
    sleep: Callable[[float], None],
):
    for attempt in range(transport_retries + 1):
        try:
            return call()
        except BackendUnreachable:
            if attempt == transport_retries:
                raise
            sleep(backoff_base * (2**attempt))
    raise AssertionError("unreachable")


def generate_pool(
    backend: TranslatorBackend,
    src: SegmentedDoc,
    target_lang: str,
    cfg: DecodingConfig,
    budget: TokenBudget,
    *,
    transport_retries: int = 3,
    backoff_base: float = 0.2,
    sleep: Callable[[float], None] = time.sleep,
) -> CandidatePool:
    """Generate a candidate pool for one source document.

    The input length uses the backend's own token counter when it exposes
    one, otherwise the shared heuristic. A backend returning fewer candidates
    than requested yields a pool flagged partial rather than an error; each
    candidate records its decoding metadata, truncation flag, and an
    amortized per-candidate latency.
    """
    validate_for_backend(cfg, backend)
    counter = getattr(backend, "count_tokens", None)
    input_tokens = None
    if counter is not None:
        input_tokens = counter(src.raw_text, src.language)
    if input_tokens is None:
        input_tokens = approx_token_count(src.raw_text, src.language)
    limit = max_tokens(input_tokens, budget)

    started = time.perf_counter()
    result: TranslationResult = _retrying(
        lambda: backend.translate(
            src.raw_text, src.language, target_lang, cfg.to_wire(), limit
        ),
        transport_retries,
        backoff_base,
        sleep,
    )
    elapsed = result.elapsed_s
    if elapsed is None:
        elapsed = time.perf_counter() - started

    count = len(result.candidates)
    per_candidate = elapsed / count if count else 0.0
    candidates = tuple(
        Candidate(
            index=i,
            text=generated.text,
            decode_meta={
                "strategy": cfg.strategy,
                "temperature": cfg.temperature,
                "finish_reason": generated.finish_reason,
                "truncated": generated.finish_reason == "length",
                "latency_s": per_candidate,
            },
        )
        for i, generated in enumerate(result.candidates)
    )
    return CandidatePool(
        candidates=candidates,
        meta={
            "translator": getattr(backend, "name", "unknown"),
            "num_requested": cfg.num_candidates,
            "partial": count < cfg.num_candidates,
            "max_tokens": limit,
            "input_tokens": input_tokens,
            "elapsed_s": elapsed,
        },
    )


def _request_to_pair(request: ScoreRequest) -> dict:
    pair = {"src": request.src_text, "tgt": request.tgt_text}
    if request.src_context is not None:
        pair["src_context"] = request.src_context
    if request.tgt_context is not None:
        pair["tgt_context"] = request.tgt_context
    if request.mask_context:
        pair["mask_context"] = True
    return pair


def score_requests(
    backend: ScorerBackend,
    requests: Sequence[ScoreRequest],
    batch_limit: int = DEFAULT_BATCH_LIMIT,
    model: str = "mock",
    *,
    transport_retries: int = 3,
    backoff_base: float = 0.2,
    sleep: Callable[[float], None] = time.sleep,
) -> ScoreRun:
    """Score requests in order, chunked into batches of at most batch_limit.

    Raises ScoreCountMismatch when a batch response has the wrong length.
    Each request is charged an equal share of its batch's latency.
    """
    if batch_limit < 1:
        raise InvalidConfig(f"batch_limit must be >= 1, got {batch_limit}")
    scores: list[float] = []
    latencies: list[float] = []
    batch_count = 0
    for lo in range(0, len(requests), batch_limit):
        batch = requests[lo : lo + batch_limit]
        pairs = [_request_to_pair(r) for r in batch]
        started = time.perf_counter()
        result: ScoreResult = _retrying(
            lambda: backend.score(pairs, model),
            transport_retries,
            backoff_base,
            sleep,
        )
        elapsed = result.elapsed_s
        if elapsed is None:
            elapsed = time.perf_counter() - started
        if len(result.scores) != len(batch):
            raise ScoreCountMismatch(
                f"batch of {len(batch)} got {len(result.scores)} scores back"
            )
        scores.extend(result.scores)
        latencies.extend([elapsed / len(batch)] * len(batch))
        batch_count += 1
    return ScoreRun(
        scores=tuple(scores),
        request_latencies=tuple(latencies),
        batch_count=batch_count,
    )


def _auth_headers(token_env: str | None) -> dict:
    if token_env:
        token = os.environ.get(token_env)
        if token:
            return {"Authorization": f"Bearer {token}"}
    return {}


class _HttpBase:
    """Shared POST plumbing with error mapping for the HTTP backends."""

    def __init__(
        self,
        endpoint: str,
        *,
        name: str | None = None,
        token_env: str | None = None,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.name = name or self.endpoint
        self._headers = _auth_headers(token_env)
        self._client = client or httpx.Client(timeout=timeout)

    def _post(self, path: str, payload: dict) -> dict:
        url = self.endpoint + path
        try:
            response = self._client.post(url, json=payload, headers=self._headers)
        except httpx.HTTPError as exc:
            raise BackendUnreachable(
                f"cannot reach {url}: {exc}", endpoint=url
            ) from exc
        if response.status_code >= 500:
            raise BackendUnreachable(
                f"{url} returned {response.status_code}", endpoint=url
            )
        if response.status_code >= 400:
            raise BackendRequestError(
                f"{url} rejected the request ({response.status_code}): "
                f"{response.text[:200]}",
                status_code=response.status_code,
            )
        return response.json()


class HttpTranslator(_HttpBase):
    """Generation backend over the translation wire contract."""

    def __init__(
        self,
        endpoint: str,
        *,
        name: str | None = None,
        token_env: str | None = None,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
        supported_strategies: Sequence[str] = Strategy.ALL,
    ) -> None:
        super().__init__(
            endpoint, name=name, token_env=token_env, timeout=timeout, client=client
        )
        self.supported_strategies = frozenset(supported_strategies)

    def translate(
        self,
        source_text: str,
        source_lang: str,
        target_lang: str,
        decoding: dict,
        max_tokens: int,
    ) -> TranslationResult:
        body = self._post(
            "",
            {
                "source_text": source_text,
                "source_lang": source_lang,
                "target_lang": target_lang,
                "decoding": decoding,
                "max_tokens": max_tokens,
            },
        )
        return TranslationResult(
            candidates=tuple(
                GeneratedCandidate(
                    text=c["text"], finish_reason=c.get("finish_reason", "stop")
                )
                for c in body["candidates"]
            ),
        )


class HttpScorer(_HttpBase):
    """QE scoring backend over the scoring wire contract."""

    def score(self, pairs: list[dict], model: str) -> ScoreResult:
        body = self._post(
            "/v1/score",
            {"pairs": pairs, "model": model, "batch_hint": len(pairs)},
        )
        return ScoreResult(scores=tuple(float(s) for s in body["scores"]))


class HttpChat(_HttpBase):
    """Chat backend for LLM-judge metrics."""

    def complete(self, prompt: str, temperature: float, max_output_tokens: int) -> str:
        body = self._post(
            "/v1/chat",
            {
                "prompt": prompt,
                "temperature": temperature,
                "max_output_tokens": max_output_tokens,
            },
        )
        return body["text"]
