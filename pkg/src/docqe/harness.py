"""Experiment grid: generate once, score per metric, select per pool size.

For every (document, translator) the harness generates one candidate pool at
the maximum pool size; every metric scores that full pool once; every pool
size then reuses a prefix of those scores. Per-cell failures are recorded and
skipped so one bad document or metric never aborts a grid.

Runtime attribution: each candidate carries its amortized generation latency
and each scoring request its amortized batch latency, so the record for pool
size n charges exactly the first n candidates' generation and scoring costs,
which is what a standalone pool-n run would have paid.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

from .clients import (
    DecodingConfig,
    ScorerBackend,
    TokenBudget,
    TranslatorBackend,
    generate_pool,
    score_requests,
)
from .dataset import ExperimentDoc
from .errors import (
    DocQEError,
    EmptyInput,
    InvalidConfig,
    MissingExample,
    NoValidCandidate,
    PoolTooSmall,
)
from .llm_judge import (
    ChatBackend,
    JudgeConfig,
    MetricKind,
    build_eaprompt,
    build_gemba_prompt,
    load_example,
    score_with_retries,
)
from .rerank import CandidatePool, RerankOutcome, derive_seed, select_best
from .segmentation import SegmentedDoc, segment
from .strategies import (
    DocScore,
    ScorePlan,
    SlideConfig,
    plan_doc_context,
    plan_full_doc,
    plan_sentence_avg,
    plan_slide,
)

__all__ = [
    "MetricSpec",
    "EvaluatorSpec",
    "ExperimentRecord",
    "GridFailure",
    "GridResult",
    "DEFAULT_POOL_SIZES",
    "plan_for",
    "score_pool_with_metric",
    "run_grid",
    "budgets_from_stats",
]

DEFAULT_POOL_SIZES = (1, 2, 4, 8, 16, 32)


@dataclass(frozen=True, slots=True)
class MetricSpec:
    """One QE metric column of the grid.

    kind "learned" plans requests against the scoring backend with one of the
    document-adaptation strategies; kind "judge" prompts the chat backend.
    fallback_id names another metric used when every candidate of a pool was
    discarded.
    """

    metric_id: str
    kind: str
    strategy: str | None = None
    model: str = "mock"
    slide: SlideConfig | None = None
    context_k: int = 2
    judge: JudgeConfig | None = None
    fallback_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "learned":
            if self.strategy not in ("full_doc", "sentence_avg", "doc_context", "slide"):
                raise InvalidConfig(
                    f"metric {self.metric_id!r}: unknown strategy {self.strategy!r}"
                )
            if self.strategy == "slide" and self.slide is None:
                object.__setattr__(self, "slide", SlideConfig())
        elif self.kind == "judge":
            if self.judge is None:
                raise InvalidConfig(f"metric {self.metric_id!r}: judge config required")
        else:
            raise InvalidConfig(f"metric {self.metric_id!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True, slots=True)
class EvaluatorSpec:
    """A reference-based evaluator behind the scoring wire contract."""

    evaluator_id: str
    model: str


@dataclass(frozen=True, slots=True)
class ExperimentRecord:
    """One grid cell: a (doc, translator, metric, pool size) outcome."""

    doc_id: str
    translator_id: str
    metric_id: str
    pool_size: int
    chosen_index: int
    eval_scores: Mapping[str, float]
    runtimes: Mapping[str, float]
    used_fallback: bool = False
    tie_broken: bool = False
    length_bucket: str | None = None
    granularity: str | None = None


@dataclass(frozen=True, slots=True)
class GridFailure:
    """A recorded, skipped cell failure."""

    doc_id: str
    translator_id: str
    stage: str
    error: str
    metric_id: str | None = None
    pool_size: int | None = None


@dataclass(slots=True)
class GridResult:
    records: list[ExperimentRecord]
    failures: list[GridFailure]


def plan_for(spec: MetricSpec, src: SegmentedDoc, cand: SegmentedDoc) -> ScorePlan:
    """Build the scoring plan for one candidate under a learned metric."""
    if spec.strategy == "full_doc":
        return plan_full_doc(src, cand)
    if spec.strategy == "sentence_avg":
        return plan_sentence_avg(src, cand)
    if spec.strategy == "doc_context":
        return plan_doc_context(src, cand, k=spec.context_k)
    return plan_slide(src, cand, spec.slide)


def _discarded(metric_id: str, reason: str) -> DocScore:
    return DocScore(
        metric_id=metric_id,
        status="discarded",
        value=None,
        request_count=1,
        diagnostics={"error": reason},
    )


def _score_learned(
    spec: MetricSpec,
    src_doc: SegmentedDoc,
    cand_docs: Sequence[SegmentedDoc],
    scorer: ScorerBackend,
    batch_limit: int,
) -> tuple[list[DocScore], list[float]]:
    plans: list[ScorePlan | DocScore] = []
    for cand_doc in cand_docs:
        try:
            plans.append(plan_for(spec, src_doc, cand_doc))
        except EmptyInput as exc:
            plans.append(_discarded(spec.metric_id, f"unplannable candidate: {exc}"))
    flat = [
        request
        for plan in plans
        if isinstance(plan, ScorePlan)
        for request in plan.requests
    ]
    run = score_requests(scorer, flat, batch_limit, spec.model)
    scores: list[DocScore] = []
    latencies: list[float] = []
    cursor = 0
    for plan in plans:
        if isinstance(plan, DocScore):
            scores.append(plan)
            latencies.append(0.0)
            continue
        width = len(plan.requests)
        chunk = run.scores[cursor : cursor + width]
        elapsed = sum(run.request_latencies[cursor : cursor + width])
        cursor += width
        scores.append(
            DocScore(
                metric_id=spec.metric_id,
                status="ok",
                value=plan.aggregate(chunk),
                request_count=width,
                diagnostics={"strategy": plan.strategy},
            )
        )
        latencies.append(elapsed)
    return scores, latencies


def _build_judge_prompt(
    spec: MetricSpec, doc: ExperimentDoc, cand_text: str
) -> str:
    kind = spec.judge.metric_kind
    if kind == MetricKind.GEMBA_DA:
        return build_gemba_prompt(doc.src_text, cand_text, doc.src_lang, doc.tgt_lang)
    example = load_example(doc.src_lang, doc.tgt_lang)
    return build_eaprompt(
        doc.src_text,
        cand_text,
        example,
        critical_enabled=kind == MetricKind.EAPROMPT_CRITICAL,
    )


def _score_judge(
    spec: MetricSpec,
    doc: ExperimentDoc,
    pool: CandidatePool,
    chat: ChatBackend,
    run_seed: int,
    translator_id: str,
) -> tuple[list[DocScore], list[float]]:
    simulated = getattr(chat, "latency_per_call", None)
    scores: list[DocScore] = []
    latencies: list[float] = []
    for candidate in pool:
        try:
            prompt = _build_judge_prompt(spec, doc, candidate.text)
        except EmptyInput as exc:
            scores.append(_discarded(spec.metric_id, f"unpromptable candidate: {exc}"))
            latencies.append(0.0)
            continue
        rng_seed = derive_seed(
            run_seed, doc.doc_id, translator_id, spec.metric_id, candidate.index
        )
        started = time.perf_counter()
        score = score_with_retries(
            chat, prompt, spec.judge, rng_seed=rng_seed, metric_id=spec.metric_id
        )
        if simulated is not None:
            latencies.append(simulated * score.diagnostics.get("attempts", 1))
        else:
            latencies.append(time.perf_counter() - started)
        scores.append(score)
    return scores, latencies


def score_pool_with_metric(
    spec: MetricSpec,
    doc: ExperimentDoc,
    src_doc: SegmentedDoc,
    pool: CandidatePool,
    cand_docs: Sequence[SegmentedDoc],
    scorer: ScorerBackend,
    chat: ChatBackend | None,
    batch_limit: int,
    run_seed: int,
    translator_id: str,
) -> tuple[list[DocScore], list[float]]:
    """Score every candidate of a pool; returns scores + per-candidate cost."""
    if spec.kind == "learned":
        return _score_learned(spec, src_doc, cand_docs, scorer, batch_limit)
    if chat is None:
        raise InvalidConfig(f"metric {spec.metric_id!r} needs a chat backend")
    return _score_judge(spec, doc, pool, chat, run_seed, translator_id)


def budgets_from_stats(stats: dict) -> dict[str, TokenBudget]:
    """Token budgets per language pair from corpus statistics."""
    budgets = {}
    for pair, means in stats.get("token_means", {}).items():
        budgets[pair] = TokenBudget(mu_src=means["mu_src"], mu_tgt=means["mu_tgt"])
    return budgets


class _Evaluations:
    """Per-unit evaluator cache; wall-clock charged on first use only."""

    def __init__(
        self,
        doc: ExperimentDoc,
        evaluators: Sequence[EvaluatorSpec],
        backend: ScorerBackend,
    ) -> None:
        self._doc = doc
        self._evaluators = evaluators
        self._backend = backend
        self._cache: dict[tuple[str, int], tuple[float, float]] = {}

    def evaluate(self, chosen_index: int, chosen_text: str) -> tuple[dict, float]:
        values: dict[str, float] = {}
        charged = 0.0
        for spec in self._evaluators:
            key = (spec.evaluator_id, chosen_index)
            if key not in self._cache:
                pair = {
                    "src": self._doc.src_text,
                    "tgt": chosen_text,
                    "ref": self._doc.ref_text,
                }
                started = time.perf_counter()
                result = self._backend.score([pair], spec.model)
                elapsed = result.elapsed_s
                if elapsed is None:
                    elapsed = time.perf_counter() - started
                self._cache[key] = (float(result.scores[0]), elapsed)
                charged += elapsed
            values[spec.evaluator_id] = self._cache[key][0]
        return values, charged


def _run_unit(
    doc: ExperimentDoc,
    translator_id: str,
    backend: TranslatorBackend,
    decoding: DecodingConfig,
    metrics: Sequence[MetricSpec],
    metric_index: Mapping[str, MetricSpec],
    evaluators: Sequence[EvaluatorSpec],
    scorer: ScorerBackend,
    chat: ChatBackend | None,
    evaluator_backend: ScorerBackend,
    pool_sizes: Sequence[int],
    seed: int,
    batch_limit: int,
    budget: TokenBudget,
) -> tuple[list[ExperimentRecord], list[GridFailure]]:
    records: list[ExperimentRecord] = []
    failures: list[GridFailure] = []
    max_pool = max(pool_sizes)

    def fail(stage: str, error: Exception, metric_id=None, pool_size=None) -> None:
        failures.append(
            GridFailure(
                doc_id=doc.doc_id,
                translator_id=translator_id,
                stage=stage,
                error=f"{type(error).__name__}: {error}",
                metric_id=metric_id,
                pool_size=pool_size,
            )
        )

    src_doc = segment(doc.src_text, doc.src_lang)
    try:
        pool = generate_pool(
            backend,
            src_doc,
            doc.tgt_lang,
            replace(decoding, num_candidates=max_pool),
            budget,
        )
        if len(pool) == 0:
            raise EmptyInput("backend returned an empty pool")
    except DocQEError as exc:
        fail("generate", exc)
        return records, failures

    cand_docs = [segment(c.text, doc.tgt_lang) for c in pool]
    generate_cost = [c.decode_meta.get("latency_s", 0.0) for c in pool]
    evaluations = _Evaluations(doc, evaluators, evaluator_backend)

    for spec in metrics:
        try:
            scores, qe_cost = score_pool_with_metric(
                spec, doc, src_doc, pool, cand_docs, scorer, chat,
                batch_limit, seed, translator_id,
            )
        except DocQEError as exc:
            fail("qe", exc, metric_id=spec.metric_id)
            continue

        fallback_scores: list[DocScore] | None = None
        for n in pool_sizes:
            if n > len(pool):
                fail(
                    "trim",
                    PoolTooSmall(f"pool has {len(pool)} candidates, wanted {n}"),
                    metric_id=spec.metric_id,
                    pool_size=n,
                )
                continue
            tie_seed = derive_seed(seed, doc.doc_id, translator_id, spec.metric_id, n)
            try:
                outcome = select_best(scores[:n], seed=tie_seed)
            except NoValidCandidate:
                fallback_spec = metric_index.get(spec.fallback_id or "")
                if fallback_spec is None:
                    fail(
                        "select",
                        NoValidCandidate("all candidates discarded, no fallback"),
                        metric_id=spec.metric_id,
                        pool_size=n,
                    )
                    continue
                try:
                    if fallback_scores is None:
                        fallback_scores, _ = score_pool_with_metric(
                            fallback_spec, doc, src_doc, pool, cand_docs, scorer,
                            chat, batch_limit, seed, translator_id,
                        )
                    outcome = select_best(
                        scores[:n], fallback_scores[:n], seed=tie_seed
                    )
                except (DocQEError, NoValidCandidate) as exc:
                    fail("select", exc, metric_id=spec.metric_id, pool_size=n)
                    continue

            chosen_text = pool.candidates[outcome.chosen_index].text
            try:
                eval_scores, eval_elapsed = evaluations.evaluate(
                    outcome.chosen_index, chosen_text
                )
            except DocQEError as exc:
                fail("evaluate", exc, metric_id=spec.metric_id, pool_size=n)
                continue
            records.append(
                ExperimentRecord(
                    doc_id=doc.doc_id,
                    translator_id=translator_id,
                    metric_id=spec.metric_id,
                    pool_size=n,
                    chosen_index=outcome.chosen_index,
                    eval_scores=eval_scores,
                    runtimes={
                        "generate": sum(generate_cost[:n]),
                        "qe": sum(qe_cost[:n]),
                        "evaluate": eval_elapsed,
                    },
                    used_fallback=outcome.used_fallback,
                    tie_broken=outcome.tie_broken,
                    length_bucket=doc.length_bucket,
                    granularity=doc.granularity,
                )
            )
    return records, failures


def run_grid(
    corpus: Sequence[ExperimentDoc],
    translators: Mapping[str, tuple[TranslatorBackend, DecodingConfig]],
    metrics: Sequence[MetricSpec],
    evaluators: Sequence[EvaluatorSpec],
    scorer: ScorerBackend,
    chat: ChatBackend | None = None,
    evaluator_backend: ScorerBackend | None = None,
    pool_sizes: Sequence[int] = DEFAULT_POOL_SIZES,
    seed: int = 0,
    jobs: int = 1,
    batch_limit: int = 32,
    budgets: Mapping[str, TokenBudget] | None = None,
) -> GridResult:
    """Run the full experiment grid.

    Results come back sorted by (doc, translator, metric, pool size) so
    concurrent execution (jobs > 1) produces the same record list as serial
    execution; all randomness is derived from the run seed per cell.
    """
    if not corpus:
        raise EmptyInput("empty corpus")
    if not translators:
        raise InvalidConfig("no translators configured")
    if not metrics:
        raise InvalidConfig("no metrics configured")
    if not evaluators:
        raise InvalidConfig("no evaluators configured")
    pool_sizes = tuple(sorted(set(int(n) for n in pool_sizes)))
    if not pool_sizes or pool_sizes[0] < 1:
        raise InvalidConfig(f"pool sizes must be >= 1, got {pool_sizes}")
    if jobs < 1:
        raise InvalidConfig(f"jobs must be >= 1, got {jobs}")
    metric_ids = [m.metric_id for m in metrics]
    if len(set(metric_ids)) != len(metric_ids):
        raise InvalidConfig("metric ids must be unique")
    metric_index = {m.metric_id: m for m in metrics}
    for spec in metrics:
        if spec.fallback_id is not None and spec.fallback_id not in metric_index:
            raise InvalidConfig(
                f"metric {spec.metric_id!r} falls back to unknown metric "
                f"{spec.fallback_id!r}"
            )
        if spec.kind == "judge" and chat is None:
            raise InvalidConfig(
                f"metric {spec.metric_id!r} needs a chat backend"
            )
    budgets = budgets or {}

    units: list[Callable[[], tuple[list, list]]] = []
    for doc in corpus:
        budget = budgets.get(f"{doc.src_lang}-{doc.tgt_lang}", TokenBudget())
        for translator_id, (backend, decoding) in translators.items():
            units.append(
                lambda doc=doc, translator_id=translator_id, backend=backend,
                decoding=decoding, budget=budget: _run_unit(
                    doc, translator_id, backend, decoding, metrics, metric_index,
                    evaluators, scorer, chat,
                    evaluator_backend if evaluator_backend is not None else scorer,
                    pool_sizes, seed, batch_limit, budget,
                )
            )

    records: list[ExperimentRecord] = []
    failures: list[GridFailure] = []
    if jobs == 1:
        results = [unit() for unit in units]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(lambda unit: unit(), units))
    for unit_records, unit_failures in results:
        records.extend(unit_records)
        failures.extend(unit_failures)
    records.sort(key=lambda r: (r.doc_id, r.translator_id, r.metric_id, r.pool_size))
    failures.sort(
        key=lambda f: (f.doc_id, f.translator_id, f.metric_id or "", f.pool_size or 0)
    )
    return GridResult(records=records, failures=failures)
