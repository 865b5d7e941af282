"""Run configuration: a single YAML file, validated before any network call.

Endpoints live in the config; credentials are environment variable names
only. A canonicalized copy of the parsed config is emitted next to the run
outputs so a run is reproducible from its artifacts. Mock mode swaps every
backend for the deterministic in-process mocks while keeping ids, decoding
parameters, and metric definitions from the config.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .clients import (
    DecodingConfig,
    HttpChat,
    HttpScorer,
    HttpTranslator,
)
from .errors import InvalidConfig, IoFailure
from .harness import DEFAULT_POOL_SIZES, EvaluatorSpec, MetricSpec
from .dataset import DEFAULT_BUCKET_EDGES
from .llm_judge import DEFAULT_TEMPERATURE_SCHEDULE, JudgeConfig
from .mocks import MockChat, MockScorer, MockTranslator
from .rerank import derive_seed
from .strategies import SlideConfig

__all__ = [
    "BackendConfig",
    "TranslatorConfig",
    "RunConfig",
    "load_config",
    "parse_config",
    "canonical_dict",
    "write_canonical_config",
    "build_backends",
]


@dataclass(frozen=True, slots=True)
class BackendConfig:
    endpoint: str | None = None
    token_env: str | None = None


@dataclass(frozen=True, slots=True)
class TranslatorConfig:
    translator_id: str
    decoding: DecodingConfig
    endpoint: str | None = None
    token_env: str | None = None


@dataclass(slots=True)
class RunConfig:
    corpus: str
    out_dir: str
    translators: list[TranslatorConfig]
    metrics: list[MetricSpec]
    evaluators: list[EvaluatorSpec]
    manifest: str | None = None
    seed: int = 0
    pool_sizes: tuple[int, ...] = DEFAULT_POOL_SIZES
    jobs: int = 1
    batch_limit: int = 32
    bucket_edges: tuple[int, ...] = DEFAULT_BUCKET_EDGES
    scorer: BackendConfig = BackendConfig()
    chat: BackendConfig = BackendConfig()
    evaluator: BackendConfig = BackendConfig()


def _require(mapping: Mapping, key: str, where: str) -> Any:
    if key not in mapping or mapping[key] in (None, ""):
        raise InvalidConfig(f"{where}: missing required key {key!r}")
    return mapping[key]


def _decoding_from(raw: Mapping, num_candidates: int, where: str) -> DecodingConfig:
    if not isinstance(raw, Mapping):
        raise InvalidConfig(f"{where}: decoding must be a mapping")
    known = {"strategy", "p", "epsilon", "temperature", "groups", "diversity"}
    unknown = set(raw) - known
    if unknown:
        raise InvalidConfig(f"{where}: unknown decoding keys {sorted(unknown)}")
    return DecodingConfig(
        strategy=_require(raw, "strategy", where),
        num_candidates=num_candidates,
        p=raw.get("p"),
        epsilon=raw.get("epsilon"),
        temperature=raw.get("temperature"),
        groups=raw.get("groups"),
        diversity=raw.get("diversity"),
    )


def _judge_from(raw: Mapping, where: str) -> JudgeConfig:
    if not isinstance(raw, Mapping):
        raise InvalidConfig(f"{where}: judge must be a mapping")
    schedule = raw.get("temperature_schedule", DEFAULT_TEMPERATURE_SCHEDULE)
    return JudgeConfig(
        metric_kind=_require(raw, "metric_kind", where),
        max_attempts=raw.get("max_attempts", len(tuple(schedule))),
        temperature_schedule=tuple(schedule),
        max_output_tokens=raw.get("max_output_tokens"),
    )


def _metric_from(raw: Mapping, where: str) -> MetricSpec:
    kind = _require(raw, "kind", where)
    slide = None
    if raw.get("slide") is not None:
        slide = SlideConfig(
            w=raw["slide"].get("w", 7),
            s=raw["slide"].get("s", 7),
        )
    judge = _judge_from(raw["judge"], where) if raw.get("judge") is not None else None
    return MetricSpec(
        metric_id=_require(raw, "id", where),
        kind=kind,
        strategy=raw.get("strategy"),
        model=raw.get("model", "mock"),
        slide=slide,
        context_k=raw.get("context_k", 2),
        judge=judge,
        fallback_id=raw.get("fallback"),
    )


def _backend_from(raw: Mapping | None) -> BackendConfig:
    if raw is None:
        return BackendConfig()
    return BackendConfig(endpoint=raw.get("endpoint"), token_env=raw.get("token_env"))


def load_config(path: str | Path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, Mapping):
        raise InvalidConfig(f"config {path} must be a mapping at the top level")
    return dict(raw)


def parse_config(raw: Mapping, overrides: Mapping | None = None) -> RunConfig:
    """Validate the raw config mapping and apply CLI overrides.

    Overrides (seed, pool_sizes, jobs, out_dir, metrics, translators) replace
    or filter the config values before validation, so a run always sees one
    coherent configuration.
    """
    overrides = dict(overrides or {})
    dataset = raw.get("dataset") or {}
    run = dict(raw.get("run") or {})
    for key in ("seed", "pool_sizes", "jobs", "out_dir"):
        if overrides.get(key) is not None:
            run[key] = overrides[key]

    pool_sizes = tuple(int(n) for n in run.get("pool_sizes", DEFAULT_POOL_SIZES))
    if not pool_sizes or any(n < 1 for n in pool_sizes):
        raise InvalidConfig(f"pool sizes must be >= 1, got {pool_sizes}")
    if len(set(pool_sizes)) != len(pool_sizes):
        raise InvalidConfig(f"duplicate pool sizes in {pool_sizes}")
    if 1 not in pool_sizes:
        raise InvalidConfig("pool_sizes must include 1 (the delta baseline)")
    max_pool = max(pool_sizes)

    translators_raw = raw.get("translators") or []
    if not translators_raw:
        raise InvalidConfig("at least one translator is required")
    wanted_translators = overrides.get("translators")
    translators = []
    for i, entry in enumerate(translators_raw):
        where = f"translators[{i}]"
        translator_id = _require(entry, "id", where)
        translators.append(
            TranslatorConfig(
                translator_id=translator_id,
                decoding=_decoding_from(_require(entry, "decoding", where), max_pool, where),
                endpoint=entry.get("endpoint"),
                token_env=entry.get("token_env"),
            )
        )
    ids = [t.translator_id for t in translators]
    if len(set(ids)) != len(ids):
        raise InvalidConfig("translator ids must be unique")
    if wanted_translators:
        missing = set(wanted_translators) - set(ids)
        if missing:
            raise InvalidConfig(f"unknown translators requested: {sorted(missing)}")
        translators = [t for t in translators if t.translator_id in wanted_translators]

    metrics_raw = raw.get("metrics") or []
    if not metrics_raw:
        raise InvalidConfig("at least one metric is required")
    metrics = [_metric_from(entry, f"metrics[{i}]") for i, entry in enumerate(metrics_raw)]
    metric_ids = [m.metric_id for m in metrics]
    if len(set(metric_ids)) != len(metric_ids):
        raise InvalidConfig("metric ids must be unique")
    for metric in metrics:
        if metric.fallback_id is not None and metric.fallback_id not in metric_ids:
            raise InvalidConfig(
                f"metric {metric.metric_id!r} falls back to unknown metric "
                f"{metric.fallback_id!r}"
            )
    wanted_metrics = overrides.get("metrics")
    if wanted_metrics:
        missing = set(wanted_metrics) - set(metric_ids)
        if missing:
            raise InvalidConfig(f"unknown metrics requested: {sorted(missing)}")
        kept = set(wanted_metrics)
        for metric in metrics:
            if metric.metric_id in kept and metric.fallback_id is not None:
                kept.add(metric.fallback_id)
        metrics = [m for m in metrics if m.metric_id in kept]

    evaluators_raw = raw.get("evaluators") or []
    if not evaluators_raw:
        raise InvalidConfig("at least one evaluator is required")
    evaluators = [
        EvaluatorSpec(
            evaluator_id=_require(entry, "id", f"evaluators[{i}]"),
            model=entry.get("model", _require(entry, "id", f"evaluators[{i}]")),
        )
        for i, entry in enumerate(evaluators_raw)
    ]

    edges = tuple(int(e) for e in run.get("bucket_edges", DEFAULT_BUCKET_EDGES))
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise InvalidConfig(f"bucket edges must be strictly increasing, got {edges}")

    backends = raw.get("backends") or {}
    return RunConfig(
        corpus=str(_require(dataset, "corpus", "dataset")),
        manifest=dataset.get("manifest"),
        out_dir=str(run.get("out_dir", "out")),
        seed=int(run.get("seed", 0)),
        pool_sizes=pool_sizes,
        jobs=int(run.get("jobs", 1)),
        batch_limit=int(run.get("batch_limit", 32)),
        bucket_edges=edges,
        translators=translators,
        metrics=metrics,
        evaluators=evaluators,
        scorer=_backend_from(backends.get("scorer")),
        chat=_backend_from(backends.get("chat")),
        evaluator=_backend_from(backends.get("evaluator")),
    )


def canonical_dict(cfg: RunConfig) -> dict:
    """The parsed configuration as a plain nested mapping, ready to dump."""

    def decoding_dict(d: DecodingConfig) -> dict:
        out = {"strategy": d.strategy}
        for key in ("p", "epsilon", "temperature", "groups", "diversity"):
            value = getattr(d, key)
            if value is not None:
                out[key] = value
        return out

    def metric_dict(m: MetricSpec) -> dict:
        out: dict[str, Any] = {"id": m.metric_id, "kind": m.kind}
        if m.kind == "learned":
            out["strategy"] = m.strategy
            out["model"] = m.model
            if m.strategy == "slide":
                out["slide"] = {"w": m.slide.w, "s": m.slide.s}
            if m.strategy == "doc_context":
                out["context_k"] = m.context_k
        else:
            out["judge"] = {
                "metric_kind": m.judge.metric_kind,
                "max_attempts": m.judge.max_attempts,
                "temperature_schedule": list(m.judge.temperature_schedule),
                "max_output_tokens": m.judge.resolved_max_output_tokens,
            }
        if m.fallback_id is not None:
            out["fallback"] = m.fallback_id
        return out

    def backend_dict(b: BackendConfig) -> dict:
        out = {}
        if b.endpoint:
            out["endpoint"] = b.endpoint
        if b.token_env:
            out["token_env"] = b.token_env
        return out

    return {
        "dataset": {"corpus": cfg.corpus, "manifest": cfg.manifest},
        "run": {
            "seed": cfg.seed,
            "pool_sizes": list(cfg.pool_sizes),
            "jobs": cfg.jobs,
            "batch_limit": cfg.batch_limit,
            "out_dir": cfg.out_dir,
            "bucket_edges": list(cfg.bucket_edges),
        },
        "backends": {
            "scorer": backend_dict(cfg.scorer),
            "chat": backend_dict(cfg.chat),
            "evaluator": backend_dict(cfg.evaluator),
        },
        "translators": [
            {
                "id": t.translator_id,
                **({"endpoint": t.endpoint} if t.endpoint else {}),
                **({"token_env": t.token_env} if t.token_env else {}),
                "decoding": decoding_dict(t.decoding),
            }
            for t in cfg.translators
        ],
        "metrics": [metric_dict(m) for m in cfg.metrics],
        "evaluators": [
            {"id": e.evaluator_id, "model": e.model} for e in cfg.evaluators
        ],
    }


def write_canonical_config(cfg: RunConfig, path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            yaml.safe_dump(
                canonical_dict(cfg), handle, sort_keys=True, allow_unicode=True
            )
    except OSError as exc:
        raise IoFailure(f"cannot write canonical config {path}: {exc}") from exc


def build_backends(cfg: RunConfig, mock: bool, need_translators: bool = True):
    """Assemble (translators, scorer, chat, evaluator_backend) for a run.

    Mock mode ignores endpoints entirely. Real mode requires an endpoint for
    the scorer, the evaluator (defaulting to the scorer's), the chat backend
    when any judge metric is configured, and — unless need_translators is
    off because the caller scores existing candidates — every translator.
    """
    needs_chat = any(m.kind == "judge" for m in cfg.metrics)
    if mock:
        translators = {
            t.translator_id: (
                MockTranslator(
                    name=f"mock:{t.translator_id}",
                    seed=derive_seed(cfg.seed, t.translator_id),
                ),
                t.decoding,
            )
            for t in cfg.translators
        }
        chat = MockChat(seed=cfg.seed) if needs_chat else None
        return translators, MockScorer(), chat, MockScorer(name="mock-evaluator")

    translators = {}
    for t in cfg.translators if need_translators else ():
        if not t.endpoint:
            raise InvalidConfig(
                f"translator {t.translator_id!r} has no endpoint and --mock is off"
            )
        translators[t.translator_id] = (
            HttpTranslator(t.endpoint, name=t.translator_id, token_env=t.token_env),
            t.decoding,
        )
    if not cfg.scorer.endpoint:
        raise InvalidConfig("backends.scorer.endpoint is required without --mock")
    scorer = HttpScorer(cfg.scorer.endpoint, token_env=cfg.scorer.token_env)
    chat = None
    if needs_chat:
        if not cfg.chat.endpoint:
            raise InvalidConfig(
                "backends.chat.endpoint is required for judge metrics without --mock"
            )
        chat = HttpChat(cfg.chat.endpoint, token_env=cfg.chat.token_env)
    evaluator_cfg = cfg.evaluator if cfg.evaluator.endpoint else cfg.scorer
    evaluator_backend = HttpScorer(
        evaluator_cfg.endpoint, token_env=evaluator_cfg.token_env
    )
    return translators, scorer, chat, evaluator_backend
