"""Command-line interface: ingest a dataset, run a grid, rerank candidates.

Exit codes: 0 success, 2 input/config error, 3 backend error, 4 no valid
candidate.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict
from pathlib import Path

import click
import httpx

from . import config as config_mod
from . import dataset as dataset_mod
from .errors import (
    BackendRequestError,
    BackendUnreachable,
    DocQEError,
    EmptyInput,
    InvalidConfig,
    NoValidCandidate,
    ScoreCountMismatch,
)
from .harness import MetricSpec, budgets_from_stats, run_grid, score_pool_with_metric
from .mocks import MockChat, MockScorer
from .rerank import Candidate, CandidatePool, derive_seed, outcome_to_dict, select_best
from .report import compute_deltas, emit_report, measure_runtime
from .segmentation import segment

__all__ = ["main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_NO_CANDIDATE = 4

_BACKEND_ERRORS = (BackendUnreachable, BackendRequestError, ScoreCountMismatch)


def _exit_for(error: DocQEError) -> int:
    if isinstance(error, NoValidCandidate):
        return EXIT_NO_CANDIDATE
    if isinstance(error, _BACKEND_ERRORS):
        return EXIT_BACKEND
    return EXIT_INPUT


def _fail(error: DocQEError) -> None:
    click.echo(f"error: {error}", err=True)
    sys.exit(_exit_for(error))


def _parse_int_list(value: str | None) -> tuple[int, ...] | None:
    if value is None:
        return None
    try:
        return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise InvalidConfig(f"expected a comma-separated integer list, got {value!r}")


def _parse_str_list(value: str | None) -> tuple[str, ...] | None:
    if value is None:
        return None
    return tuple(part.strip() for part in value.split(",") if part.strip())


@click.group()
def main() -> None:
    """Document-level QE reranking toolkit."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(), help="Segment table (.tsv or .jsonl).")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory for corpus.jsonl and manifest.json.")
@click.option("--seed", default=0, show_default=True, help="Seed for the document/paragraph mix.")
@click.option("--bucket-edges", default=None, help="Comma-separated length-bucket edges.")
@click.option("--mix/--no-mix", default=True, show_default=True, help="Mix full documents with standalone paragraphs.")
def ingest(input_path: str, out_dir: str, seed: int, bucket_edges: str | None, mix: bool) -> None:
    """Merge a segment table into an experiment corpus."""
    try:
        records = dataset_mod.read_records(input_path)
        if not records:
            raise EmptyInput(f"no records in {input_path}")
        docs = dataset_mod.merge_segments(records)
        paragraphs = dataset_mod.paragraph_docs(records)
        mixed = mix and bool(paragraphs)
        corpus = dataset_mod.build_mix(docs, paragraphs, seed) if mixed else docs
        edges = _parse_int_list(bucket_edges) or dataset_mod.DEFAULT_BUCKET_EDGES
        corpus, excluded = dataset_mod.assign_buckets(corpus, edges)
        if not corpus:
            raise EmptyInput("every document fell outside the length buckets")
        stats = dataset_mod.corpus_stats(corpus)

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dataset_mod.write_corpus(corpus, out / "corpus.jsonl")
        dataset_mod.write_manifest(
            {
                "stats": stats,
                "bucket_edges": list(edges),
                "bucket_histogram": {
                    label: sum(1 for d in corpus if d.length_bucket == label)
                    for label in sorted({d.length_bucket for d in corpus})
                },
                "seed": seed,
                "mixed": mixed,
                "source_records": len(records),
                "excluded_docs": [d.doc_id for d in excluded],
            },
            out / "manifest.json",
        )
    except DocQEError as exc:
        _fail(exc)
    dataset_mod.print_stats(stats)
    if excluded:
        click.echo(f"excluded {len(excluded)} docs beyond the last bucket edge")
    click.echo(f"wrote {out / 'corpus.jsonl'} and {out / 'manifest.json'}")


def _probe_endpoints(endpoints: list[str]) -> None:
    """Fail fast with the offending endpoint before any grid work starts."""
    for endpoint in dict.fromkeys(endpoints):
        try:
            httpx.get(endpoint, timeout=5.0)
        except httpx.HTTPError as exc:
            raise BackendUnreachable(
                f"backend {endpoint} is unreachable: {exc}", endpoint=endpoint
            ) from exc


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Run configuration YAML.")
@click.option("--mock", is_flag=True, help="Use deterministic in-process mock backends.")
@click.option("--jobs", type=int, default=None, help="Concurrent (doc, translator) workers.")
@click.option("--pool-sizes", default=None, help="Comma-separated pool sizes (must include 1).")
@click.option("--metrics", default=None, help="Comma-separated metric ids to run.")
@click.option("--translators", default=None, help="Comma-separated translator ids to run.")
@click.option("--seed", type=int, default=None, help="Run seed override.")
@click.option("--out", "out_dir", default=None, type=click.Path(), help="Output directory override.")
def run(
    config_path: str,
    mock: bool,
    jobs: int | None,
    pool_sizes: str | None,
    metrics: str | None,
    translators: str | None,
    seed: int | None,
    out_dir: str | None,
) -> None:
    """Run the experiment grid described by a config file."""
    try:
        cfg = config_mod.parse_config(
            config_mod.load_config(config_path),
            overrides={
                "seed": seed,
                "pool_sizes": _parse_int_list(pool_sizes),
                "jobs": jobs,
                "out_dir": out_dir,
                "metrics": _parse_str_list(metrics),
                "translators": _parse_str_list(translators),
            },
        )
        corpus = dataset_mod.read_corpus(cfg.corpus)
        if not corpus:
            raise EmptyInput(f"corpus {cfg.corpus} is empty")
        corpus, excluded = dataset_mod.assign_buckets(corpus, cfg.bucket_edges)
        if not corpus:
            raise EmptyInput("every document fell outside the length buckets")
        budgets = {}
        if cfg.manifest:
            manifest = dataset_mod.read_manifest(cfg.manifest)
            budgets = budgets_from_stats(manifest.get("stats", {}))

        translator_rigs, scorer, chat, evaluator_backend = config_mod.build_backends(
            cfg, mock
        )
        if not mock:
            endpoints = [t.endpoint for t in cfg.translators if t.endpoint]
            if cfg.scorer.endpoint:
                endpoints.append(cfg.scorer.endpoint)
            if cfg.chat.endpoint and chat is not None:
                endpoints.append(cfg.chat.endpoint)
            if cfg.evaluator.endpoint:
                endpoints.append(cfg.evaluator.endpoint)
            _probe_endpoints(endpoints)

        # Only a viable run leaves artifacts; rejected configs and dead
        # backends exit without creating the output directory.
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        config_mod.write_canonical_config(cfg, out / "config.canonical.yaml")

        grid = run_grid(
            corpus,
            translator_rigs,
            cfg.metrics,
            cfg.evaluators,
            scorer,
            chat=chat,
            evaluator_backend=evaluator_backend,
            pool_sizes=cfg.pool_sizes,
            seed=cfg.seed,
            jobs=cfg.jobs,
            batch_limit=cfg.batch_limit,
            budgets=budgets,
        )
        if not grid.records:
            raise EmptyInput(
                "the grid produced no records; "
                f"{len(grid.failures)} cell failures (see manifest)"
            )
        rows = compute_deltas(grid.records)
        bucket_rows = compute_deltas(grid.records, by_bucket=True)
        runtime_rows = measure_runtime(grid.records)
        emit_report(rows, runtime_rows, out, bucket_rows)
        dataset_mod.write_manifest(
            {
                "config": config_mod.canonical_dict(cfg),
                "mock": mock,
                "docs": len(corpus),
                "excluded_docs": [d.doc_id for d in excluded],
                "records": len(grid.records),
                "failures": [asdict(f) for f in grid.failures],
            },
            out / "manifest.json",
        )
    except DocQEError as exc:
        _fail(exc)
    click.echo(
        f"grid complete: {len(grid.records)} records, "
        f"{len(grid.failures)} failures, outputs in {out}"
    )


def _read_jsonl(path: str, what: str) -> list[dict]:
    rows = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read {what} file {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}:{line_no}: bad JSON: {exc}") from exc
    return rows


@main.command()
@click.option("--sources", "sources_path", required=True, type=click.Path(), help="JSONL of {doc_id, text, src_lang, tgt_lang}.")
@click.option("--candidates", "candidates_path", required=True, type=click.Path(), help="JSONL of {doc_id, candidates: [...]}, aligned with --sources.")
@click.option("--metric", "metric_id", default=None, help="Metric id from the config; defaults to a full-document mock metric.")
@click.option("--config", "config_path", default=None, type=click.Path(), help="Run configuration YAML (for metrics and backends).")
@click.option("--mock", is_flag=True, help="Use deterministic in-process mock backends.")
@click.option("--seed", type=int, default=0, show_default=True, help="Tie-break seed.")
def rerank(
    sources_path: str,
    candidates_path: str,
    metric_id: str | None,
    config_path: str | None,
    mock: bool,
    seed: int,
) -> None:
    """Rerank candidate files without the full experiment harness."""
    try:
        sources = _read_jsonl(sources_path, "sources")
        candidate_rows = _read_jsonl(candidates_path, "candidates")
        if len(sources) != len(candidate_rows):
            raise InvalidConfig(
                f"{len(sources)} sources but {len(candidate_rows)} candidate rows"
            )
        for i, (source, row) in enumerate(zip(sources, candidate_rows)):
            if source.get("doc_id") != row.get("doc_id"):
                raise InvalidConfig(
                    f"row {i}: source doc {source.get('doc_id')!r} does not match "
                    f"candidates doc {row.get('doc_id')!r}"
                )
            if not row.get("candidates"):
                raise InvalidConfig(f"doc {source.get('doc_id')!r} has no candidates")

        metric_index: dict[str, MetricSpec] = {}
        if config_path is not None:
            cfg = config_mod.parse_config(config_mod.load_config(config_path))
            metric_index = {m.metric_id: m for m in cfg.metrics}
            _, scorer, chat, _ = config_mod.build_backends(
                cfg, mock, need_translators=False
            )
        else:
            if not mock:
                raise InvalidConfig("--config is required unless --mock is set")
            scorer, chat = MockScorer(), MockChat(seed=seed)
        if metric_id is None:
            metric = metric_index.get("full_doc") or MetricSpec(
                metric_id="full_doc", kind="learned", strategy="full_doc"
            )
        else:
            if metric_id not in metric_index:
                raise InvalidConfig(f"unknown metric {metric_id!r}")
            metric = metric_index[metric_id]
        fallback = (
            metric_index.get(metric.fallback_id) if metric.fallback_id else None
        )

        for source, row in zip(sources, candidate_rows):
            doc = dataset_mod.ExperimentDoc(
                doc_id=str(source["doc_id"]),
                granularity="full_document",
                src_text=str(source["text"]),
                ref_text="",
                src_lang=str(source.get("src_lang", "en")),
                tgt_lang=str(source.get("tgt_lang", "en")),
                src_token_count=0,
                src_sentence_count=0,
            )
            pool = CandidatePool(
                candidates=tuple(
                    Candidate(index=i, text=str(text))
                    for i, text in enumerate(row["candidates"])
                )
            )
            src_doc = segment(doc.src_text, doc.src_lang)
            cand_docs = [segment(c.text, doc.tgt_lang) for c in pool]
            scores, _ = score_pool_with_metric(
                metric, doc, src_doc, pool, cand_docs, scorer, chat,
                batch_limit=32, run_seed=seed, translator_id="rerank",
            )
            fallback_scores = None
            if fallback is not None and all(s.status == "discarded" for s in scores):
                fallback_scores, _ = score_pool_with_metric(
                    fallback, doc, src_doc, pool, cand_docs, scorer, chat,
                    batch_limit=32, run_seed=seed, translator_id="rerank",
                )
            outcome = select_best(
                scores,
                fallback_scores,
                seed=derive_seed(seed, doc.doc_id, metric.metric_id, len(pool)),
            )
            record = outcome_to_dict(
                outcome, chosen_text=pool.candidates[outcome.chosen_index].text
            )
            record["doc_id"] = doc.doc_id
            click.echo(json.dumps(record, ensure_ascii=False))
    except DocQEError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
