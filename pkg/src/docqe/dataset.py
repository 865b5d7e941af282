"""Dataset ingestion: segment merging, document/paragraph mixing, bucketing.

Input is a WMT-style segment table (TSV with a header, or JSONL) where each
row is one segment of a document at a declared level. Segments merge back
into full documents in segment-index order; paragraph-level rows double as
standalone paragraph items for the balanced document/paragraph mix.
"""

from __future__ import annotations

import csv
import json
import random
import statistics
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .errors import DatasetError, EmptyInput, InvalidConfig, IoFailure, MissingReference
from .lang import approx_token_count, joiner
from .segmentation import segment

__all__ = [
    "Level",
    "SourceRecord",
    "ExperimentDoc",
    "DEFAULT_BUCKET_EDGES",
    "merge_segments",
    "paragraph_docs",
    "build_mix",
    "bucket_by_length",
    "bucket_label",
    "corpus_stats",
    "read_records",
    "read_corpus",
    "write_corpus",
    "write_manifest",
    "read_manifest",
]

DEFAULT_BUCKET_EDGES = (0, 32, 64, 128, 256, 512, 1024)

_RECORD_FIELDS = (
    "doc_id",
    "segment_index",
    "level",
    "src_text",
    "ref_text",
    "src_lang",
    "tgt_lang",
)


class Level:
    SENTENCE = "sentence"
    PARAGRAPH = "paragraph"
    DOCUMENT = "document"

    ALL = (SENTENCE, PARAGRAPH, DOCUMENT)


@dataclass(frozen=True, slots=True)
class SourceRecord:
    """One segment row of the input dataset."""

    doc_id: str
    segment_index: int
    level: str
    src_text: str
    ref_text: str
    src_lang: str
    tgt_lang: str

    def __post_init__(self) -> None:
        if self.level not in Level.ALL:
            raise DatasetError(
                f"doc {self.doc_id!r}: unknown segment level {self.level!r}"
            )
        if self.segment_index < 0:
            raise DatasetError(f"doc {self.doc_id!r}: negative segment_index")


@dataclass(frozen=True, slots=True)
class ExperimentDoc:
    """One unit of the experiment corpus: a full document or a paragraph."""

    doc_id: str
    granularity: str
    src_text: str
    ref_text: str
    src_lang: str
    tgt_lang: str
    src_token_count: int
    src_sentence_count: int
    length_bucket: str | None = None


def _doc_from_text(
    doc_id: str,
    granularity: str,
    src_text: str,
    ref_text: str,
    src_lang: str,
    tgt_lang: str,
) -> ExperimentDoc:
    return ExperimentDoc(
        doc_id=doc_id,
        granularity=granularity,
        src_text=src_text,
        ref_text=ref_text,
        src_lang=src_lang,
        tgt_lang=tgt_lang,
        src_token_count=approx_token_count(src_text, src_lang),
        src_sentence_count=len(segment(src_text, src_lang)),
    )


def _check_reference(record: SourceRecord) -> None:
    if not record.ref_text.strip():
        raise MissingReference(
            f"doc {record.doc_id!r} segment {record.segment_index} has no reference"
        )


def _separator(prev: SourceRecord, nxt: SourceRecord, lang: str) -> str:
    if Level.PARAGRAPH in (prev.level, nxt.level):
        return "\n\n"
    return joiner(lang)


def merge_segments(records: list[SourceRecord]) -> list[ExperimentDoc]:
    """Merge segments into full documents in segment-index order.

    Sentence-level segments join with the language's sentence joiner;
    paragraph boundaries become blank lines; a document-level record passes
    through. Duplicate (doc_id, segment_index) rows and missing references
    are dataset errors.
    """
    if not records:
        raise EmptyInput("no records to merge")
    groups: dict[str, list[SourceRecord]] = {}
    for record in records:
        _check_reference(record)
        groups.setdefault(record.doc_id, []).append(record)
    docs = []
    for doc_id in sorted(groups):
        group = sorted(groups[doc_id], key=lambda r: r.segment_index)
        seen = {r.segment_index for r in group}
        if len(seen) != len(group):
            raise DatasetError(f"doc {doc_id!r} has duplicate segment indices")
        src_parts = [group[0].src_text]
        ref_parts = [group[0].ref_text]
        for prev, nxt in zip(group, group[1:]):
            src_parts.extend((_separator(prev, nxt, prev.src_lang), nxt.src_text))
            ref_parts.extend((_separator(prev, nxt, prev.tgt_lang), nxt.ref_text))
        docs.append(
            _doc_from_text(
                doc_id=doc_id,
                granularity="full_document",
                src_text="".join(src_parts),
                ref_text="".join(ref_parts),
                src_lang=group[0].src_lang,
                tgt_lang=group[0].tgt_lang,
            )
        )
    return docs


def paragraph_docs(records: list[SourceRecord]) -> list[ExperimentDoc]:
    """Every paragraph-level segment as a standalone corpus item."""
    docs = []
    for record in records:
        if record.level != Level.PARAGRAPH:
            continue
        _check_reference(record)
        docs.append(
            _doc_from_text(
                doc_id=f"{record.doc_id}.p{record.segment_index}",
                granularity="paragraph",
                src_text=record.src_text,
                ref_text=record.ref_text,
                src_lang=record.src_lang,
                tgt_lang=record.tgt_lang,
            )
        )
    return docs


def build_mix(
    docs: list[ExperimentDoc], paragraphs: list[ExperimentDoc], seed: int
) -> list[ExperimentDoc]:
    """Balanced 50/50 interleaving of documents and paragraphs.

    The mix is capped at twice the smaller side: a seeded sample of that many
    items is drawn from each side, then the sides alternate starting with a
    document.
    """
    if not docs or not paragraphs:
        raise EmptyInput("both documents and paragraphs are required for a mix")
    cap = min(len(docs), len(paragraphs))
    rng = random.Random(seed)
    chosen_docs = rng.sample(docs, cap)
    chosen_paragraphs = rng.sample(paragraphs, cap)
    mixed = []
    for doc, paragraph in zip(chosen_docs, chosen_paragraphs):
        mixed.extend((doc, paragraph))
    return mixed


def bucket_label(lo: int, hi: int) -> str:
    return f"{lo}-{hi}"


def bucket_by_length(
    docs: list[ExperimentDoc],
    edges: tuple[int, ...] = DEFAULT_BUCKET_EDGES,
) -> tuple[dict[str, list[ExperimentDoc]], list[ExperimentDoc]]:
    """Group docs into half-open source-token buckets [lo, hi).

    Returns (buckets, excluded): docs at or past the last edge are excluded
    and reported back rather than silently dropped. Bucketed docs come back
    with their length_bucket label filled in; only non-empty buckets appear.
    """
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise InvalidConfig(f"bucket edges must be strictly increasing, got {edges}")
    filled: dict[str, list[ExperimentDoc]] = {}
    excluded: list[ExperimentDoc] = []
    for doc in docs:
        tokens = doc.src_token_count
        if tokens >= edges[-1] or tokens < edges[0]:
            excluded.append(doc)
            continue
        for lo, hi in zip(edges, edges[1:]):
            if lo <= tokens < hi:
                label = bucket_label(lo, hi)
                filled.setdefault(label, []).append(replace(doc, length_bucket=label))
                break
    buckets = {
        bucket_label(lo, hi): filled[bucket_label(lo, hi)]
        for lo, hi in zip(edges, edges[1:])
        if bucket_label(lo, hi) in filled
    }
    return buckets, excluded


def assign_buckets(
    docs: list[ExperimentDoc],
    edges: tuple[int, ...] = DEFAULT_BUCKET_EDGES,
) -> tuple[list[ExperimentDoc], list[ExperimentDoc]]:
    """Bucket docs while preserving corpus order; returns (kept, excluded)."""
    buckets, excluded = bucket_by_length(docs, edges)
    labeled = {
        doc.doc_id: doc for group in buckets.values() for doc in group
    }
    excluded_ids = {doc.doc_id for doc in excluded}
    kept = [labeled[doc.doc_id] for doc in docs if doc.doc_id not in excluded_ids]
    return kept, excluded


def corpus_stats(docs: list[ExperimentDoc]) -> dict:
    """Summary statistics plus per-language-pair token-mean ratios."""
    if not docs:
        raise EmptyInput("no documents to summarize")
    pairs: dict[str, dict[str, list[int]]] = {}
    for doc in docs:
        key = f"{doc.src_lang}-{doc.tgt_lang}"
        sides = pairs.setdefault(key, {"src": [], "tgt": []})
        sides["src"].append(doc.src_token_count)
        sides["tgt"].append(approx_token_count(doc.ref_text, doc.tgt_lang))
    return {
        "documents": len(docs),
        "by_granularity": {
            granularity: sum(1 for d in docs if d.granularity == granularity)
            for granularity in sorted({d.granularity for d in docs})
        },
        "mean_sentences": statistics.mean(d.src_sentence_count for d in docs),
        "mean_src_tokens": statistics.mean(d.src_token_count for d in docs),
        "token_means": {
            key: {
                "mu_src": statistics.mean(sides["src"]),
                "mu_tgt": statistics.mean(sides["tgt"]),
            }
            for key, sides in sorted(pairs.items())
        },
    }


def _record_from_row(row: dict, where: str) -> SourceRecord:
    missing = [name for name in _RECORD_FIELDS if row.get(name) in (None, "")]
    if "ref_text" in missing:
        missing.remove("ref_text")
        row = {**row, "ref_text": ""}
    if missing:
        raise DatasetError(f"{where}: missing fields {missing}")
    try:
        index = int(row["segment_index"])
    except (TypeError, ValueError):
        raise DatasetError(f"{where}: segment_index is not an integer") from None
    return SourceRecord(
        doc_id=str(row["doc_id"]),
        segment_index=index,
        level=str(row["level"]),
        src_text=str(row["src_text"]),
        ref_text=str(row["ref_text"]),
        src_lang=str(row["src_lang"]),
        tgt_lang=str(row["tgt_lang"]),
    )


def read_records(path: str | Path) -> list[SourceRecord]:
    """Read segment records from a .tsv (with header) or .jsonl file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    records = []
    if path.suffix.lower() == ".tsv":
        reader = csv.DictReader(text.splitlines(), delimiter="\t")
        for line_no, row in enumerate(reader, start=2):
            records.append(_record_from_row(row, f"{path.name}:{line_no}"))
    else:
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path.name}:{line_no}: bad JSON: {exc}") from exc
            records.append(_record_from_row(row, f"{path.name}:{line_no}"))
    return records


def write_corpus(docs: list[ExperimentDoc], path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for doc in docs:
                handle.write(json.dumps(asdict(doc), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_corpus(path: str | Path) -> list[ExperimentDoc]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    docs = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            docs.append(ExperimentDoc(**json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            raise DatasetError(f"{path}:{line_no}: bad corpus line: {exc}") from exc
    return docs


def write_manifest(manifest: dict, path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True, ensure_ascii=False)
            handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_manifest(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: bad manifest JSON: {exc}") from exc


def print_stats(stats: dict, stream=None) -> None:
    """Human-readable dataset summary for the ingest command."""
    stream = stream or sys.stdout
    print(f"documents: {stats['documents']}", file=stream)
    for granularity, count in stats["by_granularity"].items():
        print(f"  {granularity}: {count}", file=stream)
    print(f"mean sentences per doc: {stats['mean_sentences']:.2f}", file=stream)
    print(f"mean source tokens per doc: {stats['mean_src_tokens']:.2f}", file=stream)
    for pair, means in stats["token_means"].items():
        print(
            f"token means {pair}: src {means['mu_src']:.1f} tgt {means['mu_tgt']:.1f}",
            file=stream,
        )
