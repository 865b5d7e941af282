"""Aggregation and report emission for experiment grids.

Cell means are grouped by (metric, translator, pool size), optionally further
by length bucket, and compared against the pool-size-1 baseline of the same
group. Outputs are a block-structured CSV (metric rows x pool-size columns,
one scores block and one deltas block per translator/evaluator combination)
and a JSON plot-data file with three series families: score vs pool size,
score vs length bucket, and runtime vs pool size.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import EmptyInput, IoFailure, MissingBaseline
from .harness import ExperimentRecord

__all__ = [
    "ReportRow",
    "RuntimeRow",
    "compute_deltas",
    "measure_runtime",
    "emit_report",
    "build_plotdata",
]

BASELINE_POOL_SIZE = 1


@dataclass(frozen=True, slots=True)
class ReportRow:
    """Mean evaluator scores for one group, with deltas vs the baseline."""

    metric_id: str
    translator_id: str
    pool_size: int
    n: int
    means: Mapping[str, float]
    deltas: Mapping[str, float]
    bucket: str | None = None


@dataclass(frozen=True, slots=True)
class RuntimeRow:
    """Mean stage runtimes for one (translator, metric, pool size) group."""

    translator_id: str
    metric_id: str
    pool_size: int
    n: int
    generate_s: float
    qe_s: float
    evaluate_s: float
    qe_fraction: float


def _group_records(
    records: Sequence[ExperimentRecord], by_bucket: bool
) -> dict[tuple, list[ExperimentRecord]]:
    groups: dict[tuple, list[ExperimentRecord]] = {}
    for record in records:
        bucket = record.length_bucket if by_bucket else None
        key = (record.metric_id, record.translator_id, bucket, record.pool_size)
        groups.setdefault(key, []).append(record)
    return groups


def _evaluator_means(group: list[ExperimentRecord]) -> dict[str, float]:
    names = sorted(group[0].eval_scores)
    return {
        name: statistics.mean(r.eval_scores[name] for r in group) for name in names
    }


def compute_deltas(
    records: Sequence[ExperimentRecord], by_bucket: bool = False
) -> list[ReportRow]:
    """Group means plus their deltas against the pool-size-1 baseline.

    Every (metric, translator[, bucket]) group must contain pool size 1;
    otherwise MissingBaseline names the group. Baseline rows have delta 0.
    """
    if not records:
        raise EmptyInput("no records to aggregate")
    groups = _group_records(records, by_bucket)
    baselines: dict[tuple, dict[str, float]] = {}
    for (metric_id, translator_id, bucket, pool_size), group in groups.items():
        if pool_size == BASELINE_POOL_SIZE:
            baselines[(metric_id, translator_id, bucket)] = _evaluator_means(group)
    rows = []
    for (metric_id, translator_id, bucket, pool_size), group in sorted(
        groups.items(), key=lambda item: (item[0][0], item[0][1], item[0][2] or "", item[0][3])
    ):
        baseline = baselines.get((metric_id, translator_id, bucket))
        if baseline is None:
            raise MissingBaseline(
                f"no pool-size-{BASELINE_POOL_SIZE} baseline for metric "
                f"{metric_id!r} translator {translator_id!r} bucket {bucket!r}"
            )
        means = _evaluator_means(group)
        rows.append(
            ReportRow(
                metric_id=metric_id,
                translator_id=translator_id,
                pool_size=pool_size,
                n=len(group),
                means=means,
                deltas={name: means[name] - baseline[name] for name in means},
                bucket=bucket,
            )
        )
    return rows


def measure_runtime(records: Sequence[ExperimentRecord]) -> list[RuntimeRow]:
    """Mean per-stage runtimes and the QE share of generation+QE time.

    The share is 0 when both stages took no time at all.
    """
    if not records:
        raise EmptyInput("no records to aggregate")
    groups: dict[tuple, list[ExperimentRecord]] = {}
    for record in records:
        key = (record.translator_id, record.metric_id, record.pool_size)
        groups.setdefault(key, []).append(record)
    rows = []
    for (translator_id, metric_id, pool_size), group in sorted(groups.items()):
        generate_s = statistics.mean(r.runtimes.get("generate", 0.0) for r in group)
        qe_s = statistics.mean(r.runtimes.get("qe", 0.0) for r in group)
        evaluate_s = statistics.mean(r.runtimes.get("evaluate", 0.0) for r in group)
        denominator = generate_s + qe_s
        rows.append(
            RuntimeRow(
                translator_id=translator_id,
                metric_id=metric_id,
                pool_size=pool_size,
                n=len(group),
                generate_s=generate_s,
                qe_s=qe_s,
                evaluate_s=evaluate_s,
                qe_fraction=qe_s / denominator if denominator > 0 else 0.0,
            )
        )
    return rows


def _format(value: float) -> str:
    return f"{value:.6f}"


def _csv_blocks(rows: Sequence[ReportRow]) -> list[list[list[str]]]:
    """Table-1-style blocks: per (translator, evaluator), metrics x pools."""
    pool_sizes = sorted({row.pool_size for row in rows})
    metric_ids = sorted({row.metric_id for row in rows})
    translator_ids = sorted({row.translator_id for row in rows})
    evaluator_ids = sorted({name for row in rows for name in row.means})
    by_key = {
        (row.translator_id, row.metric_id, row.pool_size): row for row in rows
    }
    header = ["metric"] + [f"pool_{n}" for n in pool_sizes]
    blocks = []
    for translator_id in translator_ids:
        for evaluator_id in evaluator_ids:
            for table, attribute in (("scores", "means"), ("deltas", "deltas")):
                block = [
                    [f"# translator={translator_id} evaluator={evaluator_id} table={table}"],
                    header,
                ]
                for metric_id in metric_ids:
                    line = [metric_id]
                    for pool_size in pool_sizes:
                        row = by_key.get((translator_id, metric_id, pool_size))
                        if row is None or evaluator_id not in getattr(row, attribute):
                            line.append("")
                        else:
                            line.append(_format(getattr(row, attribute)[evaluator_id]))
                    block.append(line)
                blocks.append(block)
    return blocks


def build_plotdata(
    rows: Sequence[ReportRow],
    runtime_rows: Sequence[RuntimeRow],
    bucket_rows: Sequence[ReportRow] = (),
) -> dict:
    """Series for the three standard plots.

    score_vs_pool has one series per (metric, translator). score_vs_length
    has one series per metric at the largest pool size, averaged across
    translators within each bucket. runtime has one series per
    (translator, metric).
    """
    score_vs_pool = []
    for (metric_id, translator_id) in sorted(
        {(r.metric_id, r.translator_id) for r in rows}
    ):
        points = [
            {
                "pool_size": row.pool_size,
                "n": row.n,
                "means": dict(row.means),
                "deltas": dict(row.deltas),
            }
            for row in sorted(rows, key=lambda r: r.pool_size)
            if row.metric_id == metric_id and row.translator_id == translator_id
        ]
        score_vs_pool.append(
            {"metric": metric_id, "translator": translator_id, "points": points}
        )

    score_vs_length = []
    if bucket_rows:
        max_pool = max(row.pool_size for row in bucket_rows)
        for metric_id in sorted({row.metric_id for row in bucket_rows}):
            buckets: dict[str, list[ReportRow]] = {}
            for row in bucket_rows:
                if row.metric_id == metric_id and row.pool_size == max_pool:
                    buckets.setdefault(row.bucket or "", []).append(row)
            points = []
            for bucket in sorted(buckets, key=lambda b: int(b.split("-")[0])):
                group = buckets[bucket]
                names = sorted(group[0].means)
                points.append(
                    {
                        "bucket": bucket,
                        "n": sum(row.n for row in group),
                        "means": {
                            name: statistics.mean(row.means[name] for row in group)
                            for name in names
                        },
                        "deltas": {
                            name: statistics.mean(row.deltas[name] for row in group)
                            for name in names
                        },
                    }
                )
            score_vs_length.append(
                {"metric": metric_id, "pool_size": max_pool, "points": points}
            )

    runtime = []
    for (translator_id, metric_id) in sorted(
        {(r.translator_id, r.metric_id) for r in runtime_rows}
    ):
        points = [
            {
                "pool_size": row.pool_size,
                "generate_s": row.generate_s,
                "qe_s": row.qe_s,
                "evaluate_s": row.evaluate_s,
                "qe_fraction": row.qe_fraction,
            }
            for row in sorted(runtime_rows, key=lambda r: r.pool_size)
            if row.translator_id == translator_id and row.metric_id == metric_id
        ]
        runtime.append(
            {"translator": translator_id, "metric": metric_id, "points": points}
        )

    return {
        "score_vs_pool": score_vs_pool,
        "score_vs_length": score_vs_length,
        "runtime": runtime,
    }


def emit_report(
    rows: Sequence[ReportRow],
    runtime_rows: Sequence[RuntimeRow],
    out_dir: str | Path,
    bucket_rows: Sequence[ReportRow] = (),
) -> dict[str, Path]:
    """Write report.csv and plotdata.json; returns the written paths."""
    out = Path(out_dir)
    report_path = out / "report.csv"
    plot_path = out / "plotdata.json"
    plotdata = build_plotdata(rows, runtime_rows, bucket_rows)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            for i, block in enumerate(_csv_blocks(rows)):
                if i:
                    writer.writerow([])
                for line in block:
                    writer.writerow(line)
        with open(plot_path, "w", encoding="utf-8") as handle:
            json.dump(plotdata, handle, indent=2, sort_keys=True, ensure_ascii=False)
            handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write report files in {out}: {exc}") from exc
    return {"report": report_path, "plotdata": plot_path}
