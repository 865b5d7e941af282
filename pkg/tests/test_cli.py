"""Command-line behavior plus configuration parsing and CLI overrides."""

from __future__ import annotations

import json

import pytest
import yaml
from click.testing import CliRunner

from docqe.cli import main
from docqe.config import (
    build_backends,
    canonical_dict,
    load_config,
    parse_config,
    write_canonical_config,
)
from docqe.errors import InvalidConfig
from docqe.mocks import stable_unit_score

runner = CliRunner()


def seg_row(doc_id, index, src, ref, level="sentence"):
    return {
        "doc_id": doc_id,
        "segment_index": index,
        "level": level,
        "src_text": src,
        "ref_text": ref,
        "src_lang": "en",
        "tgt_lang": "ja",
    }


SAMPLE_ROWS = [
    seg_row("doc-a", 0, "The meeting starts at nine.", "会議は九時に始まる。"),
    seg_row("doc-a", 1, "Please arrive early.", "早めに来てください。"),
    seg_row("doc-b", 0, "The report is ready.", "報告書は完成した。"),
    seg_row("doc-b", 1, "It covers the full year.", "一年間全体を対象とする。"),
    seg_row("doc-b", 2, "Results improved again.", "結果は再び改善した。"),
]


def write_jsonl(path, rows):
    path.write_text(
        "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows),
        encoding="utf-8",
    )
    return path


def raw_config(corpus, **run_keys):
    return {
        "dataset": {"corpus": str(corpus)},
        "run": {"seed": 7, "pool_sizes": [1, 2, 4], **run_keys},
        "translators": [
            {"id": "mt-a", "decoding": {"strategy": "nucleus", "p": 0.9, "temperature": 0.6}},
            {"id": "mt-b", "decoding": {"strategy": "epsilon", "epsilon": 0.02, "temperature": 0.5}},
        ],
        "metrics": [
            {"id": "kiwi", "kind": "learned", "strategy": "full_doc", "model": "wmt22-qe"},
            {"id": "gemba", "kind": "judge", "judge": {"metric_kind": "gemba_da"}, "fallback": "kiwi"},
        ],
        "evaluators": [{"id": "ev", "model": "ev-model"}],
    }


def write_config(path, raw):
    path.write_text(yaml.safe_dump(raw, allow_unicode=True), encoding="utf-8")
    return path


def ingest_sample(tmp_path, rows=SAMPLE_ROWS):
    data = write_jsonl(tmp_path / "segments.jsonl", rows)
    out = tmp_path / "dataset"
    result = runner.invoke(main, ["ingest", "--input", str(data), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


class TestLoadConfig:
    def test_reads_a_yaml_mapping(self, tmp_path):
        path = write_config(tmp_path / "run.yaml", {"run": {"seed": 3}})
        assert load_config(path) == {"run": {"seed": 3}}

    def test_rejects_invalid_yaml(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("run: [unclosed", encoding="utf-8")
        with pytest.raises(InvalidConfig, match="not valid YAML"):
            load_config(path)

    def test_rejects_a_non_mapping_document(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("- just\n- a\n- list\n", encoding="utf-8")
        with pytest.raises(InvalidConfig, match="mapping at the top level"):
            load_config(path)


class TestParseConfig:
    def test_minimal_config_fills_defaults(self):
        cfg = parse_config(
            {
                "dataset": {"corpus": "c.jsonl"},
                "translators": [
                    {"id": "t", "decoding": {"strategy": "nucleus", "p": 0.9, "temperature": 1.0}}
                ],
                "metrics": [{"id": "m", "kind": "learned", "strategy": "full_doc"}],
                "evaluators": [{"id": "ev"}],
            }
        )
        assert cfg.out_dir == "out"
        assert cfg.seed == 0
        assert cfg.jobs == 1
        assert cfg.batch_limit == 32
        assert 1 in cfg.pool_sizes
        assert len(cfg.bucket_edges) >= 2

    def test_missing_corpus_is_rejected(self):
        raw = raw_config("c.jsonl")
        del raw["dataset"]["corpus"]
        with pytest.raises(InvalidConfig, match="corpus"):
            parse_config(raw)

    def test_pool_sizes_must_include_the_baseline(self):
        with pytest.raises(InvalidConfig, match="must include 1"):
            parse_config(raw_config("c.jsonl", pool_sizes=[2, 4]))

    def test_pool_sizes_below_one_are_rejected(self):
        with pytest.raises(InvalidConfig, match=">= 1"):
            parse_config(raw_config("c.jsonl", pool_sizes=[0, 1]))

    def test_duplicate_pool_sizes_are_rejected(self):
        with pytest.raises(InvalidConfig, match="duplicate pool sizes"):
            parse_config(raw_config("c.jsonl", pool_sizes=[1, 2, 2]))

    def test_duplicate_translator_ids_are_rejected(self):
        raw = raw_config("c.jsonl")
        raw["translators"][1]["id"] = "mt-a"
        with pytest.raises(InvalidConfig, match="translator ids must be unique"):
            parse_config(raw)

    def test_duplicate_metric_ids_are_rejected(self):
        raw = raw_config("c.jsonl")
        raw["metrics"][1]["id"] = "kiwi"
        with pytest.raises(InvalidConfig, match="metric ids must be unique"):
            parse_config(raw)

    def test_unknown_decoding_keys_are_named(self):
        raw = raw_config("c.jsonl")
        raw["translators"][0]["decoding"]["top_k"] = 40
        with pytest.raises(InvalidConfig, match="top_k"):
            parse_config(raw)

    def test_fallback_must_name_a_configured_metric(self):
        raw = raw_config("c.jsonl")
        raw["metrics"][1]["fallback"] = "nonexistent"
        with pytest.raises(InvalidConfig, match="unknown metric 'nonexistent'"):
            parse_config(raw)

    def test_empty_sections_are_rejected(self):
        for section in ("translators", "metrics", "evaluators"):
            raw = raw_config("c.jsonl")
            raw[section] = []
            with pytest.raises(InvalidConfig, match="at least one"):
                parse_config(raw)

    def test_metric_filter_keeps_the_fallback_target(self):
        # Selecting only the judge metric must still load its fallback.
        cfg = parse_config(raw_config("c.jsonl"), overrides={"metrics": ("gemba",)})
        assert sorted(m.metric_id for m in cfg.metrics) == ["gemba", "kiwi"]

    def test_metric_filter_rejects_unknown_ids(self):
        with pytest.raises(InvalidConfig, match="unknown metrics"):
            parse_config(raw_config("c.jsonl"), overrides={"metrics": ("nope",)})

    def test_translator_filter_selects_a_subset(self):
        cfg = parse_config(raw_config("c.jsonl"), overrides={"translators": ("mt-b",)})
        assert [t.translator_id for t in cfg.translators] == ["mt-b"]

    def test_translator_filter_rejects_unknown_ids(self):
        with pytest.raises(InvalidConfig, match="unknown translators"):
            parse_config(raw_config("c.jsonl"), overrides={"translators": ("mt-z",)})

    def test_overrides_replace_run_settings(self):
        cfg = parse_config(
            raw_config("c.jsonl"),
            overrides={"seed": 99, "pool_sizes": (1, 8), "jobs": 4, "out_dir": "elsewhere"},
        )
        assert cfg.seed == 99
        assert cfg.pool_sizes == (1, 8)
        assert cfg.jobs == 4
        assert cfg.out_dir == "elsewhere"

    def test_bucket_edges_must_increase(self):
        with pytest.raises(InvalidConfig, match="strictly increasing"):
            parse_config(raw_config("c.jsonl", bucket_edges=[32, 32, 64]))

    def test_canonical_form_is_a_fixed_point(self, tmp_path):
        # Reparsing the canonical dump must not change the configuration.
        cfg = parse_config(raw_config("c.jsonl"))
        path = tmp_path / "canonical.yaml"
        write_canonical_config(cfg, path)
        reparsed = parse_config(load_config(path))
        assert canonical_dict(reparsed) == canonical_dict(cfg)


class TestIngestCommand:
    def test_writes_corpus_and_manifest(self, tmp_path):
        out = ingest_sample(tmp_path)
        corpus_lines = [
            json.loads(line)
            for line in (out / "corpus.jsonl").read_text(encoding="utf-8").splitlines()
        ]
        assert len(corpus_lines) >= 2
        assert {"doc-a", "doc-b"} <= {d["doc_id"] for d in corpus_lines}
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["source_records"] == len(SAMPLE_ROWS)
        assert manifest["seed"] == 0
        assert sum(manifest["bucket_histogram"].values()) == len(corpus_lines)
        assert manifest["stats"]["documents"] == len(corpus_lines)

    def test_reports_written_paths(self, tmp_path):
        data = write_jsonl(tmp_path / "segments.jsonl", SAMPLE_ROWS)
        result = runner.invoke(
            main, ["ingest", "--input", str(data), "--out", str(tmp_path / "d")]
        )
        assert result.exit_code == 0
        assert "corpus.jsonl" in result.output
        assert "manifest.json" in result.output

    def test_empty_input_exits_with_input_error(self, tmp_path):
        data = tmp_path / "segments.jsonl"
        data.write_text("", encoding="utf-8")
        result = runner.invoke(
            main, ["ingest", "--input", str(data), "--out", str(tmp_path / "d")]
        )
        assert result.exit_code == 2
        assert "no records" in result.stderr

    def test_missing_reference_names_the_document(self, tmp_path):
        rows = [seg_row("doc-bad", 0, "Hello there.", "")]
        data = write_jsonl(tmp_path / "segments.jsonl", rows)
        result = runner.invoke(
            main, ["ingest", "--input", str(data), "--out", str(tmp_path / "d")]
        )
        assert result.exit_code == 2
        assert "doc-bad" in result.stderr

    def test_tsv_and_jsonl_inputs_produce_identical_corpora(self, tmp_path):
        fields = list(SAMPLE_ROWS[0])
        tsv = tmp_path / "segments.tsv"
        tsv.write_text(
            "\t".join(fields)
            + "\n"
            + "".join(
                "\t".join(str(row[f]) for f in fields) + "\n" for row in SAMPLE_ROWS
            ),
            encoding="utf-8",
        )
        jsonl_out = ingest_sample(tmp_path)
        tsv_out = tmp_path / "dataset-tsv"
        result = runner.invoke(main, ["ingest", "--input", str(tsv), "--out", str(tsv_out)])
        assert result.exit_code == 0
        assert (tsv_out / "corpus.jsonl").read_bytes() == (
            jsonl_out / "corpus.jsonl"
        ).read_bytes()

    def test_single_bucket_edge_exits_with_input_error(self, tmp_path):
        data = write_jsonl(tmp_path / "segments.jsonl", SAMPLE_ROWS)
        result = runner.invoke(
            main,
            ["ingest", "--input", str(data), "--out", str(tmp_path / "d"), "--bucket-edges", "8"],
        )
        assert result.exit_code == 2

    def test_seed_changes_are_recorded(self, tmp_path):
        data = write_jsonl(tmp_path / "segments.jsonl", SAMPLE_ROWS)
        out = tmp_path / "d"
        result = runner.invoke(
            main, ["ingest", "--input", str(data), "--out", str(out), "--seed", "5"]
        )
        assert result.exit_code == 0
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["seed"] == 5


class TestRunCommand:
    def run_mock(self, tmp_path, raw=None, extra=()):
        dataset = ingest_sample(tmp_path)
        raw = raw or raw_config(dataset / "corpus.jsonl")
        raw.setdefault("dataset", {})["manifest"] = str(dataset / "manifest.json")
        cfg = write_config(tmp_path / "run.yaml", raw)
        out = tmp_path / "results"
        args = ["run", "--config", str(cfg), "--mock", "--out", str(out), *extra]
        return runner.invoke(main, args), out

    def test_mock_run_writes_all_outputs(self, tmp_path):
        result, out = self.run_mock(tmp_path)
        assert result.exit_code == 0, result.output
        for name in ("report.csv", "plotdata.json", "manifest.json", "config.canonical.yaml"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["mock"] is True
        assert manifest["failures"] == []
        # Full grid: docs x translators x metrics x pool sizes.
        assert manifest["records"] == manifest["docs"] * 2 * 2 * 3
        assert "grid complete" in result.output

    def test_pool_size_one_yields_zero_deltas(self, tmp_path):
        result, out = self.run_mock(tmp_path, extra=("--pool-sizes", "1"))
        assert result.exit_code == 0, result.output
        plot = json.loads((out / "plotdata.json").read_text(encoding="utf-8"))
        for series in plot["score_vs_pool"]:
            for point in series["points"]:
                assert point["pool_size"] == 1
                assert all(delta == 0.0 for delta in point["deltas"].values())

    def test_metric_filter_runs_the_fallback_too(self, tmp_path):
        result, out = self.run_mock(tmp_path, extra=("--metrics", "gemba"))
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        config_metrics = [m["id"] for m in manifest["config"]["metrics"]]
        assert sorted(config_metrics) == ["gemba", "kiwi"]

    def test_invalid_pool_sizes_in_config_exit_with_input_error(self, tmp_path):
        dataset = ingest_sample(tmp_path)
        raw = raw_config(dataset / "corpus.jsonl", pool_sizes=[2, 4])
        cfg = write_config(tmp_path / "run.yaml", raw)
        result = runner.invoke(main, ["run", "--config", str(cfg), "--mock"])
        assert result.exit_code == 2
        assert "must include 1" in result.stderr

    def test_missing_corpus_exits_with_input_error(self, tmp_path):
        cfg = write_config(tmp_path / "run.yaml", raw_config(tmp_path / "absent.jsonl"))
        result = runner.invoke(main, ["run", "--config", str(cfg), "--mock"])
        assert result.exit_code == 2
        assert "cannot read" in result.stderr

    def test_empty_corpus_exits_with_input_error(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text("", encoding="utf-8")
        cfg = write_config(tmp_path / "run.yaml", raw_config(corpus))
        result = runner.invoke(main, ["run", "--config", str(cfg), "--mock"])
        assert result.exit_code == 2
        assert "empty" in result.stderr

    def test_unreachable_backend_exits_naming_the_endpoint(self, tmp_path):
        # Real mode probes endpoints before any work; a dead port must fail
        # fast with a backend error, not hang in the grid.
        dataset = ingest_sample(tmp_path)
        dead = "http://127.0.0.1:9/"
        raw = raw_config(dataset / "corpus.jsonl", out_dir=str(tmp_path / "results"))
        raw["metrics"] = [raw["metrics"][0]]
        for translator in raw["translators"]:
            translator["endpoint"] = dead
        raw["backends"] = {"scorer": {"endpoint": dead}}
        cfg = write_config(tmp_path / "run.yaml", raw)
        result = runner.invoke(main, ["run", "--config", str(cfg)])
        assert result.exit_code == 3
        assert "127.0.0.1:9" in result.stderr

    def test_real_mode_requires_scorer_endpoint(self, tmp_path):
        dataset = ingest_sample(tmp_path)
        raw = raw_config(dataset / "corpus.jsonl")
        raw["metrics"] = [raw["metrics"][0]]
        for translator in raw["translators"]:
            translator["endpoint"] = "http://127.0.0.1:9/"
        cfg = write_config(tmp_path / "run.yaml", raw)
        result = runner.invoke(main, ["run", "--config", str(cfg)])
        assert result.exit_code == 2
        assert "scorer.endpoint" in result.stderr


class TestRerankCommand:
    SOURCES = [
        {"doc_id": "d1", "text": "The cat sat on the mat.", "src_lang": "en", "tgt_lang": "ja"},
        {"doc_id": "d2", "text": "Rain is expected tomorrow.", "src_lang": "en", "tgt_lang": "ja"},
    ]
    CANDIDATES = [
        {"doc_id": "d1", "candidates": ["猫はマットに座った。", "猫がマットの上に座った。", "ネコはマットに座る。"]},
        {"doc_id": "d2", "candidates": ["明日は雨が予想される。", "明日、雨が降るでしょう。"]},
    ]

    def invoke_rerank(self, tmp_path, sources=None, candidates=None, extra=("--mock",)):
        src = write_jsonl(tmp_path / "sources.jsonl", sources or self.SOURCES)
        cand = write_jsonl(tmp_path / "candidates.jsonl", candidates or self.CANDIDATES)
        return runner.invoke(
            main,
            ["rerank", "--sources", str(src), "--candidates", str(cand), *extra],
        )

    def test_picks_the_highest_scoring_candidate(self, tmp_path):
        result = self.invoke_rerank(tmp_path)
        assert result.exit_code == 0, result.output
        lines = [json.loads(line) for line in result.output.splitlines()]
        assert [r["doc_id"] for r in lines] == ["d1", "d2"]
        for source, row, record in zip(self.SOURCES, self.CANDIDATES, lines):
            # The mock scorer is a stable hash, so the winner is computable.
            expected = max(
                range(len(row["candidates"])),
                key=lambda i: stable_unit_score(
                    "mock", source["text"], row["candidates"][i], ""
                ),
            )
            assert record["chosen_index"] == expected
            assert record["chosen_text"] == row["candidates"][expected]
            assert record["used_fallback"] is False
            assert all(s["status"] == "ok" for s in record["scores"])

    def test_single_candidate_is_chosen_unchanged(self, tmp_path):
        sources = [self.SOURCES[0]]
        candidates = [{"doc_id": "d1", "candidates": ["唯一の候補。"]}]
        result = self.invoke_rerank(tmp_path, sources, candidates)
        assert result.exit_code == 0
        record = json.loads(result.output)
        assert record["chosen_index"] == 0
        assert record["chosen_text"] == "唯一の候補。"
        assert record["pool_size"] == 1

    def test_output_is_deterministic(self, tmp_path):
        first = self.invoke_rerank(tmp_path)
        second = self.invoke_rerank(tmp_path)
        assert first.output == second.output

    def test_all_empty_candidates_exit_with_no_candidate(self, tmp_path):
        sources = [self.SOURCES[0]]
        candidates = [{"doc_id": "d1", "candidates": ["", "   ", ""]}]
        result = self.invoke_rerank(tmp_path, sources, candidates)
        assert result.exit_code == 4

    def test_row_count_mismatch_exits_with_input_error(self, tmp_path):
        result = self.invoke_rerank(tmp_path, candidates=[self.CANDIDATES[0]])
        assert result.exit_code == 2
        assert "2 sources but 1 candidate rows" in result.stderr

    def test_doc_id_mismatch_exits_with_input_error(self, tmp_path):
        candidates = [dict(self.CANDIDATES[0]), dict(self.CANDIDATES[1])]
        candidates[1]["doc_id"] = "other"
        result = self.invoke_rerank(tmp_path, candidates=candidates)
        assert result.exit_code == 2
        assert "d2" in result.stderr
        assert "other" in result.stderr

    def test_empty_candidate_list_exits_with_input_error(self, tmp_path):
        candidates = [self.CANDIDATES[0], {"doc_id": "d2", "candidates": []}]
        result = self.invoke_rerank(tmp_path, candidates=candidates)
        assert result.exit_code == 2
        assert "no candidates" in result.stderr

    def test_config_is_required_without_mock(self, tmp_path):
        result = self.invoke_rerank(tmp_path, extra=())
        assert result.exit_code == 2
        assert "--config is required" in result.stderr

    def test_unknown_metric_exits_with_input_error(self, tmp_path):
        result = self.invoke_rerank(tmp_path, extra=("--mock", "--metric", "typo"))
        assert result.exit_code == 2
        assert "unknown metric" in result.stderr

    def test_bad_json_names_the_line(self, tmp_path):
        src = write_jsonl(tmp_path / "sources.jsonl", self.SOURCES)
        cand = tmp_path / "candidates.jsonl"
        cand.write_text('{"doc_id": "d1"\nnot json\n', encoding="utf-8")
        result = runner.invoke(
            main, ["rerank", "--sources", str(src), "--candidates", str(cand), "--mock"]
        )
        assert result.exit_code == 2
        assert "candidates.jsonl:1" in result.stderr

    def test_config_metric_with_judge_and_fallback_runs(self, tmp_path):
        cfg = write_config(tmp_path / "run.yaml", raw_config("unused.jsonl"))
        result = self.invoke_rerank(
            tmp_path, extra=("--mock", "--config", str(cfg), "--metric", "gemba")
        )
        assert result.exit_code == 0, result.output
        for line in result.output.splitlines():
            record = json.loads(line)
            assert record["metric_id"] == "gemba"
            assert record["chosen_index"] < len(record["scores"])

    def test_real_mode_needs_no_translator_endpoints(self, tmp_path):
        # Reranking scores existing candidates, so only the scorer (and chat)
        # must be reachable; translators without endpoints are fine. The dead
        # scorer port turns this into a backend failure, not a config one.
        raw = raw_config("unused.jsonl")
        raw["backends"] = {
            "scorer": {"endpoint": "http://127.0.0.1:9/"},
            "chat": {"endpoint": "http://127.0.0.1:9/"},
        }
        cfg = write_config(tmp_path / "run.yaml", raw)
        result = self.invoke_rerank(
            tmp_path, extra=("--config", str(cfg), "--metric", "kiwi")
        )
        assert result.exit_code == 3
        assert "127.0.0.1:9" in result.stderr
        assert "has no endpoint" not in result.stderr


class TestBuildBackends:
    def test_scoring_only_callers_skip_translator_endpoints(self):
        raw = raw_config("unused.jsonl")
        raw["backends"] = {
            "scorer": {"endpoint": "http://127.0.0.1:9/"},
            "chat": {"endpoint": "http://127.0.0.1:9/"},
        }
        cfg = parse_config(raw)
        translators, scorer, chat, _ = build_backends(
            cfg, mock=False, need_translators=False
        )
        assert translators == {}
        assert scorer is not None and chat is not None
        with pytest.raises(InvalidConfig, match="mt-a"):
            build_backends(cfg, mock=False)
