from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from eegtext import DataError
from eegtext.cli import main
from eegtext.harness import (
    Bucket,
    MockModel,
    SubsampleSpec,
    section_from_example_id,
    split_corpus,
    subsample,
)
from eegtext.corpus import SectionKind
from eegtext.datagen import corrupt_spans, TaskExample, TaskType, Provenance
from eegtext.metrics import perplexity, prediction_from_record
from eegtext.tokenizer import encode
from eegtext.util import read_jsonl, write_jsonl

from conftest import FIXTURE_REPORTS


class TestSplit:
    def test_exact_small_case(self):
        ids = [f"r{i}" for i in range(10)]
        assignment = split_corpus(ids, ratios=(0.8, 0.1, 0.1), seed=0)
        sizes = {b: len(assignment.ids(b)) for b in Bucket}
        assert sizes == {Bucket.TRAIN: 8, Bucket.VALID: 1, Bucket.TEST: 1}

    def test_determinism(self):
        ids = [f"r{i}" for i in range(100)]
        a = split_corpus(ids, seed=3)
        b = split_corpus(ids, seed=3)
        assert a.assignment == b.assignment

    def test_seed_changes_assignment(self):
        ids = [f"r{i}" for i in range(100)]
        a = split_corpus(ids, seed=3)
        b = split_corpus(ids, seed=4)
        assert a.assignment != b.assignment

    def test_ratio_validation(self):
        with pytest.raises(DataError, match="sum to 1"):
            split_corpus(["a"], ratios=(0.5, 0.1, 0.1))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            split_corpus(["a", "a"])

    def test_ten_thousand_ids_within_one_percent(self):
        ids = [f"report-{i:05d}" for i in range(10_000)]
        assignment = split_corpus(ids, seed=0)
        sizes = {b: len(assignment.ids(b)) for b in Bucket}
        assert sum(sizes.values()) == 10_000
        assert abs(sizes[Bucket.TRAIN] - 8000) <= 100
        assert abs(sizes[Bucket.VALID] - 1000) <= 100
        assert abs(sizes[Bucket.TEST] - 1000) <= 100

    def test_partition_total_and_disjoint(self):
        ids = [f"r{i}" for i in range(997)]
        assignment = split_corpus(ids, seed=1)
        assert set(assignment.assignment) == set(ids)
        total = sum(len(assignment.ids(b)) for b in Bucket)
        assert total == len(ids)

    def test_paragraphs_inherit_report_bucket(self, fixture_paragraphs):
        report_ids = sorted({p.report_id for p in fixture_paragraphs})
        assignment = split_corpus(report_ids, seed=2)
        for p in fixture_paragraphs:
            assert assignment.bucket(p.report_id) is assignment.assignment[p.report_id]


class TestSubsample:
    def test_full_ratio(self):
        ids = [f"r{i}" for i in range(100)]
        assert subsample(ids, SubsampleSpec(ratio=1.0, seed=0)) == set(ids)

    def test_one_percent_nested_in_five(self):
        ids = [f"r{i}" for i in range(100)]
        one = subsample(ids, SubsampleSpec(ratio=0.01, seed=0))
        five = subsample(ids, SubsampleSpec(ratio=0.05, seed=0))
        assert len(one) == 1
        assert one <= five

    def test_nesting_holds_for_twenty_seeds(self):
        ids = [f"r{i}" for i in range(500)]
        ladder = (0.01, 0.05, 0.10, 0.25, 1.0)
        for seed in range(20):
            previous: set[str] = set()
            for ratio in ladder:
                current = subsample(ids, SubsampleSpec(ratio=ratio, seed=seed))
                assert previous <= current
                assert len(current) == math.ceil(ratio * len(ids))
                previous = current

    def test_ratio_validation(self):
        with pytest.raises(DataError):
            subsample(["a"], SubsampleSpec(ratio=0.0, seed=0))
        with pytest.raises(DataError):
            subsample(["a"], SubsampleSpec(ratio=1.5, seed=0))


class TestMockModel:
    def test_polish_echoes_input(self, lexicon, vocab):
        model = MockModel(lexicon, vocab)
        example = TaskExample(
            task=TaskType.POLISH, id="t1", input="polish: slowing seen", target="x",
            provenance=Provenance.RULE,
        )
        record = model.predict_task(example)
        assert record.output == "slowing seen"

    def test_summarize_uses_extractive_fallback(self, lexicon, vocab):
        model = MockModel(lexicon, vocab)
        example = TaskExample(
            task=TaskType.SUMMARIZE,
            id="t2",
            input="summarize: The patient slept. Frequent spikes over the left temporal region.",
            target="x",
            provenance=Provenance.RULE,
        )
        record = model.predict_task(example)
        assert record.output == "Frequent spikes over the left temporal region."

    def test_frame_prediction_parses_back(self, lexicon, vocab):
        from eegtext.ie import frame_parse, tag_sentence

        model = MockModel(lexicon, vocab)
        record = model.predict_frame("s1", "No focal slowing.")
        assert frame_parse(record.output).core_equal(tag_sentence("No focal slowing.", lexicon))
        assert set(record.slot_confidences) == {
            "laterality", "localization", "pattern", "frequency", "negation",
        }

    def test_span_candidates_category_and_frequency(self, lexicon, vocab, fixture_texts):
        model = MockModel(lexicon, vocab, corpus=fixture_texts, top_k=5)
        example = corrupt_spans(
            "Frequent focal slowing over the left temporal region.",
            lexicon, vocab, mask_budget=0.3, seed=4, example_id="c1",
        )
        records = model.predict_spans(example)
        assert len(records) == len(example.spans)
        for record in records:
            assert record.candidates
            scores = [s for _, s in record.candidates]
            assert scores == sorted(scores, reverse=True)

    def test_uniform_nlls_give_vocab_size_ppl(self, lexicon, vocab):
        model = MockModel(lexicon, vocab)
        record = model.score_pieces("r:FINDINGS:0", encode("focal slowing", vocab))
        assert abs(perplexity([record]) - vocab.size) / vocab.size < 1e-9

    def test_section_from_example_id(self):
        assert section_from_example_id("rep:IMPRESSION:3") is SectionKind.IMPRESSION
        assert section_from_example_id("rep:IMPRESSION:3#0") is SectionKind.IMPRESSION
        assert section_from_example_id("weird") is SectionKind.OTHER


class TestPredictionSchema:
    def test_candidates_must_be_sorted(self):
        with pytest.raises(DataError, match="increase"):
            prediction_from_record(
                {"id": "a", "candidates": [{"text": "x", "score": 1.0}, {"text": "y", "score": 2.0}]}
            )

    def test_payload_required(self):
        with pytest.raises(DataError, match="payload"):
            prediction_from_record({"id": "a"})

    def test_nll_must_be_finite_nonnegative(self):
        with pytest.raises(DataError, match="nll"):
            prediction_from_record(
                {"id": "a", "token_nlls": [{"piece": "x", "nll": -1.0, "section": "OTHER"}]}
            )


class TestCli:
    def test_usage_error_exit_code(self):
        proc = subprocess.run(
            [sys.executable, "-m", "eegtext.cli", "definitely-not-a-command"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_data_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n", encoding="utf-8")
        code = main(["tag", "--input", str(bad), "--out", str(tmp_path / "out")])
        assert code == 3

    def test_config_file_provides_defaults(self, tmp_path):
        config = tmp_path / "run.conf"
        out_dir = tmp_path / "from-config"
        config.write_text(f"# comment\nout = {out_dir}\nratios = 0.8,0.1,0.1\n", encoding="utf-8")
        ids_file = tmp_path / "ids.txt"
        ids_file.write_text("\n".join(f"r{i}" for i in range(10)), encoding="utf-8")
        code = main(["split", "--ids", str(ids_file), "--config", str(config), "--quiet"])
        assert code == 0
        rows = [obj for _, obj in read_jsonl(out_dir / "split.jsonl")]
        assert len(rows) == 10

    def test_cli_flag_beats_config(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("ratio = 0.25\n", encoding="utf-8")
        split_file = tmp_path / "split.jsonl"
        write_jsonl(split_file, [{"id": f"r{i}", "bucket": "TRAIN"} for i in range(100)])
        out = tmp_path / "o"
        code = main([
            "subsample", "--split", str(split_file), "--ratio", "0.05",
            "--config", str(config), "--out", str(out), "--quiet",
        ])
        assert code == 0
        rows = [obj for _, obj in read_jsonl(out / "subsample.jsonl")]
        assert len(rows) == 5

    def test_config_boolean_parsing(self, tmp_path):
        import argparse

        from eegtext.cli import Settings

        config = tmp_path / "run.conf"
        config.write_text("protect-terms = false\n", encoding="utf-8")
        args = argparse.Namespace(config=str(config), protect_terms=None)
        assert Settings(args).get("protect_terms", default=False) is False
        config.write_text("protect-terms = yes\n", encoding="utf-8")
        assert Settings(args).get("protect_terms", default=False) is True

    def test_lexicon_validate_bundled(self, capsys):
        assert main(["lexicon", "validate"]) == 0
        out = capsys.readouterr().out
        assert "duplicate surfaces: 0" in out


class TestRobustnessLoop:
    def test_perturb_tag_eval_round_trip(self, tmp_path):
        from conftest import MICRO_SUITE

        adv = tmp_path / "adv"
        assert main(["perturb", "--input", str(MICRO_SUITE), "--seed", "1",
                     "--out", str(adv), "--quiet"]) == 0
        assert main(["tag", "--input", str(adv / "adversarial.jsonl"),
                     "--out", str(adv), "--quiet"]) == 0
        assert main(["eval", "--negadv-predictions", str(adv / "frames.jsonl"),
                     "--negadv-gold", str(adv / "adversarial.jsonl"),
                     "--enable", "robustness", "--out", str(adv / "report"),
                     "--quiet"]) == 0
        metrics = json.loads((adv / "report/metrics.json").read_text("utf-8"))
        # the tagger must agree with the transformed gold on every emitted item
        assert metrics["metrics"]["negadv_f1"]["value"] == 1.0

    def test_schema_error_names_line(self, tmp_path, capsys):
        bad = tmp_path / "preds.jsonl"
        bad.write_text('{"id": "a", "output": "x"}\n{"id": "b"}\n', encoding="utf-8")
        code = main(["eval", "--ppl-predictions", str(bad), "--out", str(tmp_path / "r")])
        assert code == 3
        assert ":2:" in capsys.readouterr().err


class TestDataEfficiencyTable:
    def test_ratio_predictions_render(self, tmp_path, micro_suite):
        from conftest import MICRO_SUITE

        frames = tmp_path / "frames.jsonl"
        code = main(["tag", "--input", str(MICRO_SUITE), "--out", str(tmp_path), "--quiet"])
        assert code == 0
        frames = tmp_path / "frames.jsonl"
        spec = ",".join(f"{r}={frames}" for r in (0.01, 0.05, 0.10, 0.25, 1.0))
        out = tmp_path / "report"
        code = main([
            "eval", "--ie-ratio-predictions", spec, "--ie-gold", str(MICRO_SUITE),
            "--out", str(out), "--quiet",
        ])
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text("utf-8"))
        assert metrics["metrics"]["ie_macro_f1_at_0.25"]["value"] == 1.0
        table = (out / "table_data_efficiency.txt").read_text("utf-8")
        assert "local run" in table and "100%" in table


class TestEndToEnd:
    def test_pipeline_smoke(self, tmp_path):
        out = tmp_path / "work"
        steps = [
            ["normalize", "--input", str(FIXTURE_REPORTS), "--out", str(out), "--quiet"],
            [
                "tokenizer", "train", "--corpus", str(out / "paragraphs.jsonl"),
                "--vocab-size", "600", "--out", str(out), "--seed", "7", "--quiet",
            ],
            [
                "corrupt", "--corpus", str(out / "paragraphs.jsonl"),
                "--vocab", str(out / "vocab.json"), "--out", str(out), "--seed", "1", "--quiet",
            ],
            [
                "taskgen", "--corpus", str(out / "paragraphs.jsonl"),
                "--vocab", str(out / "vocab.json"), "--out", str(out), "--seed", "1", "--quiet",
            ],
            [
                "split", "--ids", str(out / "reports.jsonl"), "--out", str(out), "--quiet",
            ],
            [
                "subsample", "--split", str(out / "split.jsonl"), "--ratio", "0.25",
                "--out", str(out), "--quiet",
            ],
            [
                "mock", "--tasks", str(out / "tasks.jsonl"),
                "--corruption", str(out / "corruption.jsonl"),
                "--vocab", str(out / "vocab.json"),
                "--corpus", str(out / "paragraphs.jsonl"),
                "--out", str(out), "--quiet",
            ],
            [
                "tokenizer", "eval", "--vocab", str(out / "vocab.json"),
                "--corpus", str(out / "paragraphs.jsonl"), "--out", str(out), "--quiet",
            ],
            [
                "eval",
                "--ppl-predictions", str(out / "corruption_score_predictions.jsonl"),
                "--topk-predictions", str(out / "span_predictions.jsonl"),
                "--topk-gold", str(out / "corruption.jsonl"),
                "--out", str(out / "report"), "--quiet",
            ],
        ]
        for argv in steps:
            assert main(argv) == 0, argv

        metrics = json.loads((out / "report/metrics.json").read_text("utf-8"))
        values = {name: entry["value"] for name, entry in metrics["metrics"].items()}
        assert values, "no metrics produced"
        for name, value in values.items():
            assert math.isfinite(value), name
        vocab_size = json.loads((out / "vocab.json").read_text("utf-8"))["config"]["vocab_size"]
        assert abs(values["ppl_all"] - vocab_size) / vocab_size < 1e-9
        assert (out / "report/table_lm_intrinsic.txt").exists()
        assert (out / "report/manifest.jsonl").exists()

        # identical inputs give a byte-identical report
        rerun = steps[-1][:-3] + ["--out", str(out / "report2"), "--quiet"]
        assert main(rerun) == 0
        assert (out / "report/metrics.json").read_bytes() == (
            out / "report2/metrics.json"
        ).read_bytes()
