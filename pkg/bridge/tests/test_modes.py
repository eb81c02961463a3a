from __future__ import annotations

import math
from pathlib import Path

from eegtext_bridge.kit_io import KitVocab, load_dataset, read_jsonl

from conftest import bridge


def rows_of(path: Path) -> list[dict]:
    return [obj for _, obj in read_jsonl(path)]


class TestGenerateStub:
    def test_one_output_per_example(self, workspace, tmp_path):
        proc = bridge(
            ["generate", "--dataset", str(workspace / "tasks.jsonl"), "--out", str(tmp_path)]
        )
        assert proc.returncode == 0, proc.stderr
        records = rows_of(tmp_path / "generate_predictions.jsonl")
        _, tasks = load_dataset(workspace / "tasks.jsonl")
        assert [r["id"] for r in records] == [t.id for t in tasks]
        assert all(set(r) == {"id", "output"} for r in records)

    def test_polish_echoes_body(self, workspace, tmp_path):
        bridge(["generate", "--dataset", str(workspace / "tasks.jsonl"), "--out", str(tmp_path)])
        _, tasks = load_dataset(workspace / "tasks.jsonl")
        outputs = {r["id"]: r["output"] for r in rows_of(tmp_path / "generate_predictions.jsonl")}
        for task in tasks:
            if task.task == "POLISH":
                assert outputs[task.id] == task.input[len("polish: ") :]

    def test_rejects_corruption_dataset(self, workspace, tmp_path):
        proc = bridge(
            ["generate", "--dataset", str(workspace / "corruption.jsonl"), "--out", str(tmp_path)]
        )
        assert proc.returncode == 3


class TestScoreStub:
    def test_uniform_nlls(self, workspace, tmp_path):
        proc = bridge(
            [
                "score", "--dataset", str(workspace / "corruption.jsonl"),
                "--vocab", str(workspace / "vocab.json"), "--out", str(tmp_path),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        vocab = KitVocab.load(workspace / "vocab.json")
        expected = math.log(vocab.size)
        records = rows_of(tmp_path / "score_predictions.jsonl")
        assert records
        for record in records:
            for entry in record["token_nlls"]:
                assert abs(entry["nll"] - expected) < 1e-12
                assert entry["section"] in {"FINDINGS", "IMPRESSION", "OTHER"}

    def test_empty_dataset_ok(self, workspace, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        proc = bridge(
            [
                "score", "--dataset", str(empty),
                "--vocab", str(workspace / "vocab.json"), "--out", str(tmp_path),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "score_predictions.jsonl").read_text() == ""

    def test_deterministic_files(self, workspace, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            proc = bridge(
                [
                    "score", "--dataset", str(workspace / "tasks.jsonl"),
                    "--vocab", str(workspace / "vocab.json"),
                    "--seed", "5", "--out", str(out),
                ]
            )
            assert proc.returncode == 0, proc.stderr
        assert (out_a / "score_predictions.jsonl").read_bytes() == (
            out_b / "score_predictions.jsonl"
        ).read_bytes()

    def test_sharded_scoring_merges_exactly(self, workspace, tmp_path):
        # score two shards separately; concatenated output must match the
        # unsharded file record for record
        full = (workspace / "corruption.jsonl").read_text(encoding="utf-8").splitlines()
        half = len(full) // 2
        shard_a = tmp_path / "a.jsonl"
        shard_b = tmp_path / "b.jsonl"
        shard_a.write_text("\n".join(full[:half]) + "\n", encoding="utf-8")
        shard_b.write_text("\n".join(full[half:]) + "\n", encoding="utf-8")
        outputs = []
        for shard, out in ((shard_a, tmp_path / "oa"), (shard_b, tmp_path / "ob")):
            proc = bridge(
                ["score", "--dataset", str(shard), "--vocab", str(workspace / "vocab.json"),
                 "--out", str(out)]
            )
            assert proc.returncode == 0, proc.stderr
            outputs.append((out / "score_predictions.jsonl").read_text(encoding="utf-8"))
        proc = bridge(
            ["score", "--dataset", str(workspace / "corruption.jsonl"),
             "--vocab", str(workspace / "vocab.json"), "--out", str(tmp_path / "of")]
        )
        assert proc.returncode == 0, proc.stderr
        merged = outputs[0] + outputs[1]
        assert merged == (tmp_path / "of" / "score_predictions.jsonl").read_text(encoding="utf-8")

    def test_vocab_required(self, workspace, tmp_path):
        proc = bridge(
            ["score", "--dataset", str(workspace / "tasks.jsonl"), "--out", str(tmp_path)]
        )
        assert proc.returncode == 3
        assert "vocab" in proc.stderr


class TestSpanTopK:
    def test_per_sentinel_records(self, workspace, lexicon_file, tmp_path):
        proc = bridge(
            [
                "span-topk", "--dataset", str(workspace / "corruption.jsonl"),
                "--lexicon", str(lexicon_file), "--top-k", "5", "--out", str(tmp_path),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        records = rows_of(tmp_path / "span_predictions.jsonl")
        _, rows = load_dataset(workspace / "corruption.jsonl")
        expected_ids = [f"{row.id}#{span.k}" for row in rows for span in row.spans]
        assert [r["id"] for r in records] == expected_ids
        for record in records:
            scores = [c["score"] for c in record["candidates"]]
            assert scores == sorted(scores, reverse=True)
            assert 1 <= len(scores) <= 5

    def test_lexicon_required(self, workspace, tmp_path):
        proc = bridge(
            ["span-topk", "--dataset", str(workspace / "corruption.jsonl"), "--out", str(tmp_path)]
        )
        assert proc.returncode == 3

    def test_config_file_supplies_flags(self, workspace, lexicon_file, tmp_path):
        config = tmp_path / "bridge.conf"
        config.write_text(f"lexicon = {lexicon_file}\ntop-k = 3\n", encoding="utf-8")
        proc = bridge(
            [
                "span-topk", "--dataset", str(workspace / "corruption.jsonl"),
                "--config", str(config), "--out", str(tmp_path),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        records = rows_of(tmp_path / "span_predictions.jsonl")
        assert all(len(r["candidates"]) <= 3 for r in records)
