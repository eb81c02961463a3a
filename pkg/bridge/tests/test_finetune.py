from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from eegtext_bridge.kit_io import read_jsonl

from conftest import bridge


@pytest.fixture(scope="module")
def checkpoint(workspace, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("ft")
    proc = bridge(
        [
            "finetune", "--dataset", str(workspace / "tasks.jsonl"),
            "--val-dataset", str(workspace / "tasks.jsonl"),
            "--vocab", str(workspace / "vocab.json"),
            "--seed", "3", "--out", str(out),
        ]
    )
    assert proc.returncode == 0, proc.stderr
    return out / "checkpoint"


class TestFinetune:
    def test_checkpoint_artifacts(self, checkpoint):
        assert (checkpoint / "weights.pt").exists()
        config = json.loads((checkpoint / "config.json").read_text())
        assert 1 <= config["epochs_run"] <= 5
        assert math.isfinite(config["best_val_loss"])
        log = [obj for _, obj in read_jsonl(checkpoint / "train_log.jsonl")]
        assert len(log) == config["epochs_run"]
        assert all(math.isfinite(e["train_loss"]) and math.isfinite(e["val_loss"]) for e in log)

    def test_val_dataset_required(self, workspace, tmp_path):
        proc = bridge(
            [
                "finetune", "--dataset", str(workspace / "tasks.jsonl"),
                "--vocab", str(workspace / "vocab.json"), "--out", str(tmp_path),
            ]
        )
        assert proc.returncode == 3
        assert "val-dataset" in proc.stderr

    def test_generate_from_checkpoint(self, workspace, checkpoint, tmp_path):
        proc = bridge(
            [
                "generate", "--dataset", str(workspace / "tasks.jsonl"),
                "--model", str(checkpoint), "--vocab", str(workspace / "vocab.json"),
                "--out", str(tmp_path),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        records = [obj for _, obj in read_jsonl(tmp_path / "generate_predictions.jsonl")]
        assert records and all("output" in r for r in records)

    def test_score_from_checkpoint(self, workspace, checkpoint, tmp_path):
        proc = bridge(
            [
                "score", "--dataset", str(workspace / "tasks.jsonl"),
                "--model", str(checkpoint), "--vocab", str(workspace / "vocab.json"),
                "--out", str(tmp_path),
            ]
        )
        assert proc.returncode == 0, proc.stderr
        records = [obj for _, obj in read_jsonl(tmp_path / "score_predictions.jsonl")]
        assert records
        for record in records:
            for entry in record["token_nlls"]:
                assert entry["nll"] >= 0.0
                assert math.isfinite(entry["nll"])

    def test_checkpoint_vocab_mismatch_rejected(self, checkpoint, workspace, tmp_path):
        import shutil
        import subprocess

        exe = shutil.which("eegtext")
        corpus = tmp_path / "c.txt"
        corpus.write_text("alpha beta\n")
        proc = subprocess.run(
            [exe, "tokenizer", "train", "--corpus", str(corpus), "--vocab-size", "400",
             "--out", str(tmp_path), "--quiet"],
            capture_output=True,
        )
        assert proc.returncode == 0
        result = bridge(
            [
                "score", "--dataset", str(workspace / "tasks.jsonl"),
                "--model", str(checkpoint), "--vocab", str(tmp_path / "vocab.json"),
                "--out", str(tmp_path),
            ]
        )
        assert result.returncode == 3
