from __future__ import annotations

import shutil
import subprocess
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

CORPUS_LINES = [
    "Frequent focal slowing over the left temporal region with preserved reactivity.",
    "No spike-and-wave discharges during drowsiness.",
    "Intermittent sharp waves at 4 Hz in the right frontal area.",
    "The background shows alpha rhythm with diffuse beta activity.",
    "There is no evidence of epileptiform discharges on this recording.",
    "Triphasic waves are seen bilaterally with rhythmic delta activity.",
    "Sleep spindles were symmetric during stage 2 sleep.",
    "Occasional focal slowing without sharp waves in the occipital region.",
    "Bilateral rhythmic delta activity at 2 Hz increased during drowsiness.",
    "Alpha rhythm attenuation with eye opening was preserved.",
    "No triphasic waves and no epileptiform discharges were captured.",
    "Diffuse beta activity consistent with sedation is present.",
]


def kit(args: list[str], **kwargs) -> subprocess.CompletedProcess:
    """Invoke the toolkit CLI (the only channel the bridge uses)."""
    exe = shutil.which("eegtext")
    assert exe, "toolkit CLI not installed"
    return subprocess.run([exe, *args], capture_output=True, text=True, **kwargs)


def bridge(args: list[str], **kwargs) -> subprocess.CompletedProcess:
    exe = shutil.which("eegtext-bridge")
    assert exe, "bridge CLI not installed"
    return subprocess.run([exe, *args], capture_output=True, text=True, **kwargs)


@pytest.fixture(scope="session")
def workspace(tmp_path_factory) -> Path:
    """Kit-produced datasets (vocab, corruption, tasks) for bridge runs."""
    root = tmp_path_factory.mktemp("kitdata")
    corpus = root / "corpus.txt"
    corpus.write_text("\n".join(CORPUS_LINES) + "\n", encoding="utf-8")
    steps = [
        ["tokenizer", "train", "--corpus", str(corpus), "--vocab-size", "450",
         "--seed", "7", "--out", str(root), "--quiet"],
        ["corrupt", "--corpus", str(corpus), "--vocab", str(root / "vocab.json"),
         "--seed", "1", "--out", str(root), "--quiet"],
        ["taskgen", "--corpus", str(corpus), "--vocab", str(root / "vocab.json"),
         "--tasks", "polish,summarize", "--seed", "1", "--out", str(root), "--quiet"],
    ]
    for args in steps:
        proc = kit(args)
        assert proc.returncode == 0, proc.stderr
    return root


@pytest.fixture(scope="session")
def lexicon_file() -> Path:
    return DATA / "mini_lexicon.jsonl"
