"""The four bridge modes: generate, score, span-topk, finetune.

Each mode reads a kit dataset and writes kit-schema prediction files (or a
checkpoint directory for finetune). Model selection: "stub" (default) is the
deterministic offline model; any other value is a toy checkpoint directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from . import BridgeError
from .kit_io import (
    KitVocab,
    TaskRow,
    load_dataset,
    load_lexicon,
    section_from_id,
    write_jsonl,
)
from .stub import CandidateGenerator, generate_output, span_records, strip_prefix, uniform_nll


class Mode(str, Enum):
    GENERATE = "GENERATE"
    SCORE = "SCORE"
    SPAN_TOPK = "SPAN_TOPK"
    FINETUNE = "FINETUNE"


@dataclass
class BridgeConfig:
    mode: Mode
    dataset: Path
    out_dir: Path
    model: str = "stub"  # "stub" or a checkpoint directory
    vocab: Path | None = None
    lexicon: Path | None = None
    val_dataset: Path | None = None
    top_k: int = 5
    max_in: int = 512
    max_out: int = 256
    seed: int = 0

    def require_vocab(self) -> KitVocab:
        if self.vocab is None:
            raise BridgeError(f"mode {self.mode.value} needs --vocab")
        return KitVocab.load(self.vocab)

    @property
    def uses_stub(self) -> bool:
        return self.model == "stub"


def _pairs(rows) -> list[tuple[str, str]]:
    out = []
    for row in rows:
        source = strip_prefix(row) if isinstance(row, TaskRow) else row.input
        out.append((source, row.target))
    return out


def run_generate(config: BridgeConfig) -> Path:
    kind, rows = load_dataset(config.dataset)
    if kind != "tasks":
        raise BridgeError("generate expects a tasks dataset")
    out_file = config.out_dir / "generate_predictions.jsonl"
    if config.uses_stub:
        write_jsonl(out_file, ({"id": r.id, "output": generate_output(r)} for r in rows))
        return out_file
    from .toy import greedy_generate, load_checkpoint

    vocab = config.require_vocab()
    model = load_checkpoint(config.model, vocab)
    records = []
    for row in rows:
        text = greedy_generate(model, vocab, strip_prefix(row), config.max_in, config.max_out)
        records.append({"id": row.id, "output": text})
    write_jsonl(out_file, records)
    return out_file


def run_score(config: BridgeConfig) -> Path:
    _, rows = load_dataset(config.dataset)
    vocab = config.require_vocab()
    out_file = config.out_dir / "score_predictions.jsonl"
    records = []
    if config.uses_stub:
        nll = uniform_nll(vocab)
        for row in rows:
            section = section_from_id(row.id)
            records.append(
                {
                    "id": row.id,
                    "token_nlls": [
                        {"piece": piece, "nll": nll, "section": section}
                        for piece in vocab.encode(row.target)[: config.max_out]
                    ],
                }
            )
    else:
        from .toy import load_checkpoint, score_nlls

        model = load_checkpoint(config.model, vocab)
        for row in rows:
            source = strip_prefix(row) if isinstance(row, TaskRow) else row.input
            section = section_from_id(row.id)
            scored = score_nlls(model, vocab, source, row.target, config.max_in, config.max_out)
            records.append(
                {
                    "id": row.id,
                    "token_nlls": [
                        {"piece": piece, "nll": nll, "section": section}
                        for piece, nll in scored
                    ],
                }
            )
    records = [r for r in records if r["token_nlls"]]
    write_jsonl(out_file, records)
    return out_file


def run_span_topk(config: BridgeConfig) -> Path:
    kind, rows = load_dataset(config.dataset)
    if kind != "corruption":
        raise BridgeError("span-topk expects a corruption dataset")
    if config.lexicon is None:
        raise BridgeError("span-topk needs --lexicon")
    entries = load_lexicon(config.lexicon)
    generator = CandidateGenerator(entries, [row.input for row in rows])
    out_file = config.out_dir / "span_predictions.jsonl"
    records = []
    for row in rows:
        records.extend(span_records(row, generator, config.top_k))
    write_jsonl(out_file, records)
    return out_file


def run_finetune(config: BridgeConfig) -> Path:
    if config.val_dataset is None:
        raise BridgeError("finetune needs --val-dataset for early stopping")
    from .toy import DEFAULTS, finetune

    _, train_rows = load_dataset(config.dataset)
    _, val_rows = load_dataset(config.val_dataset)
    vocab = config.require_vocab()
    checkpoint_dir = config.out_dir / "checkpoint"
    finetune(
        _pairs(train_rows),
        _pairs(val_rows),
        vocab,
        checkpoint_dir,
        seed=config.seed,
        batch_size=DEFAULTS["batch_size"],
        learning_rate=DEFAULTS["learning_rate"],
        max_epochs=DEFAULTS["max_epochs"],
        max_in=config.max_in,
        max_out=config.max_out,
    )
    return checkpoint_dir


RUNNERS = {
    Mode.GENERATE: run_generate,
    Mode.SCORE: run_score,
    Mode.SPAN_TOPK: run_span_topk,
    Mode.FINETUNE: run_finetune,
}


def run(config: BridgeConfig) -> Path:
    config.out_dir.mkdir(parents=True, exist_ok=True)
    return RUNNERS[config.mode](config)
