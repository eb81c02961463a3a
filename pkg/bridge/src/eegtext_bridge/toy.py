"""Miniature encoder-decoder for the fine-tune entry points.

This exists to exercise the training loop contract (batching, early stopping
on validation loss, checkpointing, scoring and greedy generation from a
checkpoint) at desk scale. It is a few thousand parameters and is explicitly
not expected to reproduce any published numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from . import BridgeError
from .kit_io import KitVocab, write_jsonl

DEFAULTS = {
    "batch_size": 32,
    "learning_rate": 2e-4,
    "max_epochs": 5,
    "d_model": 32,
    "n_heads": 2,
    "max_in": 512,
    "max_out": 256,
}


@dataclass
class ToyBatch:
    src: torch.Tensor  # (B, S)
    tgt_in: torch.Tensor  # (B, T)
    tgt_out: torch.Tensor  # (B, T)


class ToySeq2Seq(nn.Module):
    """One-layer transformer encoder-decoder over the kit vocab ids.

    Two extra ids beyond the vocab: BOS = size, EOS = size + 1; PAD reuses
    the kit's <pad> piece at index 0.
    """

    def __init__(self, vocab_size: int, d_model: int = 32, n_heads: int = 2):
        super().__init__()
        self.vocab_size = vocab_size
        self.bos = vocab_size
        self.eos = vocab_size + 1
        full = vocab_size + 2
        self.embed = nn.Embedding(full, d_model)
        self.pos = nn.Embedding(1024, d_model)
        self.transformer = nn.Transformer(
            d_model=d_model,
            nhead=n_heads,
            num_encoder_layers=1,
            num_decoder_layers=1,
            dim_feedforward=4 * d_model,
            dropout=0.0,
            batch_first=True,
        )
        self.out = nn.Linear(d_model, full)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.size(1), device=ids.device).clamp_max(1023)
        return self.embed(ids) + self.pos(positions)[None, :, :]

    def forward(self, src: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        mask = nn.Transformer.generate_square_subsequent_mask(tgt_in.size(1)).to(src.device)
        hidden = self.transformer(
            self._embed(src),
            self._embed(tgt_in),
            tgt_mask=mask,
            src_key_padding_mask=(src == 0),
        )
        return self.out(hidden)


def _ids(vocab: KitVocab, text: str, limit: int) -> list[int]:
    return [vocab.piece_id(p) for p in vocab.encode(text)][:limit]


def make_batches(
    pairs: list[tuple[str, str]], vocab: KitVocab, model: ToySeq2Seq, batch_size: int,
    max_in: int, max_out: int,
) -> list[ToyBatch]:
    batches = []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        srcs = [_ids(vocab, s, max_in) or [0] for s, _ in chunk]
        tgts = [_ids(vocab, t, max_out) for _, t in chunk]
        s_len = max(len(s) for s in srcs)
        t_len = max(len(t) for t in tgts) + 1  # room for BOS/EOS shift
        src = torch.zeros(len(chunk), s_len, dtype=torch.long)
        tgt_in = torch.zeros(len(chunk), t_len, dtype=torch.long)
        tgt_out = torch.zeros(len(chunk), t_len, dtype=torch.long)
        for i, (s, t) in enumerate(zip(srcs, tgts)):
            src[i, : len(s)] = torch.tensor(s)
            tin = [model.bos] + t
            tout = t + [model.eos]
            tgt_in[i, : len(tin)] = torch.tensor(tin)
            tgt_out[i, : len(tout)] = torch.tensor(tout)
        batches.append(ToyBatch(src=src, tgt_in=tgt_in, tgt_out=tgt_out))
    return batches


def _epoch_loss(model: ToySeq2Seq, batches: list[ToyBatch], optimizer=None) -> float:
    criterion = nn.CrossEntropyLoss(ignore_index=0)
    total = 0.0
    count = 0
    for batch in batches:
        logits = model(batch.src, batch.tgt_in)
        loss = criterion(logits.reshape(-1, logits.size(-1)), batch.tgt_out.reshape(-1))
        if optimizer is not None:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        total += float(loss.detach()) * batch.src.size(0)
        count += batch.src.size(0)
    return total / max(count, 1)


def finetune(
    train_pairs: list[tuple[str, str]],
    val_pairs: list[tuple[str, str]],
    vocab: KitVocab,
    out_dir: str | Path,
    seed: int = 0,
    batch_size: int = DEFAULTS["batch_size"],
    learning_rate: float = DEFAULTS["learning_rate"],
    max_epochs: int = DEFAULTS["max_epochs"],
    max_in: int = DEFAULTS["max_in"],
    max_out: int = DEFAULTS["max_out"],
) -> dict:
    if not train_pairs:
        raise BridgeError("finetune: empty training dataset")
    if not val_pairs:
        raise BridgeError("finetune: validation split required for early stopping")
    torch.manual_seed(seed)
    model = ToySeq2Seq(vocab.size, d_model=DEFAULTS["d_model"], n_heads=DEFAULTS["n_heads"])
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
    train_batches = make_batches(train_pairs, vocab, model, batch_size, max_in, max_out)
    val_batches = make_batches(val_pairs, vocab, model, batch_size, max_in, max_out)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = []
    best_val = float("inf")
    stopped_early = False
    for epoch in range(1, max_epochs + 1):
        model.train()
        train_loss = _epoch_loss(model, train_batches, optimizer)
        model.eval()
        with torch.no_grad():
            val_loss = _epoch_loss(model, val_batches)
        log.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss >= best_val:
            stopped_early = True
            break
        best_val = val_loss
        torch.save(model.state_dict(), out_dir / "weights.pt")

    if not (out_dir / "weights.pt").exists():  # first epoch already regressed
        torch.save(model.state_dict(), out_dir / "weights.pt")
    summary = {
        "vocab_size": vocab.size,
        "d_model": DEFAULTS["d_model"],
        "n_heads": DEFAULTS["n_heads"],
        "seed": seed,
        "epochs_run": len(log),
        "stopped_early": stopped_early,
        "best_val_loss": best_val if best_val != float("inf") else log[-1]["val_loss"],
    }
    with open(out_dir / "config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_jsonl(out_dir / "train_log.jsonl", log)
    return summary


def load_checkpoint(path: str | Path, vocab: KitVocab) -> ToySeq2Seq:
    path = Path(path)
    config_file = path / "config.json"
    weights_file = path / "weights.pt"
    if not config_file.exists() or not weights_file.exists():
        raise BridgeError(f"{path}: not a checkpoint directory (config.json + weights.pt)")
    with open(config_file, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if config.get("vocab_size") != vocab.size:
        raise BridgeError(
            f"checkpoint vocab size {config.get('vocab_size')} != vocab file {vocab.size}"
        )
    model = ToySeq2Seq(
        vocab.size, d_model=config.get("d_model", 32), n_heads=config.get("n_heads", 2)
    )
    model.load_state_dict(torch.load(weights_file, map_location="cpu", weights_only=True))
    model.eval()
    return model


@torch.no_grad()
def score_nlls(model: ToySeq2Seq, vocab: KitVocab, source: str, target: str,
               max_in: int, max_out: int) -> list[tuple[str, float]]:
    """Per-piece negative log-likelihood of the reference continuation."""
    pieces = vocab.encode(target)[:max_out]
    if not pieces:
        return []
    src = torch.tensor([_ids(vocab, source, max_in) or [0]], dtype=torch.long)
    ids = [vocab.piece_id(p) for p in pieces]
    tgt_in = torch.tensor([[model.bos] + ids], dtype=torch.long)
    logits = model(src, tgt_in)
    logprobs = torch.log_softmax(logits[0], dim=-1)
    out = []
    for step, (piece, pid) in enumerate(zip(pieces, ids)):
        out.append((piece, max(0.0, float(-logprobs[step, pid]))))
    return out


@torch.no_grad()
def greedy_generate(model: ToySeq2Seq, vocab: KitVocab, source: str,
                    max_in: int, max_out: int) -> str:
    src = torch.tensor([_ids(vocab, source, max_in) or [0]], dtype=torch.long)
    ids: list[int] = []
    for _ in range(max_out):
        tgt_in = torch.tensor([[model.bos] + ids], dtype=torch.long)
        logits = model(src, tgt_in)
        next_id = int(torch.argmax(logits[0, -1]))
        if next_id == model.eos:
            break
        if next_id >= vocab.size or next_id == model.bos:
            break
        ids.append(next_id)
    return vocab.decode(vocab.pieces[i] for i in ids)
