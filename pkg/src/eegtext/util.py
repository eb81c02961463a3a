"""Shared helpers: seeded RNG derivation, JSONL I/O, hashing, sentence splitting."""

from __future__ import annotations

import hashlib
import json
import random
import re
from pathlib import Path
from typing import Any, Iterable, Iterator

from . import DataError


def stable_rng(*parts: object) -> random.Random:
    """Derive an RNG from a tuple of values, independent of interpreter hash seed.

    Used wherever per-item randomness must be reproducible across runs and
    uncorrelated across items sharing one user-facing seed.
    """
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def keyed_hash(*parts: object) -> int:
    """Stable 64-bit hash of the given values (for priority ordering)."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def json_line(record: dict[str, Any]) -> str:
    """Canonical single-line JSON rendering (insertion key order, UTF-8)."""
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, record) pairs; malformed lines raise DataError."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    """Write records as UTF-8 JSONL with LF line endings. Returns record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json_line(record))
            fh.write("\n")
            count += 1
    return count


_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+(?=[A-Z0-9\[<\"'])")


def split_sentences(text: str) -> list[str]:
    """Split normalized text into sentences on terminal punctuation.

    Decimal points and mid-token periods never split because the break
    requires trailing whitespace plus an uppercase/digit continuation.
    """
    parts = [s.strip() for s in _SENTENCE_BREAK.split(text)]
    return [s for s in parts if s]
