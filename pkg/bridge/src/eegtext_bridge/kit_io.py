"""Readers and writers for the toolkit's published file formats.

Everything here is reimplemented from the file formats themselves; the
bridge never imports the toolkit package.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from . import BridgeError


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BridgeError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            yield lineno, obj


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


# --- vocab file (versioned JSON with pieces/merges/specials) ---------------


def _bytes_to_unicode() -> dict[int, str]:
    # printable byte alphabet used by the vocab file format
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


_BYTE_TO_CHAR = _bytes_to_unicode()
_CHAR_TO_BYTE = {c: b for b, c in _BYTE_TO_CHAR.items()}
_PRETOKEN_RE = re.compile(r"\s+|\S+")


@dataclass
class KitVocab:
    pieces: list[str]
    merges: list[tuple[str, str]]
    specials: list[str]
    config: dict = field(default_factory=dict)
    _ranks: dict[tuple[str, str], int] = field(default_factory=dict, repr=False)
    _special_re: re.Pattern | None = field(default=None, repr=False)
    _special_set: set[str] = field(default_factory=set, repr=False)
    _piece_index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._special_set = set(self.specials)
        escaped = sorted((re.escape(s) for s in self.specials), key=len, reverse=True)
        self._special_re = re.compile("(" + "|".join(escaped) + ")")
        self._piece_index = {p: i for i, p in enumerate(self.pieces)}

    @classmethod
    def load(cls, path: str | Path) -> "KitVocab":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise BridgeError(f"cannot read vocab {path}: {exc}") from exc
        if data.get("version") != 1:
            raise BridgeError(f"{path}: unsupported vocab version {data.get('version')!r}")
        return cls(
            pieces=list(data["pieces"]),
            merges=[tuple(m) for m in data["merges"]],
            specials=list(data["specials"]),
            config=data.get("config", {}),
        )

    @property
    def size(self) -> int:
        return len(self.pieces)

    def piece_id(self, piece: str) -> int:
        idx = self._piece_index.get(piece)
        if idx is None:
            raise BridgeError(f"piece {piece!r} not in vocab")
        return idx

    def _encode_token(self, token: str) -> list[str]:
        word = [_BYTE_TO_CHAR[b] for b in token.encode("utf-8")]
        while len(word) > 1:
            best = None
            best_idx = -1
            for i in range(len(word) - 1):
                rank = self._ranks.get((word[i], word[i + 1]))
                if rank is not None and (best is None or rank < best):
                    best = rank
                    best_idx = i
            if best is None:
                break
            left, right = word[best_idx], word[best_idx + 1]
            merged = left + right
            out = []
            i = 0
            while i < len(word):
                if i + 1 < len(word) and word[i] == left and word[i + 1] == right:
                    out.append(merged)
                    i += 2
                else:
                    out.append(word[i])
                    i += 1
            word = out
        return word

    def encode(self, text: str) -> list[str]:
        pieces: list[str] = []
        for segment in self._special_re.split(text):
            if not segment:
                continue
            if segment in self._special_set:
                pieces.append(segment)
                continue
            for token in _PRETOKEN_RE.findall(segment):
                pieces.extend(self._encode_token(token))
        return pieces

    def decode(self, pieces: Iterable[str]) -> str:
        chunks: list[str] = []
        buf = bytearray()
        for piece in pieces:
            if piece in self._special_set:
                if buf:
                    chunks.append(buf.decode("utf-8", errors="replace"))
                    buf = bytearray()
                chunks.append(piece)
            else:
                for ch in piece:
                    buf.append(_CHAR_TO_BYTE[ch])
        if buf:
            chunks.append(buf.decode("utf-8", errors="replace"))
        return "".join(chunks)


# --- datasets ---------------------------------------------------------------

TASK_PREFIXES = {"POLISH": "polish: ", "QA": "qa: ", "SUMMARIZE": "summarize: "}


@dataclass(frozen=True)
class TaskRow:
    id: str
    task: str
    input: str
    target: str


@dataclass(frozen=True)
class SpanRow:
    k: int
    text: str


@dataclass(frozen=True)
class CorruptionRow:
    id: str
    input: str
    target: str
    spans: tuple[SpanRow, ...]


def load_dataset(path: str | Path) -> tuple[str, list]:
    """Load tasks.jsonl or corruption.jsonl; returns ("tasks"|"corruption", rows).

    An empty file is a valid empty tasks dataset.
    """
    rows: list = []
    kind: str | None = None
    for lineno, obj in read_jsonl(path):
        this = "tasks" if "task" in obj else "corruption" if "spans" in obj else None
        if this is None:
            raise BridgeError(f"{path}:{lineno}: record is neither a task nor a corruption example")
        if kind is None:
            kind = this
        elif kind != this:
            raise BridgeError(f"{path}:{lineno}: mixed dataset kinds in one file")
        try:
            if this == "tasks":
                rows.append(
                    TaskRow(
                        id=str(obj["id"]),
                        task=str(obj["task"]),
                        input=str(obj["input"]),
                        target=str(obj["target"]),
                    )
                )
            else:
                rows.append(
                    CorruptionRow(
                        id=str(obj["id"]),
                        input=str(obj["input"]),
                        target=str(obj["target"]),
                        spans=tuple(
                            SpanRow(k=int(s["k"]), text=str(s["text"])) for s in obj["spans"]
                        ),
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise BridgeError(f"{path}:{lineno}: bad record ({exc})") from exc
    return kind or "tasks", rows


SECTION_KINDS = {"FINDINGS", "IMPRESSION", "HISTORY", "MEDICATIONS", "TECHNIQUE", "OTHER"}


def section_from_id(example_id: str) -> str:
    parts = example_id.split(":")
    if len(parts) >= 2 and parts[1] in SECTION_KINDS:
        return parts[1]
    return "OTHER"


# --- lexicon ----------------------------------------------------------------


@dataclass(frozen=True)
class LexiconEntry:
    canonical: str
    surfaces: tuple[str, ...]
    category: str


def load_lexicon(path: str | Path) -> list[LexiconEntry]:
    entries = []
    for lineno, obj in read_jsonl(path):
        try:
            canonical = str(obj["canonical"]).lower()
            surfaces = tuple(str(s).lower() for s in obj.get("surfaces", [canonical]))
            entries.append(
                LexiconEntry(
                    canonical=canonical,
                    surfaces=surfaces or (canonical,),
                    category=str(obj["category"]).upper(),
                )
            )
        except (KeyError, TypeError) as exc:
            raise BridgeError(f"{path}:{lineno}: bad lexicon record ({exc})") from exc
    if not entries:
        raise BridgeError(f"{path}: empty lexicon")
    return entries
