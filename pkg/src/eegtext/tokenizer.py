"""Domain subword vocabulary: byte-level pair-merge training, encoding, and quality metrics.

Training is plain byte-pair merging over whitespace pretokens with a fully
deterministic tie-break (higher pair count, then lexicographically smaller
pair), so identical inputs produce byte-identical vocab files. Sentinels and
PHI placeholders are reserved specials: they encode to themselves and are
never produced by merges, which keeps them atomic through every downstream
dataset.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import DataError
from .corpus import PLACEHOLDERS
from .lexicon import Lexicon, find_terms

VOCAB_FORMAT_VERSION = 1

SENTINELS = tuple(f"<extra_id_{i}>" for i in range(100))
DEFAULT_SPECIALS = ("<pad>", "<unk>") + SENTINELS + PLACEHOLDERS


def _bytes_to_unicode() -> dict[int, str]:
    """Bijective byte -> printable character map (GPT-2 convention).

    Keeps vocab files readable and JSON-safe while preserving an exact
    byte-level round trip.
    """
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


def _to_symbols(token: str) -> tuple[str, ...]:
    return tuple(_BYTE_TO_CHAR[b] for b in token.encode("utf-8"))


@dataclass
class SubwordVocab:
    pieces: list[str]
    merges: list[tuple[str, str]]
    specials: list[str]
    protected_terms: bool = False
    config: dict = field(default_factory=dict)
    _ranks: dict[tuple[str, str], int] = field(default_factory=dict, repr=False, compare=False)
    _piece_set: set[str] = field(default_factory=set, repr=False, compare=False)
    _special_re: re.Pattern | None = field(default=None, repr=False, compare=False)
    _cache: dict[str, tuple[str, ...]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._piece_set = set(self.pieces)
        escaped = sorted((re.escape(s) for s in self.specials), key=len, reverse=True)
        self._special_re = re.compile("(" + "|".join(escaped) + ")")

    @property
    def size(self) -> int:
        return len(self.pieces)

    def save(self, path: str | Path) -> None:
        data = {
            "version": VOCAB_FORMAT_VERSION,
            "config": self.config,
            "specials": self.specials,
            "pieces": self.pieces,
            "merges": [list(m) for m in self.merges],
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(data, fh, ensure_ascii=True, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "SubwordVocab":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("version") != VOCAB_FORMAT_VERSION:
            raise DataError(f"{path}: unsupported vocab format version {data.get('version')!r}")
        config = data.get("config", {})
        return cls(
            pieces=list(data["pieces"]),
            merges=[tuple(m) for m in data["merges"]],
            specials=list(data["specials"]),
            protected_terms=bool(config.get("protect_terms", False)),
            config=config,
        )


def _pretokens(
    text: str, lexicon: Lexicon | None, protect_terms: bool
) -> Iterable[str]:
    """Whitespace pretokens; with protection, lexicon term matches stay atomic."""
    if not (protect_terms and lexicon is not None):
        yield from text.split()
        return
    cursor = 0
    for m in find_terms(text, lexicon):
        yield from text[cursor : m.char_offset].split()
        yield text[m.char_offset : m.end]
        cursor = m.end
    yield from text[cursor:].split()


def train_subword(
    paragraphs: Iterable[str],
    vocab_size: int,
    lexicon: Lexicon | None = None,
    protect_terms: bool = False,
    seed: int = 0,
    specials: Sequence[str] = DEFAULT_SPECIALS,
) -> SubwordVocab:
    """Train a byte-level pair-merge vocabulary on whitespace-pretokenized text.

    With protect_terms, lexicon surfaces are treated as atomic pretokens so
    frequent multi-word terms can merge into single pieces. Deterministic
    given (corpus bytes, vocab_size, seed, flags); merging stops early when
    no pair occurs at least twice.
    """
    specials = list(specials)
    byte_pieces = [_BYTE_TO_CHAR[b] for b in range(256)]
    floor = len(specials) + len(byte_pieces)
    if vocab_size < floor:
        raise DataError(
            f"vocab_size {vocab_size} below minimum {floor} (specials + byte alphabet)"
        )

    token_freq: Counter[str] = Counter()
    empty = True
    for para in paragraphs:
        empty = False
        token_freq.update(_pretokens(para, lexicon, protect_terms))
    if empty or not token_freq:
        raise DataError("training corpus is empty")

    words: list[list[str]] = []
    freqs: list[int] = []
    for token, freq in sorted(token_freq.items()):
        words.append(list(_to_symbols(token)))
        freqs.append(freq)

    pair_counts: Counter[tuple[str, str]] = Counter()
    pair_where: dict[tuple[str, str], set[int]] = {}
    for wid, word in enumerate(words):
        f = freqs[wid]
        for pair in zip(word, word[1:]):
            pair_counts[pair] += f
            pair_where.setdefault(pair, set()).add(wid)

    special_set = set(specials)
    merges: list[tuple[str, str]] = []
    pieces = specials + byte_pieces

    while len(pieces) < vocab_size and pair_counts:
        (best, count) = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if count < 2:
            break
        merged = best[0] + best[1]
        if merged in special_set:  # specials are never produced by merges
            del pair_counts[best]
            pair_where.pop(best, None)
            continue
        merges.append(best)
        pieces.append(merged)
        for wid in sorted(pair_where.get(best, ())):
            word = words[wid]
            f = freqs[wid]
            for pair in zip(word, word[1:]):
                pair_counts[pair] -= f
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                    pair_where.pop(pair, None)
                else:
                    where = pair_where.get(pair)
                    if where:
                        where.discard(wid)
            new_word = []
            i = 0
            while i < len(word):
                if i + 1 < len(word) and word[i] == best[0] and word[i + 1] == best[1]:
                    new_word.append(merged)
                    i += 2
                else:
                    new_word.append(word[i])
                    i += 1
            words[wid] = new_word
            for pair in zip(new_word, new_word[1:]):
                pair_counts[pair] += f
                pair_where.setdefault(pair, set()).add(wid)
        pair_where.pop(best, None)
        pair_counts.pop(best, None)

    return SubwordVocab(
        pieces=pieces,
        merges=merges,
        specials=specials,
        protected_terms=protect_terms,
        config={
            "vocab_size": vocab_size,
            "requested_vocab_size": vocab_size,
            "seed": seed,
            "protect_terms": protect_terms,
        },
    )


def _apply_merges(symbols: tuple[str, ...], vocab: SubwordVocab) -> tuple[str, ...]:
    word = list(symbols)
    ranks = vocab._ranks
    while len(word) > 1:
        best_rank = None
        best_idx = -1
        for i in range(len(word) - 1):
            rank = ranks.get((word[i], word[i + 1]))
            if rank is not None and (best_rank is None or rank < best_rank):
                best_rank = rank
                best_idx = i
        if best_rank is None:
            break
        merged = word[best_idx] + word[best_idx + 1]
        left, right = word[best_idx], word[best_idx + 1]
        new_word = []
        i = 0
        while i < len(word):
            if i + 1 < len(word) and word[i] == left and word[i + 1] == right:
                new_word.append(merged)
                i += 2
            else:
                new_word.append(word[i])
                i += 1
        word = new_word
    return tuple(word)


def encode_pretoken(token: str, vocab: SubwordVocab) -> list[str]:
    """Encode one pretoken (may contain internal spaces) without special handling."""
    cached = vocab._cache.get(token)
    if cached is None:
        cached = _apply_merges(_to_symbols(token), vocab)
        if len(vocab._cache) < 200_000:
            vocab._cache[token] = cached
    return list(cached)


def encode(text: str, vocab: SubwordVocab) -> list[str]:
    """Encode text to pieces. Specials encode to themselves; byte-level
    round trip guarantees decode(encode(text)) == text."""
    out: list[str] = []
    for segment in vocab._special_re.split(text):
        if not segment:
            continue
        if segment in vocab._piece_set and segment in vocab.specials:
            out.append(segment)
            continue
        for pretoken in _PRETOKEN_RE.findall(segment):
            out.extend(encode_pretoken(pretoken, vocab))
    return out


def decode(pieces: Iterable[str], vocab: SubwordVocab) -> str:
    specials = set(vocab.specials)
    chunks: list[str] = []
    buf = bytearray()
    for piece in pieces:
        if piece in specials:
            if buf:
                chunks.append(buf.decode("utf-8", errors="replace"))
                buf = bytearray()
            chunks.append(piece)
        else:
            for ch in piece:
                b = _CHAR_TO_BYTE.get(ch)
                if b is None:
                    raise DataError(f"piece contains unknown symbol {ch!r}")
                buf.append(b)
    if buf:
        chunks.append(buf.decode("utf-8", errors="replace"))
    return "".join(chunks)


@dataclass
class TokenizerMetrics:
    oov_rate: float  # % of word types not encoded as a single piece
    avg_subwords: float  # mean pieces per word token
    split_ratio: float  # % of word tokens split into >= 2 pieces
    multiword_ratio: float  # pieces per word over multi-word term occurrences
    multiword_ratio_per_term: float  # companion variant: pieces per occurrence
    counts: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "oov_rate": self.oov_rate,
            "avg_subwords": self.avg_subwords,
            "split_ratio": self.split_ratio,
            "multiword_ratio": self.multiword_ratio,
            "multiword_ratio_per_term": self.multiword_ratio_per_term,
            "counts": self.counts,
        }


METRIC_DEFINITIONS = {
    "oov_rate": "percent of distinct whitespace word types whose encoding is not a single piece",
    "avg_subwords": "mean number of pieces per whitespace word token",
    "split_ratio": "percent of whitespace word tokens split into two or more pieces",
    "multiword_ratio": (
        "total non-whitespace pieces over all multi-word lexicon-term occurrences, "
        "divided by the total number of words in those occurrences"
    ),
    "multiword_ratio_per_term": (
        "companion variant: total non-whitespace pieces divided by the number of "
        "multi-word term occurrences"
    ),
}


def _is_whitespace_piece(piece: str) -> bool:
    return all(chr(_CHAR_TO_BYTE[c]).isspace() for c in piece if c in _CHAR_TO_BYTE)


def eval_tokenizer(
    vocab: SubwordVocab, corpus: Iterable[str], lexicon: Lexicon
) -> TokenizerMetrics:
    """Compute the four tokenizer-quality metrics over an evaluation corpus.

    Granularity: OOV over word types, AS/SS over word tokens, MTR over
    multi-word term occurrences (terms encoded atomically, whitespace
    pieces excluded from the piece count).
    """
    type_pieces: dict[str, int] = {}
    n_tokens = 0
    n_split = 0
    total_pieces = 0
    term_pieces = 0
    term_words = 0
    term_occurrences = 0

    for para in corpus:
        for token in para.split():
            n_tokens += 1
            count = type_pieces.get(token)
            if count is None:
                count = len(encode_pretoken(token, vocab))
                type_pieces[token] = count
            total_pieces += count
            if count >= 2:
                n_split += 1
        for m in find_terms(para, lexicon):
            occurrence = para[m.char_offset : m.end]
            words = occurrence.split()
            if len(words) < 2:
                continue
            pieces = [
                p for p in encode_pretoken(occurrence, vocab) if not _is_whitespace_piece(p)
            ]
            term_pieces += len(pieces)
            term_words += len(words)
            term_occurrences += 1

    if n_tokens == 0:
        raise DataError("evaluation corpus contains no words")

    n_types = len(type_pieces)
    n_oov_types = sum(1 for c in type_pieces.values() if c != 1)
    return TokenizerMetrics(
        oov_rate=100.0 * n_oov_types / n_types,
        avg_subwords=total_pieces / n_tokens,
        split_ratio=100.0 * n_split / n_tokens,
        multiword_ratio=(term_pieces / term_words) if term_words else 1.0,
        multiword_ratio_per_term=(term_pieces / term_occurrences) if term_occurrences else 1.0,
        counts={
            "word_types": n_types,
            "word_tokens": n_tokens,
            "multiword_term_occurrences": term_occurrences,
            "multiword_term_words": term_words,
        },
    )
