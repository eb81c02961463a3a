"""Training-objective generation: terminology span corruption and the three
instruction tasks (polish, QA, summarize).

Corruption masks lexicon term matches only. Spans are replaced left to right
by <extra_id_k> sentinels and the target lists each sentinel with its original
span, so reconstruct() can splice the paragraph back together exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from . import DataError
from .lexicon import Lexicon, TermCategory, TermMatch, find_terms
from .tokenizer import SubwordVocab, decode, encode, encode_pretoken
from .util import split_sentences, stable_rng

INPUT_PIECE_LIMIT = 512
TARGET_PIECE_LIMIT = 256

DEFAULT_MASK_BUDGET = 0.15

_SENTINEL_RE = re.compile(r"<extra_id_(\d+)>")


def sentinel(k: int) -> str:
    return f"<extra_id_{k}>"


class TaskType(str, Enum):
    POLISH = "POLISH"
    QA = "QA"
    SUMMARIZE = "SUMMARIZE"


class Provenance(str, Enum):
    RULE = "RULE"
    PSEUDO_LABEL = "PSEUDO_LABEL"


TASK_PREFIXES = {
    TaskType.POLISH: "polish: ",
    TaskType.QA: "qa: ",
    TaskType.SUMMARIZE: "summarize: ",
}


@dataclass
class MaskedSpan:
    sentinel_index: int
    char_offset: int
    text: str


@dataclass
class CorruptionExample:
    id: str
    input: str
    target: str
    spans: list[MaskedSpan]
    realized_mask_fraction: float
    word_mask_fraction: float
    flags: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "input": self.input,
            "target": self.target,
            "spans": [
                {"k": s.sentinel_index, "offset": s.char_offset, "text": s.text}
                for s in self.spans
            ],
            "mask_fraction": self.realized_mask_fraction,
            "word_mask_fraction": self.word_mask_fraction,
            "flags": self.flags,
        }


@dataclass
class TaskExample:
    task: TaskType
    id: str
    input: str
    target: str
    provenance: Provenance
    flags: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "task": self.task.value,
            "id": self.id,
            "input": self.input,
            "target": self.target,
            "provenance": self.provenance.value,
        }


def corrupt_spans(
    paragraph: str,
    lexicon: Lexicon,
    vocab: SubwordVocab,
    mask_budget: float = DEFAULT_MASK_BUDGET,
    seed: int = 0,
    example_id: str = "",
    terminal_sentinel: bool = True,
    topoff_random: bool = False,
) -> CorruptionExample | None:
    """Build one span-corruption example, or None when the paragraph has no
    term matches (callers record the skip; nothing is fabricated).

    Term matches are shuffled under the seed and greedily selected until
    their piece count reaches mask_budget of the paragraph's piece count.
    Whitespace-adjacent selections merge into one span. If the budget is
    unreachable the example carries a BUDGET_SHORTFALL flag; with
    topoff_random the gap is instead filled with random non-term word spans
    (flagged RANDOM_TOPOFF, and off by default because it dilutes
    terminology-only masking).
    """
    if not paragraph:
        raise DataError("corrupt_spans: empty paragraph")
    if not (0.0 < mask_budget < 1.0):
        raise DataError(f"mask_budget must be in (0, 1), got {mask_budget}")
    matches = find_terms(paragraph, lexicon)
    if not matches:
        return None

    total_pieces = len(encode(paragraph, vocab))
    budget = mask_budget * total_pieces
    rng = stable_rng(seed, "corrupt", paragraph)
    order = list(matches)
    rng.shuffle(order)

    span_pieces = {
        id(m): len(encode_pretoken(paragraph[m.char_offset : m.end], vocab)) for m in order
    }
    # greedy fill in shuffle order with spans that fit the budget, then close
    # the remaining gap with the one leftover span that lands nearest it
    selected: list[TermMatch] = []
    cum = 0
    leftovers: list[TermMatch] = []
    for m in order:
        if cum >= budget:
            break
        size = span_pieces[id(m)]
        if cum + size <= budget:
            cum += size
            selected.append(m)
        else:
            leftovers.append(m)
    if cum < budget and leftovers:
        closer = min(leftovers, key=lambda m: span_pieces[id(m)])
        if (cum + span_pieces[id(closer)] - budget) < (budget - cum):
            selected.append(closer)
            cum += span_pieces[id(closer)]
    if not selected:  # every span dwarfs the budget; mask the first drawn anyway
        selected.append(order[0])
    flags = []
    spans_chosen = [(m.char_offset, m.end) for m in selected]
    if sum(span_pieces.values()) < budget:
        if topoff_random:
            cum = sum(span_pieces[id(m)] for m in selected)
            extra = _random_topoff(paragraph, matches, budget - cum, vocab, rng)
            if extra:
                spans_chosen.extend(extra)
                flags.append("RANDOM_TOPOFF")
            else:
                flags.append("BUDGET_SHORTFALL")
        else:
            flags.append("BUDGET_SHORTFALL")

    # merge selections separated by nothing or pure whitespace into one span
    spans_chosen.sort()
    merged: list[tuple[int, int]] = []
    for start, end in spans_chosen:
        if merged and not paragraph[merged[-1][1] : start].strip():
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))

    spans: list[MaskedSpan] = []
    input_parts: list[str] = []
    target_parts: list[str] = []
    cursor = 0
    masked_pieces = 0
    masked_words = 0
    for k, (start, end) in enumerate(merged):
        span_text = paragraph[start:end]
        spans.append(MaskedSpan(sentinel_index=k, char_offset=start, text=span_text))
        input_parts.append(paragraph[cursor:start])
        input_parts.append(sentinel(k))
        target_parts.append(sentinel(k))
        target_parts.append(span_text)
        cursor = end
        masked_pieces += len(encode_pretoken(span_text, vocab))
        masked_words += len(span_text.split())
    input_parts.append(paragraph[cursor:])
    if terminal_sentinel:
        target_parts.append(sentinel(len(merged)))

    total_words = len(paragraph.split())
    return CorruptionExample(
        id=example_id,
        input="".join(input_parts),
        target=" ".join(target_parts),
        spans=spans,
        realized_mask_fraction=masked_pieces / total_pieces,
        word_mask_fraction=masked_words / total_words if total_words else 0.0,
        flags=flags,
    )


def _random_topoff(
    paragraph: str,
    matches: list[TermMatch],
    gap: float,
    vocab: SubwordVocab,
    rng,
) -> list[tuple[int, int]]:
    """Random non-term word spans filling a piece-budget gap."""
    taken = [(m.char_offset, m.end) for m in matches]
    candidates = []
    for m in re.finditer(r"\S+", paragraph):
        if any(s < m.end() and m.start() < e for s, e in taken):
            continue
        candidates.append((m.start(), m.end()))
    rng.shuffle(candidates)
    chosen: list[tuple[int, int]] = []
    for start, end in candidates:
        if gap <= 0:
            break
        pieces = len(encode_pretoken(paragraph[start:end], vocab))
        chosen.append((start, end))
        gap -= pieces
    return chosen


def _parse_target_spans(target: str) -> dict[int, str]:
    """Map sentinel index -> span text from a corruption target string."""
    parts = _SENTINEL_RE.split(target)
    # parts alternates: [prefix, k0, seg0, k1, seg1, ...]
    if parts[0].strip():
        raise DataError("target has text before the first sentinel")
    spans: dict[int, str] = {}
    indices = [int(parts[i]) for i in range(1, len(parts), 2)]
    if len(set(indices)) != len(indices):
        dup = next(k for k in indices if indices.count(k) > 1)
        raise DataError(f"sentinel <extra_id_{dup}> repeated in target")
    segments = [parts[i] for i in range(2, len(parts), 2)]
    for pos, k in enumerate(indices):
        if pos < len(indices) - 1:
            seg = segments[pos]
            if not (seg.startswith(" ") and seg.endswith(" ")):
                raise DataError(f"malformed span segment for sentinel {k}")
            spans[k] = seg[1:-1]
        else:
            seg = segments[pos] if pos < len(segments) else ""
            if seg == "":
                spans[k] = None  # terminal sentinel carries no span
            else:
                if not seg.startswith(" "):
                    raise DataError(f"malformed span segment for sentinel {k}")
                spans[k] = seg[1:]
    return spans


def reconstruct(input_text: str, target: str) -> str:
    """Splice each target span back over its sentinel; exact source recovery.

    Raises DataError naming the sentinel on any input/target mismatch.
    """
    input_ks = [int(k) for k in _SENTINEL_RE.findall(input_text)]
    if input_ks != list(range(len(input_ks))):
        raise DataError(f"input sentinels not contiguous from 0: {input_ks}")
    if not input_ks:
        if target.strip():
            raise DataError("target has spans but input has no sentinels")
        return input_text
    spans = _parse_target_spans(target)
    for k in input_ks:
        if spans.get(k) is None:
            raise DataError(f"sentinel <extra_id_{k}> missing from target")
    extras = [k for k, v in spans.items() if v is not None and k not in set(input_ks)]
    if extras:
        raise DataError(f"sentinel <extra_id_{extras[0]}> in target but not input")
    return _SENTINEL_RE.sub(lambda m: spans[int(m.group(1))], input_text)


_ARTICLES = {"the", "a", "an"}
_AGREEMENT_SWAP = {"is": "are", "are": "is", "was": "were", "were": "was"}
_AUXILIARIES = {"is", "are", "was", "were", "be", "been", "being", "has", "have", "had"}
_PREPOSITIONS = {"over", "in", "on", "at", "of", "with", "within", "during", "throughout"}


def _term_canonicals(text: str, lexicon: Lexicon) -> set[str]:
    return {m.entry.canonical for m in find_terms(text, lexicon)}


def synthesize_noisy(sentence: str, lexicon: Lexicon, seed: int = 0) -> str:
    """Degrade a clean sentence into a noisy register for polish-pair synthesis.

    Applies 1-3 seeded degradations (article drop, is/are agreement break,
    auxiliary truncation, preposition drop) that never touch lexicon term
    spans; each application is reverted if it would change the sentence's
    canonical term set. Returns the sentence unchanged when nothing applies.
    """
    rng = stable_rng(seed, "noise", sentence)
    baseline = _term_canonicals(sentence, lexicon)

    def protected_spans(text: str) -> list[tuple[int, int]]:
        return [(m.char_offset, m.end) for m in find_terms(text, lexicon)]

    def apply(op: str, text: str) -> str:
        spans = protected_spans(text)
        tokens = list(re.finditer(r"\S+", text))
        keep: list[str] = []
        changed = False
        for tok in tokens:
            word = tok.group(0)
            bare = word.strip(".,;:").lower()
            inside = any(s <= tok.start() < e for s, e in spans)
            if inside:
                keep.append(word)
                continue
            if op == "articles" and bare in _ARTICLES:
                changed = True
                continue
            if op == "agreement" and bare in _AGREEMENT_SWAP:
                keep.append(word.lower().replace(bare, _AGREEMENT_SWAP[bare], 1))
                changed = True
                continue
            if op == "auxiliaries" and bare in _AUXILIARIES:
                changed = True
                continue
            if op == "prepositions" and bare in _PREPOSITIONS:
                changed = True
                continue
            keep.append(word)
        return " ".join(keep) if changed else text

    ops = ["articles", "agreement", "auxiliaries", "prepositions"]
    rng.shuffle(ops)
    n_ops = rng.randint(1, 3)
    noisy = sentence
    applied = 0
    for op in ops:
        if applied >= n_ops:
            break
        candidate = apply(op, noisy)
        if candidate == noisy:
            continue
        if not baseline <= _term_canonicals(candidate, lexicon):
            continue  # degradation would disturb a term match; skip it
        noisy = candidate
        applied += 1
    return noisy


def build_polish_pairs(
    sentences: Iterable[tuple[str, str]],
    lexicon: Lexicon,
    seed: int = 0,
    pseudo_labels: dict[str, str] | None = None,
) -> list[TaskExample]:
    """Polish pairs from (sentence_id, clean sentence) items.

    Rule route: input = synthesized noisy form, target = the clean sentence.
    Pseudo-label route: ids present in `pseudo_labels` pair the original
    sentence with the supplied reference instead.
    """
    prefix = TASK_PREFIXES[TaskType.POLISH]
    out: list[TaskExample] = []
    for sid, clean in sentences:
        if pseudo_labels and sid in pseudo_labels:
            out.append(
                TaskExample(
                    task=TaskType.POLISH,
                    id=sid,
                    input=prefix + clean,
                    target=pseudo_labels[sid],
                    provenance=Provenance.PSEUDO_LABEL,
                )
            )
            continue
        noisy = synthesize_noisy(clean, lexicon, seed=seed)
        if noisy == clean:
            continue  # nothing degradable; no informative pair
        out.append(
            TaskExample(
                task=TaskType.POLISH,
                id=sid,
                input=prefix + noisy,
                target=clean,
                provenance=Provenance.RULE,
            )
        )
    return out


QA_TEMPLATES = (
    "What does {term} indicate in an EEG?",
    "Define {term}.",
)


def build_qa_pairs(lexicon: Lexicon) -> tuple[list[TaskExample], int]:
    """Templated terminology QA pairs; returns (examples, skipped_no_definition)."""
    prefix = TASK_PREFIXES[TaskType.QA]
    out: list[TaskExample] = []
    skipped = 0
    for entry in lexicon.entries:
        if not entry.definition:
            skipped += 1
            continue
        for t, template in enumerate(QA_TEMPLATES):
            out.append(
                TaskExample(
                    task=TaskType.QA,
                    id=f"qa:{entry.canonical}:t{t}",
                    input=prefix + template.format(term=entry.display),
                    target=entry.definition,
                    provenance=Provenance.RULE,
                )
            )
    return out, skipped


_SUMMARY_CATEGORIES = (TermCategory.PATTERN, TermCategory.LOCALIZATION)


def extractive_summary(paragraph: str, lexicon: Lexicon) -> str:
    """Rule fallback: the sentence with the most pattern/localization matches.

    Extractive by construction, so negations and terms are carried verbatim.
    """
    sentences = split_sentences(paragraph)
    if not sentences:
        return paragraph
    best = sentences[0]
    best_score = -1
    for sent in sentences:
        score = sum(
            1 for m in find_terms(sent, lexicon) if m.entry.category in _SUMMARY_CATEGORIES
        )
        if score > best_score:
            best = sent
            best_score = score
    return best


def build_sum_pairs(
    paragraphs: Iterable[tuple[str, str]],
    lexicon: Lexicon,
    references: dict[str, str] | None = None,
    seed: int = 0,
) -> list[TaskExample]:
    """Summarization pairs from (paragraph_id, text) items.

    Supplied references (pseudo-labels keyed by paragraph id) win; remaining
    paragraphs fall back to the extractive rule. Reference ids that match no
    paragraph are a hard error.
    """
    prefix = TASK_PREFIXES[TaskType.SUMMARIZE]
    items = list(paragraphs)
    if references:
        known = {pid for pid, _ in items}
        unknown = sorted(set(references) - known)
        if unknown:
            raise DataError(f"summary reference ids not in corpus: {', '.join(unknown)}")
    out: list[TaskExample] = []
    for pid, text in items:
        if references and pid in references:
            out.append(
                TaskExample(
                    task=TaskType.SUMMARIZE,
                    id=pid,
                    input=prefix + text,
                    target=references[pid],
                    provenance=Provenance.PSEUDO_LABEL,
                )
            )
        else:
            out.append(
                TaskExample(
                    task=TaskType.SUMMARIZE,
                    id=pid,
                    input=prefix + text,
                    target=extractive_summary(text, lexicon),
                    provenance=Provenance.RULE,
                )
            )
    return out


def truncate_example(example: TaskExample, vocab: SubwordVocab) -> TaskExample:
    """Piece-level truncation to the 512-in / 256-out limits, with flags."""
    flags = list(example.flags)
    input_text = example.input
    target_text = example.target
    in_pieces = encode(input_text, vocab)
    if len(in_pieces) > INPUT_PIECE_LIMIT:
        input_text = decode(in_pieces[:INPUT_PIECE_LIMIT], vocab)
        flags.append("TRUNCATED_INPUT")
    out_pieces = encode(target_text, vocab)
    if len(out_pieces) > TARGET_PIECE_LIMIT:
        target_text = decode(out_pieces[:TARGET_PIECE_LIMIT], vocab)
        flags.append("TRUNCATED_TARGET")
    return TaskExample(
        task=example.task,
        id=example.id,
        input=input_text,
        target=target_text,
        provenance=example.provenance,
        flags=flags,
    )
