"""Deterministic stub model: uniform scorer plus lexicon-frequency candidate
generator. Keeps every bridge mode testable without downloading weights, and
gives the analytic anchor PPL == vocab size for the toolkit's perplexity."""

from __future__ import annotations

import math
import re
from collections import Counter

from .kit_io import CorruptionRow, KitVocab, LexiconEntry, TaskRow, TASK_PREFIXES

_SENTENCE_END = re.compile(r"(?<=[.!?])\s")


def strip_prefix(row: TaskRow) -> str:
    prefix = TASK_PREFIXES.get(row.task, "")
    return row.input[len(prefix) :] if prefix and row.input.startswith(prefix) else row.input


def generate_output(row: TaskRow) -> str:
    body = strip_prefix(row)
    if row.task == "SUMMARIZE":
        return _SENTENCE_END.split(body, maxsplit=1)[0].strip()
    return body


def uniform_nll(vocab: KitVocab) -> float:
    return math.log(vocab.size)


class CandidateGenerator:
    """Top-k lexicon terms of a span's category, ranked by how often each
    term's surfaces occur in the dataset inputs (ties by canonical)."""

    def __init__(self, entries: list[LexiconEntry], dataset_texts: list[str]):
        self.entries = entries
        blob = "\n".join(dataset_texts).lower()
        self.freq: Counter[str] = Counter()
        for entry in entries:
            count = 0
            for surface in entry.surfaces:
                count += len(re.findall(rf"\b{re.escape(surface)}\b", blob))
            self.freq[entry.canonical] = count
        self._by_category: dict[str, list[str]] = {}
        for entry in entries:
            self._by_category.setdefault(entry.category, [])
        for category, canonicals in self._by_category.items():
            canonicals.extend(
                sorted(
                    {e.canonical for e in entries if e.category == category},
                    key=lambda c: (-self.freq[c], c),
                )
            )

    def category_of_span(self, span_text: str) -> str:
        lowered = span_text.lower()
        for entry in self.entries:
            if lowered in entry.surfaces:
                return entry.category
        # fall back to the category of the longest surface inside the span
        best = None
        for entry in self.entries:
            for surface in entry.surfaces:
                if re.search(rf"\b{re.escape(surface)}\b", lowered):
                    if best is None or len(surface) > len(best[0]):
                        best = (surface, entry.category)
        return best[1] if best else "PATTERN"

    def candidates(self, span_text: str, top_k: int) -> list[tuple[str, float]]:
        category = self.category_of_span(span_text)
        ranked = self._by_category.get(category) or self._by_category.get("PATTERN") or []
        chosen = ranked[:top_k] or [""]
        return [(term, float(len(chosen) - i)) for i, term in enumerate(chosen)]


def span_records(
    row: CorruptionRow, generator: CandidateGenerator, top_k: int
) -> list[dict]:
    out = []
    for span in row.spans:
        out.append(
            {
                "id": f"{row.id}#{span.k}",
                "candidates": [
                    {"text": text, "score": score}
                    for text, score in generator.candidates(span.text, top_k)
                ],
            }
        )
    return out
