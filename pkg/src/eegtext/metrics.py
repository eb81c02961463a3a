"""Scalar evaluation metrics over prediction records.

All metrics are pure aggregations: identical inputs produce identical
reports. Conventions that the underlying abbreviations leave open are pinned
here and echoed in every metric report: perplexity uses natural log with
token-weighted pooling, calibration uses equal-width bins, the
term-introduction rate implements "Term-Prec" as newly-introduced-terms over
candidate terms (lower is better).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from . import DataError
from .corpus import SectionKind
from .ie import Frequency, SlotFrame, frame_parse, tag_sentence
from .lexicon import Lexicon, find_terms
from .util import split_sentences


@dataclass
class TokenNLL:
    piece: str
    nll: float
    section: SectionKind = SectionKind.OTHER


@dataclass
class PredictionRecord:
    id: str
    output: str | None = None
    candidates: list[tuple[str, float]] | None = None
    token_nlls: list[TokenNLL] | None = None
    slot_confidences: dict[str, float] | None = None

    def validate(self, origin: str = "prediction") -> None:
        if (
            self.output is None
            and self.candidates is None
            and self.token_nlls is None
            and self.slot_confidences is None
        ):
            raise DataError(f"{origin}: record {self.id!r} carries no payload")
        if self.candidates is not None:
            scores = [s for _, s in self.candidates]
            if any(scores[i] < scores[i + 1] for i in range(len(scores) - 1)):
                raise DataError(f"{origin}: record {self.id!r} candidate scores increase")
        if self.token_nlls is not None:
            for t in self.token_nlls:
                if not math.isfinite(t.nll) or t.nll < 0:
                    raise DataError(f"{origin}: record {self.id!r} has invalid nll {t.nll}")
        if self.slot_confidences is not None:
            for slot, conf in self.slot_confidences.items():
                if not (0.0 <= conf <= 1.0):
                    raise DataError(
                        f"{origin}: record {self.id!r} confidence {conf} for {slot} outside [0, 1]"
                    )

    def to_record(self) -> dict:
        out: dict = {"id": self.id}
        if self.output is not None:
            out["output"] = self.output
        if self.candidates is not None:
            out["candidates"] = [{"text": t, "score": s} for t, s in self.candidates]
        if self.token_nlls is not None:
            out["token_nlls"] = [
                {"piece": t.piece, "nll": t.nll, "section": t.section.value}
                for t in self.token_nlls
            ]
        if self.slot_confidences is not None:
            out["slot_confidences"] = dict(self.slot_confidences)
        return out


def prediction_from_record(obj: dict, origin: str = "predictions") -> PredictionRecord:
    try:
        candidates = None
        if "candidates" in obj:
            candidates = [(str(c["text"]), float(c["score"])) for c in obj["candidates"]]
        token_nlls = None
        if "token_nlls" in obj:
            token_nlls = [
                TokenNLL(
                    piece=str(t["piece"]),
                    nll=float(t["nll"]),
                    section=SectionKind(t.get("section", "OTHER")),
                )
                for t in obj["token_nlls"]
            ]
        record = PredictionRecord(
            id=str(obj["id"]),
            output=obj.get("output"),
            candidates=candidates,
            token_nlls=token_nlls,
            slot_confidences=(
                {str(k): float(v) for k, v in obj["slot_confidences"].items()}
                if "slot_confidences" in obj
                else None
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{origin}: bad prediction record ({exc})") from exc
    record.validate(origin)
    return record


_TOKEN_CLEAN = re.compile(r"[^\w\s]")


def _rouge_tokens(text: str) -> list[str]:
    return _TOKEN_CLEAN.sub(" ", text.casefold()).split()


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        row = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                row.append(prev[j - 1] + 1)
            else:
                row.append(max(prev[j], row[-1]))
        prev = row
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> tuple[float, float, float]:
    """LCS-based ROUGE-L precision, recall, and harmonic-mean F1."""
    cand = _rouge_tokens(candidate)
    ref = _rouge_tokens(reference)
    if not cand or not ref:
        return (0.0, 0.0, 0.0)
    lcs = _lcs_len(cand, ref)
    p = lcs / len(cand)
    r = lcs / len(ref)
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return (p, r, f1)


class Fact(NamedTuple):
    pattern: str
    localization: str  # "" when unstated
    laterality: str  # "" when unstated
    frequency: str  # "" when unstated
    negation: bool


def _freq_str(freq: Frequency | None) -> str:
    if freq is None:
        return ""
    return f"{freq.hz:g}hz" if freq.hz is not None else freq.band


def extract_facts(text: str, lexicon: Lexicon) -> set[Fact]:
    """Rule-derived fact tuples, one per (pattern, localization) pairing per
    sentence; duplicates collapse."""
    facts: set[Fact] = set()
    for sentence in split_sentences(text):
        frame = tag_sentence(sentence, lexicon)
        if not frame.pattern:
            continue
        locs = frame.localization or [""]
        for pattern in frame.pattern:
            for loc in locs:
                facts.add(
                    Fact(
                        pattern=pattern,
                        localization=loc,
                        laterality=frame.laterality or "",
                        frequency=_freq_str(frame.frequency),
                        negation=frame.negation,
                    )
                )
    return facts


def count_contradictions(cand_facts: set[Fact], ref_facts: set[Fact]) -> int:
    """Contradiction: facts sharing (pattern, localization) with opposite negation.

    Counted once per conflicting (pattern, localization) key over the
    unmatched facts from each side.
    """
    cand_only = cand_facts - ref_facts
    ref_only = ref_facts - cand_facts
    cand_keys: dict[tuple[str, str], set[bool]] = {}
    for f in cand_only:
        cand_keys.setdefault((f.pattern, f.localization), set()).add(f.negation)
    count = 0
    seen: set[tuple[str, str]] = set()
    for f in ref_only:
        key = (f.pattern, f.localization)
        if key in seen:
            continue
        if key in cand_keys and any(neg != f.negation for neg in cand_keys[key]):
            count += 1
            seen.add(key)
    return count


@dataclass
class FactScore:
    precision: float
    recall: float
    f1: float
    contradictions: int
    n_candidate_facts: int
    n_reference_facts: int


def fact_f1(candidate: str, reference: str, lexicon: Lexicon) -> FactScore:
    """Rule-based fact overlap with contradiction accounting.

    A contradicting fact pair stays unmatched, contributing exactly one false
    positive and one false negative; the pair is additionally reported in the
    contradiction count.
    """
    cand = extract_facts(candidate, lexicon)
    ref = extract_facts(reference, lexicon)
    contradictions = count_contradictions(cand, ref)
    if not cand and not ref:
        return FactScore(1.0, 1.0, 1.0, 0, 0, 0)
    tp = len(cand & ref)
    p = tp / len(cand) if cand else 0.0
    r = tp / len(ref) if ref else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return FactScore(p, r, f1, contradictions, len(cand), len(ref))


def perplexity(
    records: Iterable[PredictionRecord], section_filter: SectionKind | None = None
) -> float:
    """exp(total nll / total pieces) over pieces passing the section filter.

    Natural-log convention, token-weighted across records; invariant to
    record order and sharding.
    """
    total_nll = 0.0
    total_pieces = 0
    for record in records:
        if record.token_nlls is None:
            raise DataError(f"record {record.id!r} has no token_nlls")
        for t in record.token_nlls:
            if section_filter is not None and t.section != section_filter:
                continue
            total_nll += t.nll
            total_pieces += 1
    if total_pieces == 0:
        raise DataError("no pieces after section filter; perplexity undefined")
    return math.exp(total_nll / total_pieces)


_WS_RUN = re.compile(r"\s+")


def _normalize_surface(text: str) -> str:
    return _WS_RUN.sub(" ", text.casefold()).strip()


def topk_accuracy(
    records: Iterable[PredictionRecord], gold_spans: dict[str, str], k: int
) -> float:
    """Percent of gold spans found among the top-k candidate strings."""
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    by_id = {}
    for record in records:
        by_id[record.id] = record
    hits = 0
    total = 0
    for gid, gold in gold_spans.items():
        record = by_id.get(gid)
        if record is None or not record.candidates:
            raise DataError(f"no candidates for gold span id {gid!r}")
        total += 1
        gold_norm = _normalize_surface(gold)
        if any(_normalize_surface(t) == gold_norm for t, _ in record.candidates[:k]):
            hits += 1
    if total == 0:
        raise DataError("no gold spans to score")
    return 100.0 * hits / total


@dataclass
class CalibrationBin:
    lower: float
    upper: float
    count: int
    mean_confidence: float
    accuracy: float


@dataclass
class CalibrationResult:
    ece: float
    mce: float
    bins: list[CalibrationBin]
    n_points: int


def _slot_correct(pred: SlotFrame, gold: SlotFrame, slot: str) -> bool:
    if slot == "laterality":
        return pred.laterality == gold.laterality
    if slot == "localization":
        return sorted(pred.localization) == sorted(gold.localization)
    if slot == "pattern":
        return sorted(pred.pattern) == sorted(gold.pattern)
    if slot == "frequency":
        return _freq_str(pred.frequency) == _freq_str(gold.frequency)
    if slot == "negation":
        return pred.negation == gold.negation
    raise DataError(f"unknown slot {slot!r}")


def calibration_points(
    records: Iterable[PredictionRecord], gold_frames: dict[str, SlotFrame]
) -> list[tuple[float, bool]]:
    """(confidence, correct) pairs: per-slot exact match against gold frames."""
    points: list[tuple[float, bool]] = []
    for record in records:
        if record.slot_confidences is None:
            continue
        gold = gold_frames.get(record.id)
        if gold is None:
            raise DataError(f"no gold frame for record {record.id!r}")
        pred = frame_parse(record.output or "")
        for slot, conf in record.slot_confidences.items():
            points.append((conf, _slot_correct(pred, gold, slot)))
    return points


def calibration(points: Sequence[tuple[float, bool]], bins: int = 10) -> CalibrationResult:
    """ECE/MCE over equal-width confidence bins; empty bins are skipped."""
    if not points:
        raise DataError("no confidence-bearing predictions to calibrate")
    if bins < 1:
        raise DataError(f"bins must be >= 1, got {bins}")
    totals = [[0, 0.0, 0] for _ in range(bins)]  # count, conf sum, correct
    for conf, correct in points:
        if not (0.0 <= conf <= 1.0):
            raise DataError(f"confidence {conf} outside [0, 1]")
        b = min(int(conf * bins), bins - 1)
        totals[b][0] += 1
        totals[b][1] += conf
        totals[b][2] += 1 if correct else 0
    n = len(points)
    ece = 0.0
    mce = 0.0
    rows: list[CalibrationBin] = []
    for b, (count, conf_sum, correct) in enumerate(totals):
        if count == 0:
            continue
        mean_conf = conf_sum / count
        acc = correct / count
        gap = abs(acc - mean_conf)
        ece += (count / n) * gap
        mce = max(mce, gap)
        rows.append(
            CalibrationBin(
                lower=b / bins,
                upper=(b + 1) / bins,
                count=count,
                mean_confidence=mean_conf,
                accuracy=acc,
            )
        )
    return CalibrationResult(ece=ece, mce=mce, bins=rows, n_points=n)


def term_intro_rate(candidate: str, source: str, lexicon: Lexicon) -> float:
    """|candidate terms not in source| / |candidate terms|; 0 when no candidate terms.

    Implements the newly-introduced-terms reading of "Term-Prec": lower is better.
    """
    cand_terms = {m.entry.canonical for m in find_terms(candidate, lexicon)}
    if not cand_terms:
        return 0.0
    source_terms = {m.entry.canonical for m in find_terms(source, lexicon)}
    return len(cand_terms - source_terms) / len(cand_terms)


def contradiction_rate(candidate: str, source: str, lexicon: Lexicon) -> float:
    """Fact-level conflicts between candidate and source per candidate fact."""
    cand = extract_facts(candidate, lexicon)
    if not cand:
        return 0.0
    src = extract_facts(source, lexicon)
    return count_contradictions(cand, src) / len(cand)
