"""Negation-adversarial test set generation and scoring.

Three perturbation families: cue swaps (label preserved), scope shifts
realized as fronted-negation passivization (label preserved), and double
negation via cue wrapping (label flipped). Every emitted perturbation is
checked against the tagger before release: the tagger's negation output on
the perturbed sentence must equal the declared label transform applied to
its output on the original, and canonical pattern terms must be unchanged.
Sentences where no consistent rewrite exists are reported as inapplicable
rather than forced.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from . import DataError
from .corpus import normalize_text
from .ie import GoldLabel, SlotFrame, tag_sentence
from .lexicon import Lexicon, TermCategory, find_terms
from .util import stable_rng


class PerturbationKind(str, Enum):
    CUE_SWAP = "CUE_SWAP"
    SCOPE_SHIFT = "SCOPE_SHIFT"
    DOUBLE_NEG = "DOUBLE_NEG"


class LabelTransform(str, Enum):
    PRESERVE = "PRESERVE"
    FLIP = "FLIP"


LABEL_TRANSFORMS = {
    PerturbationKind.CUE_SWAP: LabelTransform.PRESERVE,
    PerturbationKind.SCOPE_SHIFT: LabelTransform.PRESERVE,
    PerturbationKind.DOUBLE_NEG: LabelTransform.FLIP,
}


@dataclass(frozen=True)
class SwapTable:
    swaps: tuple[tuple[str, str], ...]  # directed (from, to) pairs
    double_wraps: dict[str, str]


def load_swap_table(path: str | Path | None = None) -> SwapTable:
    if path is None:
        data = json.loads(
            resources.files("eegtext.data").joinpath("negation_swaps.json").read_text("utf-8")
        )
    else:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    directed: list[tuple[str, str]] = []
    for row in data.get("swaps", []):
        a, b = str(row["a"]).lower(), str(row["b"]).lower()
        directed.append((a, b))
        if row.get("bidirectional"):
            directed.append((b, a))
    wraps = {str(k).lower(): str(v).lower() for k, v in data.get("double_negation_wraps", {}).items()}
    if not directed:
        raise DataError("swap table has no swaps")
    return SwapTable(swaps=tuple(directed), double_wraps=wraps)


@dataclass
class Perturbation:
    kind: PerturbationKind
    original: str
    perturbed: str
    label_transform: LabelTransform
    applied_cue: str


def _match_case(replacement: str, original: str) -> str:
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def _pattern_canonicals(text: str, lexicon: Lexicon) -> set[str]:
    return {
        m.entry.canonical
        for m in find_terms(text, lexicon)
        if m.entry.category == TermCategory.PATTERN
    }


def _consistent(
    original: str, perturbed: str, kind: PerturbationKind, lexicon: Lexicon
) -> bool:
    """Gate before emission: tagger agreement with the label transform, term
    preservation, and normalization idempotence."""
    if perturbed == original:
        return False
    if normalize_text(perturbed) != perturbed:
        return False
    if _pattern_canonicals(perturbed, lexicon) != _pattern_canonicals(original, lexicon):
        return False
    before = tag_sentence(original, lexicon).negation
    after = tag_sentence(perturbed, lexicon).negation
    if LABEL_TRANSFORMS[kind] is LabelTransform.FLIP:
        return after == (not before)
    return after == before


_SCOPE_VERBS = ("there is ", "there are ", "shows ", "demonstrates ", "reveals ")
_SCOPE_TEMPLATES = ("seen", "noted", "identified", "appreciated")
_PREPOSITIONS = {"of", "at", "in", "on", "over", "during", "with", "within", "throughout"}
_CLAUSE_BOUNDARY = re.compile(r"[,;.]|\b(?:and|but|or)\b", re.IGNORECASE)


def _copula_for(segment_after_cue: str) -> str:
    """Number agreement from the head of the first preposition-free noun chunk."""
    head = ""
    for word in segment_after_cue.split():
        bare = word.strip(".,;:").lower()
        if bare in _PREPOSITIONS:
            break
        head = bare
    plural = head.endswith("s") and not head.endswith("ss")
    return "are" if plural else "is"


def _active_cues(sentence: str, lexicon: Lexicon):
    """Cue matches whose forward scope covers a pattern match (tagger's rule)."""
    matches = find_terms(sentence, lexicon)
    cues = [m for m in matches if m.entry.category == TermCategory.NEGATION_CUE]
    patterns = [m for m in matches if m.entry.category == TermCategory.PATTERN]
    active = []
    for cue in cues:
        boundary = _CLAUSE_BOUNDARY.search(sentence, cue.end)
        scope_end = boundary.start() if boundary else len(sentence)
        if any(cue.end <= p.char_offset < scope_end for p in patterns):
            active.append((cue, scope_end))
    return active


def perturb(
    sentence: str,
    gold: SlotFrame,
    kind: PerturbationKind,
    seed: int = 0,
    lexicon: Lexicon | None = None,
    swaps: SwapTable | None = None,
) -> tuple[Perturbation, SlotFrame] | None:
    """Produce one perturbation of the given kind, or None when inapplicable."""
    if lexicon is None:
        raise DataError("perturb requires a lexicon")
    table = swaps or load_swap_table()
    rng = stable_rng(seed, "perturb", kind.value, sentence)

    if kind is PerturbationKind.CUE_SWAP:
        candidates = []
        for cue, _ in _active_cues(sentence, lexicon):
            for src, dst in table.swaps:
                if cue.matched_surface == src:
                    candidates.append((cue, dst))
        rng.shuffle(candidates)
        for cue, dst in candidates:
            slice_ = sentence[cue.char_offset : cue.end]
            perturbed = (
                sentence[: cue.char_offset]
                + _match_case(dst, slice_)
                + sentence[cue.end :]
            )
            if _consistent(sentence, perturbed, kind, lexicon):
                return (
                    Perturbation(
                        kind=kind,
                        original=sentence,
                        perturbed=perturbed,
                        label_transform=LabelTransform.PRESERVE,
                        applied_cue=cue.matched_surface,
                    ),
                    replace(gold),
                )
        return None

    if kind is PerturbationKind.SCOPE_SHIFT:
        candidates = list(_active_cues(sentence, lexicon))
        rng.shuffle(candidates)
        verb_choices = list(_SCOPE_TEMPLATES)
        rng.shuffle(verb_choices)
        for cue, scope_end in candidates:
            pre = sentence[: cue.char_offset]
            # the negated clause is rewritten around its pattern term, so any
            # dropped lead-in must carry no slot-bearing terms of its own
            pre_lower = pre.lower()
            if pre.strip() and not pre_lower.endswith(_SCOPE_VERBS):
                continue
            if any(
                m.entry.category != TermCategory.GENERAL for m in find_terms(pre, lexicon)
            ):
                continue
            segment = sentence[cue.char_offset : scope_end].strip()
            tail = sentence[scope_end:]
            if not tail:
                tail = "."
            elif tail[0] not in ".,;":
                tail = " " + tail  # boundary was a conjunction word
            copula = _copula_for(segment[len(cue.matched_surface) :])
            for verb in verb_choices:
                fronted = segment[:1].upper() + segment[1:]
                perturbed = normalize_text(f"{fronted} {copula} {verb}{tail}")
                if _consistent(sentence, perturbed, kind, lexicon):
                    return (
                        Perturbation(
                            kind=kind,
                            original=sentence,
                            perturbed=perturbed,
                            label_transform=LabelTransform.PRESERVE,
                            applied_cue=cue.matched_surface,
                        ),
                        replace(gold),
                    )
        return None

    if kind is PerturbationKind.DOUBLE_NEG:
        candidates = []
        for cue, _ in _active_cues(sentence, lexicon):
            wrap = table.double_wraps.get(cue.matched_surface)
            if wrap:
                candidates.append((cue, wrap))
        rng.shuffle(candidates)
        for cue, wrap in candidates:
            slice_ = sentence[cue.char_offset : cue.end]
            perturbed = (
                sentence[: cue.char_offset]
                + _match_case(wrap, slice_)
                + sentence[cue.end :]
            )
            if _consistent(sentence, perturbed, kind, lexicon):
                flipped = replace(gold, negation=not gold.negation)
                return (
                    Perturbation(
                        kind=kind,
                        original=sentence,
                        perturbed=perturbed,
                        label_transform=LabelTransform.FLIP,
                        applied_cue=cue.matched_surface,
                    ),
                    flipped,
                )
        return None

    raise DataError(f"unknown perturbation kind {kind!r}")


@dataclass
class AdversarialItem:
    id: str
    kind: PerturbationKind
    original_id: str
    input: str
    gold_frame: SlotFrame
    label_transform: LabelTransform

    def to_record(self) -> dict:
        from .ie import frame_to_record

        frame = frame_to_record(self.id, self.gold_frame)
        frame.pop("id")
        frame.pop("flags", None)
        return {
            "id": self.id,
            "kind": self.kind.value,
            "original_id": self.original_id,
            "input": self.input,
            "gold_frame": frame,
            "label_transform": self.label_transform.value,
        }


def build_adversarial_set(
    items: list[tuple[str, str, SlotFrame]],
    kinds: list[PerturbationKind],
    seed: int = 0,
    lexicon: Lexicon | None = None,
    swaps: SwapTable | None = None,
) -> tuple[list[AdversarialItem], int]:
    """One perturbation per applicable (sentence, kind); returns
    (adversarial items, inapplicable count)."""
    out: list[AdversarialItem] = []
    skipped = 0
    for sid, sentence, gold in items:
        for kind in kinds:
            result = perturb(sentence, gold, kind, seed=seed, lexicon=lexicon, swaps=swaps)
            if result is None:
                skipped += 1
                continue
            perturbation, transformed = result
            out.append(
                AdversarialItem(
                    id=f"{sid}:{kind.value.lower()}",
                    kind=kind,
                    original_id=sid,
                    input=perturbation.perturbed,
                    gold_frame=transformed,
                    label_transform=perturbation.label_transform,
                )
            )
    return out, skipped


def eval_negadv(
    predictions: list[tuple[str, SlotFrame]], adversarial_gold: list[GoldLabel]
) -> float:
    """Binary F1 on the negation slot over the adversarial set (positive = negated)."""
    pred_map = dict(predictions)
    tp = fp = fn = 0
    for label in adversarial_gold:
        pred = pred_map.get(label.sentence_id)
        if pred is None:
            raise DataError(f"missing prediction for adversarial id {label.sentence_id!r}")
        if pred.negation and label.frame.negation:
            tp += 1
        elif pred.negation and not label.frame.negation:
            fp += 1
        elif label.frame.negation and not pred.negation:
            fn += 1
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0
