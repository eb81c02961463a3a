"""Five-slot information extraction: rule-dictionary tagging, frame text I/O,
and slot-level scoring.

The tagger is deliberately simple and written down: dictionary matches fill
laterality/localization/pattern; a numeric-Hz rule and the frequency band
entries fill frequency; negation is set when a cue's forward scope (cue to
the next comma, semicolon, coordinating conjunction, or period) covers a
pattern match, with two cues in one scope cancelling each other. The bundled
micro-suite gold frames were hand-annotated against this same guideline; like
any weak-label setup, agreement between the two is partly by construction.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum

from . import DataError
from .lexicon import Lexicon, TermCategory, find_terms

BANDS = ("delta", "theta", "alpha", "beta", "gamma")

MAX_HZ = 200.0

SLOTS = ("laterality", "localization", "pattern", "frequency", "negation")


class GoldSource(str, Enum):
    WEAK = "WEAK"
    HUMAN = "HUMAN"


@dataclass(frozen=True)
class Frequency:
    hz: float | None = None
    band: str | None = None

    def __post_init__(self):
        if (self.hz is None) == (self.band is None):
            raise DataError("frequency needs exactly one of hz or band")
        if self.hz is not None and not (0.0 < self.hz <= MAX_HZ):
            raise DataError(f"frequency {self.hz} Hz outside (0, {MAX_HZ}]")
        if self.band is not None and self.band not in BANDS:
            raise DataError(f"unknown frequency band {self.band!r}")

    def to_value(self) -> dict:
        return {"hz": self.hz} if self.hz is not None else {"band": self.band}


@dataclass
class SlotFrame:
    laterality: str | None = None
    localization: list[str] = field(default_factory=list)
    pattern: list[str] = field(default_factory=list)
    frequency: Frequency | None = None
    negation: bool = False
    flags: list[str] = field(default_factory=list)

    def is_empty(self) -> bool:
        return (
            self.laterality is None
            and not self.localization
            and not self.pattern
            and self.frequency is None
            and not self.negation
        )

    def core_equal(self, other: "SlotFrame") -> bool:
        """Equality over the five slots, ignoring bookkeeping flags."""
        return (
            self.laterality == other.laterality
            and self.localization == other.localization
            and self.pattern == other.pattern
            and self.frequency == other.frequency
            and self.negation == other.negation
        )


@dataclass(frozen=True)
class GoldLabel:
    sentence_id: str
    frame: SlotFrame
    source: GoldSource = GoldSource.WEAK


_HZ_RE = re.compile(
    r"\b(\d+(?:\.\d+)?)(?:\s*(?:-|to)\s*\d+(?:\.\d+)?)?\s*(?:hz|hertz)\b", re.IGNORECASE
)
_CLAUSE_BOUNDARY = re.compile(r"[,;.]|\b(?:and|but|or)\b", re.IGNORECASE)


def _scope_end(sentence: str, start: int) -> int:
    m = _CLAUSE_BOUNDARY.search(sentence, start)
    return m.start() if m else len(sentence)


def tag_sentence(sentence: str, lexicon: Lexicon) -> SlotFrame:
    """Hybrid rule-dictionary tagging of one normalized sentence.

    An empty frame is a valid output; nothing here raises on clinical text.
    """
    matches = find_terms(sentence, lexicon)
    laterality = None
    localization: list[str] = []
    pattern: list[str] = []
    band = None
    pattern_starts: list[int] = []
    cues = []
    for m in matches:
        cat = m.entry.category
        if cat == TermCategory.LATERALITY and laterality is None:
            laterality = m.entry.canonical
        elif cat == TermCategory.LOCALIZATION and m.entry.canonical not in localization:
            localization.append(m.entry.canonical)
        elif cat == TermCategory.PATTERN:
            if m.entry.canonical not in pattern:
                pattern.append(m.entry.canonical)
            pattern_starts.append(m.char_offset)
        elif cat == TermCategory.FREQUENCY and band is None:
            band = m.entry.canonical
        elif cat == TermCategory.NEGATION_CUE:
            cues.append(m)

    frequency = None
    hz_match = _HZ_RE.search(sentence)
    if hz_match:
        value = float(hz_match.group(1))
        if 0.0 < value <= MAX_HZ:
            frequency = Frequency(hz=value)
    if frequency is None and band is not None:
        frequency = Frequency(band=band)

    # forward-only cue scopes; a second cue inside a scope cancels both
    negation = False
    i = 0
    while i < len(cues):
        cue = cues[i]
        scope = (cue.end, _scope_end(sentence, cue.end))
        if i + 1 < len(cues) and scope[0] <= cues[i + 1].char_offset < scope[1]:
            i += 2
            continue
        if any(scope[0] <= p < scope[1] for p in pattern_starts):
            negation = True
        i += 1

    return SlotFrame(
        laterality=laterality,
        localization=localization,
        pattern=pattern,
        frequency=frequency,
        negation=negation,
    )


def frame_serialize(frame: SlotFrame) -> str:
    """Single-line, key-ordered JSON rendering of the five slots; byte-stable."""
    payload = {
        "laterality": frame.laterality,
        "localization": list(frame.localization),
        "pattern": list(frame.pattern),
        "frequency": frame.frequency.to_value() if frame.frequency else None,
        "negation": frame.negation,
    }
    return json.dumps(payload, ensure_ascii=False, separators=(", ", ": "))


_TRUEISH = {"true", "yes", "1", "present"}
_FALSEISH = {"false", "no", "0", "absent"}


def _coerce_string_list(value, flags: list[str]) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list):
        flags.append("NONCANONICAL")
        return []
    out = []
    for item in value:
        item = str(item).strip().lower()
        if item and item not in out:
            out.append(item)
    return out


def _coerce_frequency(value, flags: list[str]) -> Frequency | None:
    if value is None:
        return None
    try:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return Frequency(hz=float(value))
        if isinstance(value, str):
            m = _HZ_RE.search(value) or re.match(r"^\s*(\d+(?:\.\d+)?)\s*$", value)
            if m:
                return Frequency(hz=float(m.group(1)))
            if value.strip().lower() in BANDS:
                return Frequency(band=value.strip().lower())
        if isinstance(value, dict):
            if value.get("hz") is not None:
                return Frequency(hz=float(value["hz"]))
            if value.get("band") is not None:
                return Frequency(band=str(value["band"]).strip().lower())
    except (DataError, ValueError, TypeError):
        pass
    flags.append("NONCANONICAL")
    return None


_JSON_OBJECT_RE = re.compile(r"\{.*\}", re.DOTALL)


def frame_parse(text: str, lexicon: Lexicon | None = None) -> SlotFrame:
    """Tolerant parse of model output into a SlotFrame.

    Accepts key reordering and missing keys; unknown slot values are kept and
    flagged NONCANONICAL (when a lexicon is supplied to check against).
    Unparseable text yields an empty frame flagged MALFORMED, never a crash.
    """
    flags: list[str] = []
    obj = None
    candidate = text.strip()
    m = _JSON_OBJECT_RE.search(candidate)
    if m:
        candidate = m.group(0)
    for attempt in (candidate, _repair_json(candidate)):
        if not attempt:
            continue
        try:
            obj = json.loads(attempt)
            break
        except json.JSONDecodeError:
            continue
    if not isinstance(obj, dict):
        return SlotFrame(flags=["MALFORMED"])

    laterality = obj.get("laterality")
    if laterality is not None:
        laterality = str(laterality).strip().lower() or None
    localization = _coerce_string_list(obj.get("localization"), flags)
    pattern = _coerce_string_list(obj.get("pattern"), flags)
    frequency = _coerce_frequency(obj.get("frequency"), flags)
    negation = obj.get("negation", False)
    if isinstance(negation, str):
        negation = negation.strip().lower() in _TRUEISH
    negation = bool(negation)

    if lexicon is not None:
        known = {e.canonical for e in lexicon.entries}
        values = ([laterality] if laterality else []) + localization + pattern
        if any(lexicon.canonicalize(v) not in known for v in values):
            flags.append("NONCANONICAL")

    deduped = []
    for flag in flags:
        if flag not in deduped:
            deduped.append(flag)
    return SlotFrame(
        laterality=laterality,
        localization=localization,
        pattern=pattern,
        frequency=frequency,
        negation=negation,
        flags=deduped,
    )


def _repair_json(text: str) -> str:
    """Best-effort cleanup of near-JSON model output."""
    repaired = text.replace("'", '"')
    repaired = re.sub(r"\bTrue\b", "true", repaired)
    repaired = re.sub(r"\bFalse\b", "false", repaired)
    repaired = re.sub(r"\bNone\b", "null", repaired)
    repaired = re.sub(r",\s*([}\]])", r"\1", repaired)
    return repaired


@dataclass
class SlotScore:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass
class SlotScores:
    per_slot: dict[str, SlotScore]
    macro_f1: float
    n_sentences: int


def _prf(tp: int, fp: int, fn: int) -> SlotScore:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return SlotScore(precision=p, recall=r, f1=f1, tp=tp, fp=fp, fn=fn)


def _canon_set(values: list[str], lexicon: Lexicon | None) -> set[str]:
    if lexicon is None:
        return {v.strip().lower() for v in values}
    return {lexicon.canonicalize(v) for v in values}


def _freq_key(freq: Frequency | None) -> str | None:
    if freq is None:
        return None
    return f"{freq.hz:g}hz" if freq.hz is not None else freq.band


def eval_slots(
    predictions: list[tuple[str, SlotFrame]],
    gold: list[GoldLabel],
    lexicon: Lexicon | None = None,
) -> SlotScores:
    """Micro P/R/F1 per slot over value instances; negation as binary F1 on
    the positive class; macro = mean of the five slot F1s."""
    pred_map: dict[str, SlotFrame] = {}
    for pid, frame in predictions:
        if pid in pred_map:
            raise DataError(f"duplicate prediction id {pid!r}")
        pred_map[pid] = frame
    gold_map: dict[str, GoldLabel] = {}
    for label in gold:
        if label.sentence_id in gold_map:
            raise DataError(f"duplicate gold id {label.sentence_id!r}")
        gold_map[label.sentence_id] = label
    missing = sorted(set(gold_map) - set(pred_map))
    if missing:
        raise DataError(f"predictions missing for gold ids: {', '.join(missing[:5])}")

    tallies = {slot: [0, 0, 0] for slot in SLOTS}  # tp, fp, fn
    for sid, label in gold_map.items():
        pred = pred_map[sid]
        g = label.frame

        def add_set(slot: str, pred_vals: set, gold_vals: set) -> None:
            t = tallies[slot]
            t[0] += len(pred_vals & gold_vals)
            t[1] += len(pred_vals - gold_vals)
            t[2] += len(gold_vals - pred_vals)

        p_lat = {lexicon.canonicalize(pred.laterality)} if lexicon and pred.laterality else (
            {pred.laterality} if pred.laterality else set()
        )
        g_lat = {lexicon.canonicalize(g.laterality)} if lexicon and g.laterality else (
            {g.laterality} if g.laterality else set()
        )
        add_set("laterality", p_lat, g_lat)
        add_set("localization", _canon_set(pred.localization, lexicon), _canon_set(g.localization, lexicon))
        add_set("pattern", _canon_set(pred.pattern, lexicon), _canon_set(g.pattern, lexicon))
        p_freq = _freq_key(pred.frequency)
        g_freq = _freq_key(g.frequency)
        add_set("frequency", {p_freq} if p_freq else set(), {g_freq} if g_freq else set())
        t = tallies["negation"]
        if pred.negation and g.negation:
            t[0] += 1
        elif pred.negation and not g.negation:
            t[1] += 1
        elif g.negation and not pred.negation:
            t[2] += 1

    per_slot = {slot: _prf(*tallies[slot]) for slot in SLOTS}
    macro = sum(s.f1 for s in per_slot.values()) / len(SLOTS)
    return SlotScores(per_slot=per_slot, macro_f1=macro, n_sentences=len(gold_map))


def frame_to_record(sentence_id: str, frame: SlotFrame, source: GoldSource | None = None) -> dict:
    record = {
        "id": sentence_id,
        "laterality": frame.laterality,
        "localization": list(frame.localization),
        "pattern": list(frame.pattern),
        "frequency": frame.frequency.to_value() if frame.frequency else None,
        "negation": frame.negation,
        "flags": list(frame.flags),
    }
    if source is not None:
        record["source"] = source.value
    return record


def frame_from_record(obj: dict, origin: str = "frame record") -> SlotFrame:
    try:
        freq = obj.get("frequency")
        frequency = None
        if freq is not None:
            frequency = Frequency(
                hz=float(freq["hz"]) if freq.get("hz") is not None else None,
                band=freq.get("band"),
            )
        return SlotFrame(
            laterality=obj.get("laterality"),
            localization=[str(v) for v in obj.get("localization", [])],
            pattern=[str(v) for v in obj.get("pattern", [])],
            frequency=frequency,
            negation=bool(obj.get("negation", False)),
            flags=[str(v) for v in obj.get("flags", [])],
        )
    except (KeyError, TypeError, ValueError, DataError) as exc:
        raise DataError(f"{origin}: bad frame ({exc})") from exc
