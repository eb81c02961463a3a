"""Categorized EEG terminology lexicon: loading, validation, and longest-match tagging.

The lexicon is the single source of truth for term masking, slot tagging, and
hallucination metrics. Matching is greedy longest-match, left to right,
case-insensitive, and anchored at word boundaries; internal punctuation in
surfaces ("spike-and-wave") is matched literally.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from . import DataError
from .util import read_jsonl


class TermCategory(str, Enum):
    LATERALITY = "LATERALITY"
    LOCALIZATION = "LOCALIZATION"
    PATTERN = "PATTERN"
    FREQUENCY = "FREQUENCY"
    NEGATION_CUE = "NEGATION_CUE"
    GENERAL = "GENERAL"


# Categories that must be populated for the IE schema and negation handling.
CORE_CATEGORIES = (
    TermCategory.LATERALITY,
    TermCategory.LOCALIZATION,
    TermCategory.PATTERN,
    TermCategory.FREQUENCY,
    TermCategory.NEGATION_CUE,
)


@dataclass(frozen=True)
class TermEntry:
    canonical: str  # lowercase matching identity
    surfaces: tuple[str, ...]  # lowercase, unique, includes canonical
    category: TermCategory
    definition: str | None = None
    display: str = ""  # original casing for generated text; defaults to canonical

    def __post_init__(self):
        if not self.display:
            object.__setattr__(self, "display", self.canonical)


@dataclass(frozen=True)
class TermMatch:
    char_offset: int
    char_len: int
    entry: TermEntry
    matched_surface: str

    @property
    def end(self) -> int:
        return self.char_offset + self.char_len


@dataclass
class Lexicon:
    entries: list[TermEntry]
    _index: dict[str, list[tuple[str, TermEntry]]] = field(
        default_factory=dict, repr=False, compare=False
    )
    _surface_map: dict[str, TermEntry] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for entry in self.entries:
            for surface in entry.surfaces:
                first = _first_word(surface)
                self._index.setdefault(first, []).append((surface, entry))
                self._surface_map.setdefault(surface, entry)
        for candidates in self._index.values():
            candidates.sort(key=lambda item: (-len(item[0]), item[0]))

    def entry_for_surface(self, surface: str) -> TermEntry | None:
        return self._surface_map.get(surface.lower())

    def canonicalize(self, value: str) -> str:
        """Map a surface string to its canonical form; unknown values fold to lowercase."""
        entry = self._surface_map.get(value.strip().lower())
        return entry.canonical if entry else value.strip().lower()

    def by_category(self, category: TermCategory) -> list[TermEntry]:
        return [e for e in self.entries if e.category == category]


@dataclass
class LexiconReport:
    duplicate_surfaces: list[tuple[str, str, str]]  # (surface, canonical_a, canonical_b)
    empty_categories: list[TermCategory]
    missing_definitions: list[str]  # canonicals without a definition (skipped by QA)

    @property
    def findings(self) -> int:
        return (
            len(self.duplicate_surfaces)
            + len(self.empty_categories)
            + len(self.missing_definitions)
        )


_WORD_RE = re.compile(r"\w+")


def _first_word(surface: str) -> str:
    m = _WORD_RE.search(surface)
    return m.group(0) if m else surface


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def _parse_entry(obj: dict, origin: str) -> TermEntry:
    try:
        display = str(obj["canonical"]).strip()
        category = TermCategory(str(obj["category"]).strip().upper())
    except KeyError as exc:
        raise DataError(f"{origin}: missing field {exc}") from exc
    except ValueError:
        raise DataError(f"{origin}: unknown category {obj.get('category')!r}") from None
    canonical = display.lower()
    if not canonical:
        raise DataError(f"{origin}: empty canonical")
    surfaces = [str(s).strip().lower() for s in obj.get("surfaces", [])]
    if any(not s for s in surfaces):
        raise DataError(f"{origin}: entry {display!r} has an empty surface")
    if canonical not in surfaces:
        surfaces.insert(0, canonical)
    seen: set[str] = set()
    unique = [s for s in surfaces if not (s in seen or seen.add(s))]
    definition = obj.get("definition")
    return TermEntry(
        canonical=canonical,
        surfaces=tuple(unique),
        category=category,
        definition=str(definition) if definition else None,
        display=display,
    )


def load_lexicon(path: str | Path | None = None) -> Lexicon:
    """Load and validate a lexicon from JSONL or 4-column TSV.

    With no path, the bundled starter lexicon ships. Duplicate surfaces
    across entries and unknown categories are hard errors.
    """
    if path is None:
        with resources.files("eegtext.data").joinpath("lexicon.jsonl").open(
            "r", encoding="utf-8"
        ) as fh:
            entries = [
                _parse_entry(json.loads(line), f"starter lexicon:{i}")
                for i, line in enumerate(fh, start=1)
                if line.strip()
            ]
        return _build(entries, "starter lexicon")

    path = Path(path)
    entries = []
    if path.suffix == ".tsv":
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                cols = line.split("\t")
                if len(cols) < 3:
                    raise DataError(f"{path}:{lineno}: expected 4 tab-separated columns")
                obj = {
                    "canonical": cols[0],
                    "surfaces": [s.strip() for s in cols[1].split("|") if s.strip()],
                    "category": cols[2],
                    "definition": cols[3].strip() if len(cols) > 3 and cols[3].strip() else None,
                }
                entries.append(_parse_entry(obj, f"{path}:{lineno}"))
    else:
        for lineno, obj in read_jsonl(path):
            entries.append(_parse_entry(obj, f"{path}:{lineno}"))
    return _build(entries, str(path))


def _build(entries: list[TermEntry], origin: str) -> Lexicon:
    owners: dict[str, str] = {}
    for entry in entries:
        for surface in entry.surfaces:
            if surface in owners:
                raise DataError(
                    f"{origin}: surface {surface!r} appears in entries "
                    f"{owners[surface]!r} and {entry.canonical!r}"
                )
            owners[surface] = entry.canonical
    return Lexicon(entries=entries)


def validate_lexicon(lexicon: Lexicon) -> LexiconReport:
    """Reporting-only validation: duplicates, empty core categories, missing definitions."""
    owners: dict[str, str] = {}
    duplicates = []
    for entry in lexicon.entries:
        for surface in entry.surfaces:
            if surface in owners and owners[surface] != entry.canonical:
                duplicates.append((surface, owners[surface], entry.canonical))
            else:
                owners[surface] = entry.canonical
    populated = {e.category for e in lexicon.entries}
    empty = [c for c in CORE_CATEGORIES if c not in populated]
    missing = [e.canonical for e in lexicon.entries if not e.definition]
    return LexiconReport(
        duplicate_surfaces=duplicates, empty_categories=empty, missing_definitions=missing
    )


def find_terms(text: str, lexicon: Lexicon) -> list[TermMatch]:
    """Greedy longest-match dictionary tagging.

    Left-to-right scan over word starts; at each start the longest surface
    that matches case-insensitively and ends at a word boundary wins, and
    scanning resumes after it, so matches never overlap.
    """
    matches: list[TermMatch] = []
    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        if not _is_word_char(ch) or (i > 0 and _is_word_char(text[i - 1])):
            i += 1
            continue
        word_end = i
        while word_end < n and _is_word_char(text[word_end]):
            word_end += 1
        first = text[i:word_end].lower()
        hit = None
        for surface, entry in lexicon._index.get(first, ()):
            end = i + len(surface)
            if end > n:
                continue
            slice_ = text[i:end]
            if slice_.lower() != surface:
                continue
            if end < n and _is_word_char(surface[-1]) and _is_word_char(text[end]):
                continue
            hit = TermMatch(
                char_offset=i, char_len=len(surface), entry=entry, matched_surface=surface
            )
            break
        if hit:
            matches.append(hit)
            i = hit.end
        else:
            i = word_end
    return matches
