"""Experiment orchestration: corpus splitting, label subsampling, the mock
baseline model, and the evaluation suite runner."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from . import DataError
from .corpus import SectionKind
from .datagen import CorruptionExample, TASK_PREFIXES, TaskExample, TaskType, extractive_summary
from .ie import GoldLabel, GoldSource, SlotFrame, frame_from_record, frame_serialize, tag_sentence
from .lexicon import Lexicon, TermCategory, find_terms
from .metrics import (
    PredictionRecord,
    TokenNLL,
    calibration,
    calibration_points,
    fact_f1,
    perplexity,
    prediction_from_record,
    rouge_l,
    term_intro_rate,
    topk_accuracy,
)
from .report import (
    MetricReport,
    render_ie_table,
    render_intrinsic_table,
    render_robustness_table,
    render_summarization_table,
)
from .robustness import eval_negadv
from .tokenizer import SubwordVocab
from .util import keyed_hash, read_jsonl, write_jsonl


class Bucket(str, Enum):
    TRAIN = "TRAIN"
    VALID = "VALID"
    TEST = "TEST"


DEFAULT_RATIOS = (0.8, 0.1, 0.1)

# Label-ratio ladder used by the data-efficiency protocol.
SUBSAMPLE_RATIOS = (0.01, 0.05, 0.10, 0.25, 1.0)


@dataclass
class SplitAssignment:
    assignment: dict[str, Bucket]
    seed: int
    ratios: tuple[float, float, float]

    def bucket(self, report_id: str) -> Bucket:
        return self.assignment[report_id]

    def ids(self, bucket: Bucket) -> list[str]:
        return sorted(rid for rid, b in self.assignment.items() if b is bucket)


@dataclass(frozen=True)
class SubsampleSpec:
    ratio: float
    seed: int = 0


def split_corpus(
    report_ids: Iterable[str],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> SplitAssignment:
    """Assign report ids to train/valid/test buckets.

    Ids are ranked by a keyed hash of (seed, id) and bucket sizes follow the
    largest-remainder quota of the ratios, so small id sets split exactly and
    ranking (hence most assignments) is stable as the corpus grows. Splitting
    is report-level only; paragraphs inherit their report's bucket.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise DataError(f"need three non-negative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must sum to 1, got {sum(ratios)}")
    ids = list(report_ids)
    if len(set(ids)) != len(ids):
        raise DataError("duplicate report ids in split input")
    ranked = sorted(ids, key=lambda rid: (keyed_hash(seed, "split", rid), rid))

    n = len(ranked)
    exact = [r * n for r in ratios]
    counts = [math.floor(e) for e in exact]
    remainder = n - sum(counts)
    by_frac = sorted(range(3), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in range(remainder):
        counts[by_frac[i % 3]] += 1

    assignment: dict[str, Bucket] = {}
    cursor = 0
    for bucket, count in zip((Bucket.TRAIN, Bucket.VALID, Bucket.TEST), counts):
        for rid in ranked[cursor : cursor + count]:
            assignment[rid] = bucket
        cursor += count
    return SplitAssignment(assignment=assignment, seed=seed, ratios=ratios)


def subsample(train_ids: Iterable[str], spec: SubsampleSpec) -> set[str]:
    """Seeded priority prefix of size ceil(ratio * N); nested across ratios
    by construction (same priority order, longer prefix)."""
    if not (0.0 < spec.ratio <= 1.0):
        raise DataError(f"subsample ratio must be in (0, 1], got {spec.ratio}")
    ids = list(train_ids)
    if not ids:
        return set()
    ranked = sorted(ids, key=lambda rid: (keyed_hash(spec.seed, "subsample", rid), rid))
    take = math.ceil(spec.ratio * len(ranked))
    return set(ranked[:take])


class MockModel:
    """Deterministic baseline that exercises every prediction payload shape.

    Polish/QA echo their input sans prefix, summarize applies the extractive
    fallback, tagging runs the rule tagger, and corruption candidates are the
    k most frequent lexicon terms of the masked span's category (frequency
    measured over a supplied corpus, falling back to lexicon order).
    """

    def __init__(
        self,
        lexicon: Lexicon,
        vocab: SubwordVocab,
        corpus: Iterable[str] | None = None,
        top_k: int = 5,
        slot_confidence: float = 0.9,
    ):
        self.lexicon = lexicon
        self.vocab = vocab
        self.top_k = top_k
        self.slot_confidence = slot_confidence
        freq: Counter[str] = Counter()
        if corpus is not None:
            for text in corpus:
                for m in find_terms(text, lexicon):
                    freq[m.entry.canonical] += 1
        self._ranked: dict[TermCategory, list[str]] = {}
        for category in TermCategory:
            entries = [e.canonical for e in lexicon.by_category(category)]
            entries.sort(key=lambda c: (-freq.get(c, 0), c))
            self._ranked[category] = entries

    def predict_task(self, example: TaskExample) -> PredictionRecord:
        prefix = TASK_PREFIXES[example.task]
        body = example.input[len(prefix) :] if example.input.startswith(prefix) else example.input
        if example.task is TaskType.SUMMARIZE:
            output = extractive_summary(body, self.lexicon)
        else:
            output = body
        return PredictionRecord(id=example.id, output=output)

    def predict_frame(self, sentence_id: str, sentence: str) -> PredictionRecord:
        frame = tag_sentence(sentence, self.lexicon)
        return PredictionRecord(
            id=sentence_id,
            output=frame_serialize(frame),
            slot_confidences={slot: self.slot_confidence for slot in
                              ("laterality", "localization", "pattern", "frequency", "negation")},
        )

    def predict_spans(self, example: CorruptionExample) -> list[PredictionRecord]:
        """One record per masked sentinel, id "<example id>#<k>"."""
        out = []
        for span in example.spans:
            category = TermCategory.PATTERN
            matches = find_terms(span.text, self.lexicon)
            if matches:
                category = matches[0].entry.category
            ranked = self._ranked.get(category) or self._ranked[TermCategory.PATTERN]
            candidates = [
                (term, float(self.top_k - i)) for i, term in enumerate(ranked[: self.top_k])
            ]
            if not candidates:
                candidates = [("", 1.0)]
            out.append(
                PredictionRecord(id=f"{example.id}#{span.sentinel_index}", candidates=candidates)
            )
        return out

    def score_pieces(self, example_id: str, pieces: list[str]) -> PredictionRecord:
        nll = math.log(self.vocab.size)
        section = section_from_example_id(example_id)
        return PredictionRecord(
            id=example_id,
            token_nlls=[TokenNLL(piece=p, nll=nll, section=section) for p in pieces],
        )


def section_from_example_id(example_id: str) -> SectionKind:
    """Example ids follow "<report>:<SECTION>:<index>..."; unknown shapes map to OTHER."""
    parts = example_id.split(":")
    if len(parts) >= 2:
        try:
            return SectionKind(parts[1])
        except ValueError:
            pass
    return SectionKind.OTHER


@dataclass
class SuiteConfig:
    out_dir: Path
    lexicon_path: Path | None = None
    predictions: dict[str, Path] = field(default_factory=dict)  # evaluation -> file
    gold: dict[str, Path] = field(default_factory=dict)
    enabled: list[str] = field(default_factory=list)
    seed: int = 0
    calibration_bins: int = 10
    top_k: tuple[int, ...] = (1, 5)
    external_metrics: dict[str, float] = field(default_factory=dict)  # e.g. bertscore
    ratio_predictions: dict[float, Path] = field(default_factory=dict)  # label ratio -> ie preds

    def validate(self) -> None:
        paths = list(self.predictions.items()) + list(self.gold.items())
        paths += [(f"ratio {r:g}", p) for r, p in self.ratio_predictions.items()]
        for name, path in paths:
            if not Path(path).exists():
                raise DataError(f"{name}: no such file {path}")
        if self.ratio_predictions and "ie" not in self.gold:
            raise DataError("ratio predictions need ie gold frames")


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    seen = set()
    for lineno, obj in read_jsonl(path):
        record = prediction_from_record(obj, origin=f"{path}:{lineno}")
        if record.id in seen:
            raise DataError(f"{path}:{lineno}: duplicate prediction id {record.id!r}")
        seen.add(record.id)
        records.append(record)
    return records


def load_gold_frames(path: str | Path) -> list[GoldLabel]:
    """Gold frames from flat frame records or adversarial records (which nest
    the frame under "gold_frame")."""
    labels = []
    for lineno, obj in read_jsonl(path):
        payload = obj.get("gold_frame", obj)
        frame = frame_from_record(payload, origin=f"{path}:{lineno}")
        source = GoldSource(obj.get("source", "WEAK"))
        labels.append(GoldLabel(sentence_id=str(obj["id"]), frame=frame, source=source))
    return labels


_PREDICTION_KEYS = ("output", "candidates", "token_nlls", "slot_confidences")


def load_frame_predictions(path: str | Path, lexicon: Lexicon) -> list[tuple[str, SlotFrame]]:
    """Predicted frames from either prediction records (frame text in
    "output") or plain frame records as the tagger writes them."""
    from .ie import frame_parse

    out: list[tuple[str, SlotFrame]] = []
    seen: set[str] = set()
    for lineno, obj in read_jsonl(path):
        origin = f"{path}:{lineno}"
        if any(key in obj for key in _PREDICTION_KEYS):
            record = prediction_from_record(obj, origin=origin)
            rid, frame = record.id, frame_parse(record.output or "", lexicon)
        else:
            rid, frame = str(obj.get("id")), frame_from_record(obj, origin=origin)
        if rid in seen:
            raise DataError(f"{origin}: duplicate prediction id {rid!r}")
        seen.add(rid)
        out.append((rid, frame))
    return out


def run_suite(config: SuiteConfig, lexicon: Lexicon) -> MetricReport:
    """Execute the enabled evaluations against prediction/gold files and write
    metrics.json, rendered tables, and a manifest of input hashes."""
    from .ie import eval_slots  # local import to keep module load light

    config.validate()
    report = MetricReport(config={"seed": config.seed, "enabled": list(config.enabled)})
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables: dict[str, str] = {}

    for paths in (config.predictions, config.gold):
        for path in paths.values():
            report.fingerprint_file(path)

    enabled = config.enabled or sorted(set(config.predictions))

    if "ppl" in enabled:
        records = load_predictions(config.predictions["ppl"])
        ppl_all = perplexity(records)
        report.add("ppl_all", ppl_all, len(records), "exp(sum nll / piece count), natural log")
        try:
            ppl_imp = perplexity(records, SectionKind.IMPRESSION)
        except DataError:
            ppl_imp = float("nan")
        report.add(
            "ppl_impression",
            ppl_imp,
            len(records),
            "perplexity restricted to IMPRESSION-section pieces",
        )
        local = [("local run", ppl_all, ppl_imp, float("nan"), float("nan"))]
        if "topk" in enabled:
            local = []
        tables["lm_intrinsic"] = render_intrinsic_table(local)

    if "topk" in enabled:
        records = load_predictions(config.predictions["topk"])
        gold_spans = _load_gold_spans(config.gold["topk"])
        row = ["local run"]
        ppl_entry = report.metrics.get("ppl_all")
        imp_entry = report.metrics.get("ppl_impression")
        row.extend(
            [
                ppl_entry.value if ppl_entry else float("nan"),
                imp_entry.value if imp_entry else float("nan"),
            ]
        )
        for k in config.top_k:
            acc = topk_accuracy(records, gold_spans, k)
            report.add(
                f"top{k}_accuracy",
                acc,
                len(gold_spans),
                f"% of masked spans whose gold text is among the top-{k} candidates",
            )
            row.append(acc)
        tables["lm_intrinsic"] = render_intrinsic_table([tuple(row)])

    if "ie" in enabled:
        preds = load_frame_predictions(config.predictions["ie"], lexicon)
        gold = load_gold_frames(config.gold["ie"])
        scores = eval_slots(preds, gold, lexicon)
        for slot, s in scores.per_slot.items():
            report.add(f"ie_{slot}_f1", s.f1, scores.n_sentences, f"micro F1 for slot {slot}")
        report.add("ie_macro_f1", scores.macro_f1, scores.n_sentences, "mean of the five slot F1s")
        tables["ie_slots"] = render_ie_table(
            [
                (
                    "local run",
                    scores.per_slot["laterality"].f1,
                    scores.per_slot["localization"].f1,
                    scores.per_slot["pattern"].f1,
                    scores.per_slot["frequency"].f1,
                    scores.per_slot["negation"].f1,
                    scores.macro_f1,
                )
            ]
        )

    if "summarization" in enabled:
        records = load_predictions(config.predictions["summarization"])
        references = _load_reference_texts(config.gold["summarization"])
        rouge_sum = 0.0
        fact_sum = 0.0
        n = 0
        for record in records:
            ref = references.get(record.id)
            if ref is None:
                raise DataError(f"summarization: no reference for id {record.id!r}")
            _, _, f1 = rouge_l(record.output or "", ref)
            rouge_sum += f1
            fact_sum += fact_f1(record.output or "", ref, lexicon).f1
            n += 1
        if n == 0:
            raise DataError("summarization: no records")
        rouge_mean = rouge_sum / n
        fact_mean = fact_sum / n
        report.add("rouge_l_f1", rouge_mean, n, "mean LCS-based F1 of candidate vs reference")
        report.add("fact_f1", fact_mean, n, "mean rule-based fact F1 with contradiction penalty")
        bert = config.external_metrics.get("bertscore", float("nan"))
        if "bertscore" in config.external_metrics:
            report.add(
                "bertscore", bert, n, "externally computed semantic similarity (adapter value)"
            )
        tables["summarization"] = render_summarization_table(
            [("local run", rouge_mean, bert, fact_mean)]
        )

    negadv = ece_val = mce_val = term_rate = contr_rate = float("nan")
    robustness_ran = False

    if "robustness" in enabled and "robustness" in config.predictions:
        preds = load_frame_predictions(config.predictions["robustness"], lexicon)
        gold = load_gold_frames(config.gold["robustness"])
        negadv = eval_negadv(preds, gold)
        report.add(
            "negadv_f1", negadv, len(gold), "binary F1 on negation over the adversarial set"
        )
        robustness_ran = True

    if "calibration" in config.predictions:
        records = load_predictions(config.predictions["calibration"])
        gold_frames = {
            g.sentence_id: g.frame for g in load_gold_frames(config.gold["calibration"])
        }
        points = calibration_points(records, gold_frames)
        result = calibration(points, bins=config.calibration_bins)
        ece_val, mce_val = result.ece, result.mce
        report.add(
            "ece", result.ece, result.n_points,
            f"expected calibration error, {config.calibration_bins} equal-width bins",
        )
        report.add(
            "mce", result.mce, result.n_points,
            f"maximum calibration error, {config.calibration_bins} equal-width bins",
        )
        robustness_ran = True

    if "hallucination" in config.predictions:
        from .metrics import contradiction_rate

        records = load_predictions(config.predictions["hallucination"])
        sources = _load_reference_texts(config.gold["hallucination"])
        t_sum = c_sum = 0.0
        n = 0
        for record in records:
            src = sources.get(record.id)
            if src is None:
                raise DataError(f"hallucination: no source for id {record.id!r}")
            t_sum += term_intro_rate(record.output or "", src, lexicon)
            c_sum += contradiction_rate(record.output or "", src, lexicon)
            n += 1
        if n:
            term_rate, contr_rate = t_sum / n, c_sum / n
            report.add(
                "term_intro_rate", term_rate, n,
                "newly introduced terms over candidate terms (published name: Term-Prec)",
            )
            report.add("contradiction_rate", contr_rate, n, "fact conflicts per candidate fact")
            robustness_ran = True

    if robustness_ran:
        tables["robustness"] = render_robustness_table(
            [("local run", negadv, ece_val, mce_val, term_rate, contr_rate)]
        )

    if config.ratio_predictions:
        from .report import render_data_efficiency_table

        gold = load_gold_frames(config.gold["ie"])
        row: list = ["local run"]
        for ratio in SUBSAMPLE_RATIOS:
            path = config.ratio_predictions.get(ratio)
            if path is None:
                row.append(float("nan"))
                continue
            report.fingerprint_file(path)
            preds = load_frame_predictions(path, lexicon)
            scores = eval_slots(preds, gold, lexicon)
            report.add(
                f"ie_macro_f1_at_{ratio:g}",
                scores.macro_f1,
                scores.n_sentences,
                f"macro slot F1 for the model trained on a {ratio:g} label ratio",
            )
            row.append(scores.macro_f1)
        tables["data_efficiency"] = render_data_efficiency_table([tuple(row)])

    report.save(out_dir / "metrics.json")
    for name, text in tables.items():
        path = out_dir / f"table_{name}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    _write_manifest(report, out_dir)
    return report


def _write_manifest(report: MetricReport, out_dir: Path) -> None:
    manifest = {
        "inputs": report.fingerprints,
        "config": report.config,
        "metrics_file": "metrics.json",
    }
    write_jsonl(out_dir / "manifest.jsonl", [manifest])


def _load_gold_spans(path: str | Path) -> dict[str, str]:
    """Gold spans for top-k scoring from a corruption dataset: one entry per
    sentinel, keyed "<example id>#<k>"."""
    spans: dict[str, str] = {}
    for lineno, obj in read_jsonl(path):
        for span in obj.get("spans", []):
            spans[f"{obj['id']}#{span['k']}"] = span["text"]
    if not spans:
        raise DataError(f"{path}: no gold spans found")
    return spans


def _load_reference_texts(path: str | Path) -> dict[str, str]:
    refs: dict[str, str] = {}
    for lineno, obj in read_jsonl(path):
        if "id" not in obj:
            raise DataError(f"{path}:{lineno}: reference record needs an id")
        refs[str(obj["id"])] = str(obj.get("target", obj.get("text", "")))
    return refs
