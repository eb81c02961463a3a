"""Command-line interface.

Subcommands: normalize, lexicon validate, tokenizer train|eval, corrupt,
taskgen, tag, perturb, split, subsample, mock, eval. Global flags --seed,
--config, --out, --quiet work on every subcommand; a config file is flat
``key = value`` lines mirroring the flag names, with CLI values taking
precedence. Exit codes: 0 success, 2 usage, 3 data/schema error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import DataError, __version__
from .corpus import (
    SectionKind,
    paragraph_to_record,
    read_paragraphs,
    read_raw_reports,
    report_to_record,
    segment_report,
    split_paragraphs,
)
from .datagen import (
    DEFAULT_MASK_BUDGET,
    TaskType,
    build_polish_pairs,
    build_qa_pairs,
    build_sum_pairs,
    corrupt_spans,
    truncate_example,
)
from .harness import (
    Bucket,
    MockModel,
    SubsampleSpec,
    SuiteConfig,
    run_suite,
    split_corpus,
    subsample,
)
from .ie import frame_from_record, frame_to_record, tag_sentence
from .lexicon import load_lexicon, validate_lexicon
from .report import MetricReport, render_tokenizer_table
from .robustness import PerturbationKind, build_adversarial_set, load_swap_table
from .tokenizer import SubwordVocab, encode, eval_tokenizer, train_subword
from .util import read_jsonl, split_sentences, write_jsonl

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _parse_config_file(path: str) -> dict[str, str]:
    """Flat key-value config: one `key = value` per line, # comments."""
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    return values


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


class Settings:
    """Resolution chain for option values: CLI flag, then config file, then default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _parse_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, default=None, cast=None):
        value = getattr(self.args, name, None)
        if value is None:
            value = self.config.get(name)
        if value is None:
            return default
        if cast is None and isinstance(default, bool):
            cast = _parse_bool
        if cast is not None and isinstance(value, str):
            try:
                return cast(value)
            except ValueError as exc:
                raise DataError(f"bad value for {name}: {value!r}") from exc
        return value

    def require(self, name: str, cast=None):
        value = self.get(name, cast=cast)
        if value is None:
            raise DataError(f"missing required option --{name.replace('_', '-')}")
        return value

    @property
    def out_dir(self) -> Path:
        out = self.get("out", default="out")
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def seed(self) -> int:
        return self.get("seed", default=0, cast=int)

    @property
    def quiet(self) -> bool:
        return bool(getattr(self.args, "quiet", False))

    def say(self, message: str) -> None:
        if not self.quiet:
            print(message)


def _load_corpus_texts(path: str) -> list[tuple[str, str]]:
    """(example_id, text) pairs from paragraphs.jsonl or a plain text file
    (one paragraph per line)."""
    p = Path(path)
    if p.suffix == ".jsonl":
        paragraphs = read_paragraphs(p)
        return [(para.key, para.text) for para in paragraphs]
    items = []
    with open(p, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if line:
                items.append((f"l{i}:OTHER:0", line))
    return items


def cmd_normalize(settings: Settings) -> int:
    input_path = settings.require("input")
    drop = settings.get("drop")
    drop_kinds = (
        frozenset(SectionKind(k.strip().upper()) for k in drop.split(",") if k.strip())
        if drop is not None
        else None
    )
    out = settings.out_dir
    reports = []
    paragraphs = []
    for raw in read_raw_reports(input_path):
        report = segment_report(raw, drop_kinds=drop_kinds)
        reports.append(report)
        paragraphs.extend(split_paragraphs(report))
    write_jsonl(out / "reports.jsonl", (report_to_record(r) for r in reports))
    write_jsonl(out / "paragraphs.jsonl", (paragraph_to_record(p) for p in paragraphs))
    redactions = sum(r.redaction_count for r in reports)
    settings.say(
        f"normalized {len(reports)} reports -> {len(paragraphs)} paragraphs "
        f"({redactions} redactions) in {out}"
    )
    return EXIT_OK


def cmd_lexicon_validate(settings: Settings) -> int:
    path = settings.get("path")
    lexicon = load_lexicon(path)
    report = validate_lexicon(lexicon)
    settings.say(f"entries: {len(lexicon.entries)}")
    settings.say(f"duplicate surfaces: {len(report.duplicate_surfaces)}")
    for surface, a, b in report.duplicate_surfaces:
        settings.say(f"  {surface!r} in {a!r} and {b!r}")
    settings.say(f"empty core categories: {[c.value for c in report.empty_categories]}")
    settings.say(f"entries without definitions (skipped by QA): {len(report.missing_definitions)}")
    return EXIT_OK


def cmd_tokenizer_train(settings: Settings) -> int:
    corpus = _load_corpus_texts(settings.require("corpus"))
    vocab_size = settings.require("vocab_size", cast=int)
    protect = settings.get("protect_terms", default=False)
    lexicon = load_lexicon(settings.get("lexicon")) if protect else None
    vocab = train_subword(
        (text for _, text in corpus),
        vocab_size=vocab_size,
        lexicon=lexicon,
        protect_terms=protect,
        seed=settings.seed,
    )
    out_file = settings.out_dir / "vocab.json"
    vocab.save(out_file)
    settings.say(f"trained vocab: {vocab.size} pieces, {len(vocab.merges)} merges -> {out_file}")
    return EXIT_OK


def cmd_tokenizer_eval(settings: Settings) -> int:
    vocab = SubwordVocab.load(settings.require("vocab"))
    corpus = _load_corpus_texts(settings.require("corpus"))
    lexicon = load_lexicon(settings.get("lexicon"))
    metrics = eval_tokenizer(vocab, (text for _, text in corpus), lexicon)
    out = settings.out_dir
    report = MetricReport(config={"vocab": str(settings.require("vocab"))})
    from .tokenizer import METRIC_DEFINITIONS

    counts = metrics.counts
    report.add("oov_rate", metrics.oov_rate, counts["word_types"], METRIC_DEFINITIONS["oov_rate"])
    report.add(
        "avg_subwords", metrics.avg_subwords, counts["word_tokens"], METRIC_DEFINITIONS["avg_subwords"]
    )
    report.add(
        "split_ratio", metrics.split_ratio, counts["word_tokens"], METRIC_DEFINITIONS["split_ratio"]
    )
    report.add(
        "multiword_ratio",
        metrics.multiword_ratio,
        counts["multiword_term_occurrences"],
        METRIC_DEFINITIONS["multiword_ratio"],
    )
    report.add(
        "multiword_ratio_per_term",
        metrics.multiword_ratio_per_term,
        counts["multiword_term_occurrences"],
        METRIC_DEFINITIONS["multiword_ratio_per_term"],
    )
    report.save(out / "tokenizer_metrics.json")
    table = render_tokenizer_table(
        [
            (
                "local run",
                metrics.oov_rate,
                metrics.avg_subwords,
                metrics.split_ratio,
                metrics.multiword_ratio,
            )
        ]
    )
    with open(out / "table_tokenizer.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    settings.say(table)
    return EXIT_OK


def cmd_corrupt(settings: Settings) -> int:
    corpus = _load_corpus_texts(settings.require("corpus"))
    lexicon = load_lexicon(settings.get("lexicon"))
    vocab = SubwordVocab.load(settings.require("vocab"))
    budget = settings.get("budget", default=DEFAULT_MASK_BUDGET, cast=float)
    topoff = settings.get("topoff_random", default=False)
    records = []
    skipped = []
    for pid, text in corpus:
        example = corrupt_spans(
            text, lexicon, vocab, mask_budget=budget, seed=settings.seed,
            example_id=pid, topoff_random=topoff,
        )
        if example is None:
            skipped.append(pid)
            continue
        records.append(example.to_record())
    out = settings.out_dir
    write_jsonl(out / "corruption.jsonl", records)
    write_jsonl(
        out / "corruption_manifest.jsonl",
        [{"examples": len(records), "skipped_no_terms": len(skipped), "skipped_ids": skipped}],
    )
    settings.say(f"corrupted {len(records)} paragraphs ({len(skipped)} skipped) -> {out}")
    return EXIT_OK


def cmd_taskgen(settings: Settings) -> int:
    corpus = _load_corpus_texts(settings.require("corpus"))
    lexicon = load_lexicon(settings.get("lexicon"))
    vocab_path = settings.get("vocab")
    vocab = SubwordVocab.load(vocab_path) if vocab_path else None
    wanted = {
        t.strip().upper()
        for t in settings.get("tasks", default="polish,qa,summarize").split(",")
        if t.strip()
    }
    unknown = wanted - {t.value for t in TaskType}
    if unknown:
        raise DataError(f"unknown tasks: {', '.join(sorted(unknown))}")

    examples = []
    stats: dict[str, int] = {}
    if TaskType.POLISH.value in wanted:
        sentences = [
            (f"{pid}:s{j}", sent)
            for pid, text in corpus
            for j, sent in enumerate(split_sentences(text))
        ]
        pseudo = _read_reference_file(settings.get("polish_references"))
        pairs = build_polish_pairs(sentences, lexicon, seed=settings.seed, pseudo_labels=pseudo)
        examples.extend(pairs)
        stats["polish"] = len(pairs)
    if TaskType.QA.value in wanted:
        pairs, skipped = build_qa_pairs(lexicon)
        examples.extend(pairs)
        stats["qa"] = len(pairs)
        stats["qa_skipped_no_definition"] = skipped
    if TaskType.SUMMARIZE.value in wanted:
        refs = _read_reference_file(settings.get("sum_references"))
        pairs = build_sum_pairs(corpus, lexicon, references=refs, seed=settings.seed)
        examples.extend(pairs)
        stats["summarize"] = len(pairs)

    truncated_ids = []
    if vocab is not None:
        examples = [truncate_example(e, vocab) for e in examples]
        truncated_ids = [e.id for e in examples if e.flags]
    out = settings.out_dir
    write_jsonl(out / "tasks.jsonl", (e.to_record() for e in examples))
    stats["truncated"] = len(truncated_ids)
    manifest = dict(stats)
    manifest["truncated_ids"] = truncated_ids
    write_jsonl(out / "taskgen_manifest.jsonl", [manifest])
    settings.say(f"wrote {len(examples)} task examples -> {out} ({stats})")
    return EXIT_OK


def _read_reference_file(path: str | None) -> dict[str, str] | None:
    if not path:
        return None
    refs = {}
    for lineno, obj in read_jsonl(path):
        if "id" not in obj or "target" not in obj:
            raise DataError(f"{path}:{lineno}: reference record needs 'id' and 'target'")
        refs[str(obj["id"])] = str(obj["target"])
    return refs


def cmd_tag(settings: Settings) -> int:
    lexicon = load_lexicon(settings.get("lexicon"))
    records = []
    for lineno, obj in read_jsonl(settings.require("input")):
        text = obj.get("text", obj.get("input"))  # adversarial files carry "input"
        if "id" not in obj or text is None:
            raise DataError(f"sentence record at line {lineno} needs 'id' and 'text'")
        frame = tag_sentence(str(text), lexicon)
        records.append(frame_to_record(str(obj["id"]), frame))
    out = settings.out_dir
    write_jsonl(out / "frames.jsonl", records)
    settings.say(f"tagged {len(records)} sentences -> {out / 'frames.jsonl'}")
    return EXIT_OK


def cmd_perturb(settings: Settings) -> int:
    lexicon = load_lexicon(settings.get("lexicon"))
    swaps = load_swap_table(settings.get("swaps"))
    kind_names = settings.get("kinds", default="cue_swap,scope_shift,double_neg")
    kinds = []
    for name in kind_names.split(","):
        name = name.strip().upper()
        if not name:
            continue
        try:
            kinds.append(PerturbationKind(name))
        except ValueError:
            raise DataError(f"unknown perturbation kind {name!r}") from None
    items = []
    for lineno, obj in read_jsonl(settings.require("input")):
        if "id" not in obj or "text" not in obj:
            raise DataError(f"gold sentence at line {lineno} needs 'id' and 'text'")
        frame = frame_from_record(obj, origin=f"line {lineno}")
        items.append((str(obj["id"]), str(obj["text"]), frame))
    adversarial, skipped = build_adversarial_set(
        items, kinds, seed=settings.seed, lexicon=lexicon, swaps=swaps
    )
    out = settings.out_dir
    write_jsonl(out / "adversarial.jsonl", (a.to_record() for a in adversarial))
    settings.say(
        f"built {len(adversarial)} adversarial items ({skipped} inapplicable) -> {out}"
    )
    return EXIT_OK


def _read_ids(path: str) -> list[str]:
    p = Path(path)
    if p.suffix == ".jsonl":
        ids = []
        seen = set()
        for _, obj in read_jsonl(p):
            rid = str(obj.get("report_id") or obj.get("id"))
            if rid not in seen:
                seen.add(rid)
                ids.append(rid)
        return ids
    with open(p, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def cmd_split(settings: Settings) -> int:
    ids = _read_ids(settings.require("ids"))
    ratio_text = settings.get("ratios", default="0.8,0.1,0.1")
    ratios = tuple(float(r) for r in ratio_text.split(","))
    assignment = split_corpus(ids, ratios=ratios, seed=settings.seed)
    out = settings.out_dir
    write_jsonl(
        out / "split.jsonl",
        ({"id": rid, "bucket": assignment.assignment[rid].value} for rid in ids),
    )
    sizes = {b.value: len(assignment.ids(b)) for b in Bucket}
    settings.say(f"split {len(ids)} ids {sizes} -> {out / 'split.jsonl'}")
    return EXIT_OK


def cmd_subsample(settings: Settings) -> int:
    split_path = settings.require("split")
    ratio = settings.require("ratio", cast=float)
    train_ids = [
        str(obj["id"])
        for _, obj in read_jsonl(split_path)
        if obj.get("bucket", "TRAIN") == "TRAIN"
    ]
    chosen = subsample(train_ids, SubsampleSpec(ratio=ratio, seed=settings.seed))
    out = settings.out_dir
    write_jsonl(out / "subsample.jsonl", ({"id": rid} for rid in sorted(chosen)))
    settings.say(f"subsampled {len(chosen)}/{len(train_ids)} train ids at ratio {ratio}")
    return EXIT_OK


def cmd_mock(settings: Settings) -> int:
    lexicon = load_lexicon(settings.get("lexicon"))
    vocab = SubwordVocab.load(settings.require("vocab"))
    corpus_path = settings.get("corpus")
    corpus = (
        [text for _, text in _load_corpus_texts(corpus_path)] if corpus_path else None
    )
    model = MockModel(
        lexicon,
        vocab,
        corpus=corpus,
        top_k=settings.get("top_k", default=5, cast=int),
    )
    out = settings.out_dir
    wrote = []

    tasks_path = settings.get("tasks")
    if tasks_path:
        records = []
        scores = []
        for lineno, obj in read_jsonl(tasks_path):
            try:
                task = TaskType(obj["task"])
                example_id, input_text, target = str(obj["id"]), str(obj["input"]), str(obj["target"])
            except (KeyError, ValueError) as exc:
                raise DataError(f"{tasks_path}:{lineno}: bad task record ({exc})") from exc
            from .datagen import TaskExample, Provenance

            example = TaskExample(
                task=task,
                id=example_id,
                input=input_text,
                target=target,
                provenance=Provenance(obj.get("provenance", "RULE")),
            )
            records.append(model.predict_task(example).to_record())
            scores.append(model.score_pieces(example_id, encode(target, vocab)).to_record())
        write_jsonl(out / "task_predictions.jsonl", records)
        write_jsonl(out / "score_predictions.jsonl", scores)
        wrote += ["task_predictions.jsonl", "score_predictions.jsonl"]

    corruption_path = settings.get("corruption")
    if corruption_path:
        span_records = []
        score_records = []
        for lineno, obj in read_jsonl(corruption_path):
            from .datagen import CorruptionExample, MaskedSpan

            example = CorruptionExample(
                id=str(obj["id"]),
                input=str(obj["input"]),
                target=str(obj["target"]),
                spans=[
                    MaskedSpan(int(s["k"]), int(s["offset"]), str(s["text"]))
                    for s in obj.get("spans", [])
                ],
                realized_mask_fraction=float(obj.get("mask_fraction", 0.0)),
                word_mask_fraction=float(obj.get("word_mask_fraction", 0.0)),
                flags=list(obj.get("flags", [])),
            )
            span_records.extend(r.to_record() for r in model.predict_spans(example))
            score_records.append(
                model.score_pieces(example.id, encode(example.target, vocab)).to_record()
            )
        write_jsonl(out / "span_predictions.jsonl", span_records)
        write_jsonl(out / "corruption_score_predictions.jsonl", score_records)
        wrote += ["span_predictions.jsonl", "corruption_score_predictions.jsonl"]

    sentences_path = settings.get("sentences")
    if sentences_path:
        frame_records = []
        for lineno, obj in read_jsonl(sentences_path):
            if "id" not in obj or "text" not in obj:
                raise DataError(f"{sentences_path}:{lineno}: needs 'id' and 'text'")
            frame_records.append(model.predict_frame(str(obj["id"]), str(obj["text"])).to_record())
        write_jsonl(out / "frame_predictions.jsonl", frame_records)
        wrote.append("frame_predictions.jsonl")

    if not wrote:
        raise DataError("mock: provide at least one of --tasks, --corruption, --sentences")
    settings.say(f"mock predictions -> {out} ({', '.join(wrote)})")
    return EXIT_OK


def cmd_eval(settings: Settings) -> int:
    lexicon = load_lexicon(settings.get("lexicon"))
    predictions = {}
    gold = {}
    mapping = {
        "ppl": ("ppl_predictions", None),
        "topk": ("topk_predictions", "topk_gold"),
        "ie": ("ie_predictions", "ie_gold"),
        "summarization": ("sum_predictions", "sum_references"),
        "robustness": ("negadv_predictions", "negadv_gold"),
        "calibration": ("calibration_predictions", "calibration_gold"),
        "hallucination": ("hallucination_predictions", "hallucination_sources"),
    }
    for name, (pred_key, gold_key) in mapping.items():
        pred = settings.get(pred_key)
        if pred:
            predictions[name] = Path(pred)
            if gold_key:
                gold_path = settings.get(gold_key)
                if not gold_path:
                    raise DataError(f"--{gold_key.replace('_', '-')} required with --{pred_key.replace('_', '-')}")
                gold[name] = Path(gold_path)
    if not predictions and not settings.get("ie_ratio_predictions"):
        raise DataError("eval: no prediction files supplied")
    enabled_text = settings.get("enable")
    enabled = (
        [e.strip() for e in enabled_text.split(",") if e.strip()]
        if enabled_text
        else sorted(set(predictions) - {"calibration", "hallucination"})
    )
    external = {}
    bertscore = settings.get("bertscore", cast=float)
    if bertscore is not None:
        external["bertscore"] = bertscore
    ratio_predictions = {}
    ratio_spec = settings.get("ie_ratio_predictions")
    if ratio_spec:
        for piece in ratio_spec.split(","):
            if "=" not in piece:
                raise DataError("--ie-ratio-predictions expects ratio=path pairs")
            ratio, _, path = piece.partition("=")
            try:
                ratio_predictions[float(ratio)] = Path(path.strip())
            except ValueError:
                raise DataError(f"bad label ratio {ratio!r}") from None
        if "ie" not in gold:
            gold_path = settings.get("ie_gold")
            if not gold_path:
                raise DataError("--ie-gold required with --ie-ratio-predictions")
            gold["ie"] = Path(gold_path)
    config = SuiteConfig(
        out_dir=settings.out_dir,
        predictions=predictions,
        gold=gold,
        enabled=enabled,
        seed=settings.seed,
        calibration_bins=settings.get("calibration_bins", default=10, cast=int),
        external_metrics=external,
        ratio_predictions=ratio_predictions,
    )
    report = run_suite(config, lexicon)
    settings.say(f"wrote {settings.out_dir / 'metrics.json'} with {len(report.metrics)} metrics")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegtext",
        description="Corpus engineering and evaluation toolkit for clinical EEG report text.",
    )
    parser.add_argument("--version", action="version", version=f"eegtext {__version__}")

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        p.add_argument("--config", help="flat key=value config file mirroring CLI flags")
        p.add_argument("--out", help="output directory (default ./out)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="ingest, de-identify, and normalize raw reports")
    p.add_argument("--input", help="report file, directory of .txt files, or JSONL")
    p.add_argument("--drop", help="comma-separated section kinds to drop (default HISTORY,MEDICATIONS)")
    add_common(p)
    p.set_defaults(handler=cmd_normalize)

    p = sub.add_parser("lexicon", help="terminology lexicon utilities")
    lex_sub = p.add_subparsers(dest="subcommand", required=True)
    pv = lex_sub.add_parser("validate", help="validate a lexicon file (bundled one by default)")
    pv.add_argument("path", nargs="?", help="lexicon JSONL/TSV (default: bundled)")
    add_common(pv)
    pv.set_defaults(handler=cmd_lexicon_validate)

    p = sub.add_parser("tokenizer", help="subword vocabulary training and evaluation")
    tok_sub = p.add_subparsers(dest="subcommand", required=True)
    pt = tok_sub.add_parser("train", help="train a byte-level pair-merge vocabulary")
    pt.add_argument("--corpus", help="paragraphs.jsonl or plain text (one paragraph per line)")
    pt.add_argument("--vocab-size", dest="vocab_size", type=int)
    pt.add_argument("--protect-terms", dest="protect_terms", action="store_true", default=None)
    pt.add_argument("--lexicon", help="lexicon file (default: bundled)")
    add_common(pt)
    pt.set_defaults(handler=cmd_tokenizer_train)
    pe = tok_sub.add_parser("eval", help="compute tokenizer quality metrics")
    pe.add_argument("--vocab")
    pe.add_argument("--corpus")
    pe.add_argument("--lexicon")
    add_common(pe)
    pe.set_defaults(handler=cmd_tokenizer_eval)

    p = sub.add_parser("corrupt", help="generate terminology span-corruption examples")
    p.add_argument("--corpus")
    p.add_argument("--lexicon")
    p.add_argument("--vocab")
    p.add_argument("--budget", type=float, help="mask budget fraction (default 0.15)")
    p.add_argument(
        "--topoff-random", dest="topoff_random", action="store_true", default=None,
        help="fill budget shortfalls with random non-term spans (dilutes terminology-only masking)",
    )
    add_common(p)
    p.set_defaults(handler=cmd_corrupt)

    p = sub.add_parser("taskgen", help="generate polish/QA/summarize task examples")
    p.add_argument("--corpus")
    p.add_argument("--lexicon")
    p.add_argument("--vocab", help="enables 512/256 piece truncation when given")
    p.add_argument("--tasks", help="comma-separated subset of polish,qa,summarize")
    p.add_argument("--sum-references", dest="sum_references", help="JSONL {id,target} pseudo-labels")
    p.add_argument("--polish-references", dest="polish_references", help="JSONL {id,target} pseudo-labels")
    add_common(p)
    p.set_defaults(handler=cmd_taskgen)

    p = sub.add_parser("tag", help="run the rule-dictionary tagger over sentences")
    p.add_argument("--input", help="JSONL {id,text}")
    p.add_argument("--lexicon")
    add_common(p)
    p.set_defaults(handler=cmd_tag)

    p = sub.add_parser("perturb", help="build negation-adversarial datasets")
    p.add_argument("--input", help="gold sentences JSONL {id,text,<frame fields>}")
    p.add_argument("--kinds", help="comma-separated kinds (default all three)")
    p.add_argument("--lexicon")
    p.add_argument("--swaps", help="swap table JSON (default: bundled)")
    add_common(p)
    p.set_defaults(handler=cmd_perturb)

    p = sub.add_parser("split", help="assign report ids to train/valid/test")
    p.add_argument("--ids", help="reports/paragraphs JSONL or plain id-per-line file")
    p.add_argument("--ratios", help="three comma-separated ratios (default 0.8,0.1,0.1)")
    add_common(p)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("subsample", help="nested label-ratio subsampling of the train bucket")
    p.add_argument("--split", help="split.jsonl from the split subcommand")
    p.add_argument("--ratio", type=float, help="fraction in (0, 1]")
    add_common(p)
    p.set_defaults(handler=cmd_subsample)

    p = sub.add_parser("mock", help="deterministic baseline predictions for pipeline checks")
    p.add_argument("--tasks", help="tasks.jsonl")
    p.add_argument("--corruption", help="corruption.jsonl")
    p.add_argument("--sentences", help="JSONL {id,text} for frame predictions")
    p.add_argument("--corpus", help="corpus for term frequency ranking")
    p.add_argument("--lexicon")
    p.add_argument("--vocab")
    p.add_argument("--top-k", dest="top_k", type=int)
    add_common(p)
    p.set_defaults(handler=cmd_mock)

    p = sub.add_parser("eval", help="run the evaluation suite over prediction files")
    p.add_argument("--lexicon")
    p.add_argument("--enable", help="comma-separated evaluations (default: inferred)")
    p.add_argument("--ppl-predictions", dest="ppl_predictions")
    p.add_argument("--topk-predictions", dest="topk_predictions")
    p.add_argument("--topk-gold", dest="topk_gold", help="corruption.jsonl with gold spans")
    p.add_argument("--ie-predictions", dest="ie_predictions")
    p.add_argument("--ie-gold", dest="ie_gold")
    p.add_argument(
        "--ie-ratio-predictions", dest="ie_ratio_predictions",
        help="comma-separated ratio=path pairs for the data-efficiency table",
    )
    p.add_argument("--sum-predictions", dest="sum_predictions")
    p.add_argument("--sum-references", dest="sum_references")
    p.add_argument("--negadv-predictions", dest="negadv_predictions")
    p.add_argument("--negadv-gold", dest="negadv_gold")
    p.add_argument("--calibration-predictions", dest="calibration_predictions")
    p.add_argument("--calibration-gold", dest="calibration_gold")
    p.add_argument("--hallucination-predictions", dest="hallucination_predictions")
    p.add_argument("--hallucination-sources", dest="hallucination_sources")
    p.add_argument("--bertscore", help="externally computed value for the reserved column")
    p.add_argument("--calibration-bins", dest="calibration_bins", type=int)
    add_common(p)
    p.set_defaults(handler=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(args)
        return args.handler(settings)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
