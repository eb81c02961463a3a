"""Bridge CLI, mirroring the toolkit's flag conventions.

Subcommands: generate, score, span-topk, finetune. Shared flags --seed,
--config (flat key = value file), --out, --quiet. Exit codes: 0 success,
2 usage, 3 data error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import BridgeError, __version__
from .modes import BridgeConfig, Mode, run

EXIT_OK = 0
EXIT_DATA = 3


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise BridgeError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise BridgeError(f"cannot read config {path}: {exc}") from exc
    return values


def _resolve(args: argparse.Namespace, key: str, default=None, cast=None):
    value = getattr(args, key, None)
    if value is None and getattr(args, "_config", None):
        value = args._config.get(key)
    if value is None:
        return default
    if cast is not None and isinstance(value, str):
        try:
            return cast(value)
        except ValueError as exc:
            raise BridgeError(f"bad value for {key}: {value!r}") from exc
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegtext-bridge",
        description="Run a text-to-text model over toolkit datasets, emitting prediction files.",
    )
    parser.add_argument("--version", action="version", version=f"eegtext-bridge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_dataset=True):
        if needs_dataset:
            p.add_argument("--dataset", required=True, help="tasks.jsonl or corruption.jsonl")
        p.add_argument("--model", help="'stub' (default) or a toy checkpoint directory")
        p.add_argument("--vocab", help="toolkit vocab.json")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help="output directory (default ./out)")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("generate", help="one output string per task example")
    add_common(p)
    p.set_defaults(mode=Mode.GENERATE)

    p = sub.add_parser("score", help="per-piece reference negative log-likelihoods")
    add_common(p)
    p.set_defaults(mode=Mode.SCORE)

    p = sub.add_parser("span-topk", help="ranked candidates per masked sentinel")
    add_common(p)
    p.add_argument("--lexicon", help="toolkit lexicon JSONL")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.set_defaults(mode=Mode.SPAN_TOPK)

    p = sub.add_parser("finetune", help="toy-scale fine-tuning with early stopping")
    add_common(p)
    p.add_argument("--val-dataset", dest="val_dataset", help="validation split (required)")
    p.set_defaults(mode=Mode.FINETUNE)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = _parse_config_file(args.config) if getattr(args, "config", None) else {}
        config = BridgeConfig(
            mode=args.mode,
            dataset=Path(_resolve(args, "dataset")),
            out_dir=Path(_resolve(args, "out", default="out")),
            model=_resolve(args, "model", default="stub"),
            vocab=_maybe_path(_resolve(args, "vocab")),
            lexicon=_maybe_path(_resolve(args, "lexicon")),
            val_dataset=_maybe_path(_resolve(args, "val_dataset")),
            top_k=_resolve(args, "top_k", default=5, cast=int),
            max_in=_resolve(args, "max_in", default=512, cast=int),
            max_out=_resolve(args, "max_out", default=256, cast=int),
            seed=_resolve(args, "seed", default=0, cast=int),
        )
        produced = run(config)
        if not args.quiet:
            print(f"{args.mode.value.lower()} -> {produced}")
        return EXIT_OK
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _maybe_path(value) -> Path | None:
    return Path(value) if value else None


if __name__ == "__main__":
    sys.exit(main())
