from __future__ import annotations

from pathlib import Path

import pytest

from eegtext.corpus import read_raw_reports, segment_report, split_paragraphs
from eegtext.lexicon import load_lexicon
from eegtext.tokenizer import train_subword
from eegtext.util import read_jsonl

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_REPORTS = (
    Path(__file__).parents[1] / "src/eegtext/data/fixtures/fixture_reports.jsonl"
)
MICRO_SUITE = Path(__file__).parents[1] / "src/eegtext/data/fixtures/micro_suite.jsonl"


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def fixture_reports():
    return [segment_report(raw) for raw in read_raw_reports(FIXTURE_REPORTS)]


@pytest.fixture(scope="session")
def fixture_paragraphs(fixture_reports):
    return [p for report in fixture_reports for p in split_paragraphs(report)]


@pytest.fixture(scope="session")
def fixture_texts(fixture_paragraphs):
    return [p.text for p in fixture_paragraphs]


@pytest.fixture(scope="session")
def vocab(fixture_texts, lexicon):
    return train_subword(fixture_texts, vocab_size=800, lexicon=lexicon, seed=7)


@pytest.fixture(scope="session")
def protected_vocab(fixture_texts, lexicon):
    return train_subword(
        fixture_texts, vocab_size=800, lexicon=lexicon, protect_terms=True, seed=7
    )


@pytest.fixture(scope="session")
def micro_suite():
    return [obj for _, obj in read_jsonl(MICRO_SUITE)]
