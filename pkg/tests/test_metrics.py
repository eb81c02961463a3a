from __future__ import annotations

import math
import random
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegtext import DataError
from eegtext.corpus import SectionKind
from eegtext.ie import frame_serialize, tag_sentence
from eegtext.metrics import (
    PredictionRecord,
    TokenNLL,
    calibration,
    calibration_points,
    contradiction_rate,
    extract_facts,
    fact_f1,
    perplexity,
    rouge_l,
    term_intro_rate,
    topk_accuracy,
    _rouge_tokens,
)


def lcs_oracle(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    """Independent recursive LCS used only to check the DP implementation."""

    @lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


class TestRougeL:
    def test_identical(self):
        assert rouge_l("focal slowing seen", "focal slowing seen") == (1.0, 1.0, 1.0)

    def test_disjoint(self):
        assert rouge_l("alpha beta", "gamma delta") == (0.0, 0.0, 0.0)

    def test_empty_sides(self):
        assert rouge_l("", "anything") == (0.0, 0.0, 0.0)
        assert rouge_l("anything", "") == (0.0, 0.0, 0.0)

    def test_case_and_punctuation_folded(self):
        p, r, f1 = rouge_l("Focal Slowing, seen.", "focal slowing seen")
        assert (p, r, f1) == (1.0, 1.0, 1.0)

    def test_swap_symmetry(self):
        a = "left temporal sharp waves during sleep"
        b = "sharp waves seen over the left temporal region"
        pa, ra, fa = rouge_l(a, b)
        pb, rb, fb = rouge_l(b, a)
        assert (pa, ra) == (rb, pb)
        assert abs(fa - fb) < 1e-12

    def test_brute_force_agreement_500_pairs(self):
        rng = random.Random(12345)
        words = ["alpha", "beta", "slowing", "spike", "left", "temporal", "no", "seen"]
        for _ in range(500):
            cand = " ".join(rng.choices(words, k=rng.randint(0, 12)))
            ref = " ".join(rng.choices(words, k=rng.randint(0, 12)))
            p, r, f1 = rouge_l(cand, ref)
            ca, cb = tuple(_rouge_tokens(cand)), tuple(_rouge_tokens(ref))
            lcs = lcs_oracle(ca, cb)
            if not ca or not cb:
                assert (p, r, f1) == (0.0, 0.0, 0.0)
                continue
            assert p == lcs / len(ca)
            assert r == lcs / len(cb)
            expected_f1 = 2 * p * r / (p + r) if p + r else 0.0
            assert f1 == expected_f1


class TestFacts:
    def test_extract_collapses_duplicates(self, lexicon):
        facts = extract_facts("Focal slowing. Focal slowing.", lexicon)
        assert len(facts) == 1

    def test_fact_f1_identity(self, lexicon):
        text = "Focal slowing over the left temporal region. No spikes."
        score = fact_f1(text, text, lexicon)
        assert score.f1 == 1.0
        assert score.contradictions == 0

    def test_fact_f1_identity_with_no_facts(self, lexicon):
        score = fact_f1("Nothing clinical here.", "Nothing clinical here.", lexicon)
        assert score.f1 == 1.0

    def test_negation_contradiction(self, lexicon):
        score = fact_f1("focal slowing", "no focal slowing", lexicon)
        assert score.f1 == 0.0
        assert score.contradictions == 1

    def test_extra_unsupported_fact(self, lexicon):
        reference = (
            "Focal slowing over the temporal region. Spikes over the frontal region. "
            "Triphasic waves were seen."
        )
        candidate = reference + " Vertex waves were seen."
        score = fact_f1(candidate, reference, lexicon)
        assert abs(score.precision - 3 / 4) < 1e-12
        assert score.recall == 1.0
        assert abs(score.f1 - 6 / 7) < 1e-12
        assert score.contradictions == 0

    def test_fact_f1_identity_on_fixture(self, lexicon, fixture_texts):
        for text in fixture_texts[:200]:
            score = fact_f1(text, text, lexicon)
            assert score.f1 == 1.0, text
            assert score.contradictions == 0


def _nll_record(rid: str, nlls, section=SectionKind.OTHER):
    return PredictionRecord(
        id=rid, token_nlls=[TokenNLL(piece=f"p{i}", nll=v, section=section) for i, v in enumerate(nlls)]
    )


class TestPerplexity:
    def test_uniform_model_equals_vocab_size(self):
        v = 361
        records = [_nll_record("r1", [math.log(v)] * 10), _nll_record("r2", [math.log(v)] * 5)]
        assert abs(perplexity(records) - v) / v < 1e-12

    def test_two_record_arithmetic_oracle(self):
        records = [_nll_record("r1", [1.0, 2.0]), _nll_record("r2", [3.0])]
        assert abs(perplexity(records) - math.exp(6.0 / 3)) < 1e-12

    def test_order_and_sharding_invariance(self):
        a = [_nll_record("r1", [0.5, 1.5]), _nll_record("r2", [2.5])]
        b = [_nll_record("r2", [2.5]), _nll_record("r1", [0.5, 1.5])]
        merged = [_nll_record("r3", [0.5, 1.5, 2.5])]
        assert perplexity(a) == perplexity(b) == perplexity(merged)

    def test_section_filter(self):
        records = [
            _nll_record("r1", [1.0], SectionKind.IMPRESSION),
            _nll_record("r2", [5.0], SectionKind.FINDINGS),
        ]
        assert abs(perplexity(records, SectionKind.IMPRESSION) - math.exp(1.0)) < 1e-12

    def test_empty_filter_rejected(self):
        records = [_nll_record("r1", [1.0], SectionKind.FINDINGS)]
        with pytest.raises(DataError):
            perplexity(records, SectionKind.IMPRESSION)

    def test_missing_nlls_rejected(self):
        with pytest.raises(DataError):
            perplexity([PredictionRecord(id="x", output="hi")])


class TestTopK:
    def _records(self):
        records = []
        gold = {}
        for i in range(10):
            gold[f"g{i}"] = f"span {i}"
            # plant misses for the last three ids at k=1
            first = f"span {i}" if i < 7 else "wrong"
            records.append(
                PredictionRecord(
                    id=f"g{i}", candidates=[(first, 2.0), (f"span {i}", 1.0)]
                )
            )
        return records, gold

    def test_planted_misses(self):
        records, gold = self._records()
        assert topk_accuracy(records, gold, k=1) == 70.0
        assert topk_accuracy(records, gold, k=2) == 100.0

    def test_normalization(self):
        records = [PredictionRecord(id="a", candidates=[("  Focal   SLOWING ", 1.0)])]
        assert topk_accuracy(records, {"a": "focal slowing"}, k=1) == 100.0

    def test_k_validation(self):
        records, gold = self._records()
        with pytest.raises(DataError):
            topk_accuracy(records, gold, k=0)

    def test_missing_record_rejected(self):
        with pytest.raises(DataError):
            topk_accuracy([], {"a": "x"}, k=1)


def brute_force_calibration(points, bins):
    edges = [(i / bins, (i + 1) / bins) for i in range(bins)]
    ece = 0.0
    mce = 0.0
    for i, (lo, hi) in enumerate(edges):
        in_bin = [
            (c, ok)
            for c, ok in points
            if (lo <= c < hi) or (i == bins - 1 and c == hi)
        ]
        if not in_bin:
            continue
        conf = sum(c for c, _ in in_bin) / len(in_bin)
        acc = sum(1 for _, ok in in_bin if ok) / len(in_bin)
        gap = abs(acc - conf)
        ece += gap * len(in_bin) / len(points)
        mce = max(mce, gap)
    return ece, mce


class TestCalibration:
    def test_perfectly_calibrated(self):
        # bin [0.6, 0.7): all at 0.65 with 65% accuracy -> zero gap
        points = [(0.65, True)] * 13 + [(0.65, False)] * 7
        result = calibration(points, bins=10)
        assert abs(result.ece) < 1e-12
        assert abs(result.mce) < 1e-12

    def test_single_confident_wrong(self):
        result = calibration([(1.0, False)], bins=10)
        assert result.ece == 1.0
        assert result.mce == 1.0

    def test_brute_force_oracle_100_points(self):
        rng = random.Random(777)
        points = [(rng.random(), rng.random() < 0.6) for _ in range(100)]
        result = calibration(points, bins=10)
        ece, mce = brute_force_calibration(points, 10)
        assert abs(result.ece - ece) < 1e-12
        assert abs(result.mce - mce) < 1e-12

    @settings(max_examples=200)
    @given(
        st.lists(
            st.tuples(st.floats(min_value=0.0, max_value=1.0), st.booleans()),
            min_size=1,
            max_size=50,
        )
    )
    def test_ece_le_mce_in_range(self, points):
        result = calibration(points, bins=10)
        assert 0.0 <= result.ece <= result.mce <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            calibration([], bins=10)

    def test_points_from_records(self, lexicon):
        frame = tag_sentence("No focal slowing.", lexicon)
        record = PredictionRecord(
            id="s1",
            output=frame_serialize(frame),
            slot_confidences={"negation": 0.9, "pattern": 0.4},
        )
        points = calibration_points([record], {"s1": frame})
        assert sorted(points) == [(0.4, True), (0.9, True)]


class TestHallucination:
    def test_term_intro_zero_when_subset(self, lexicon):
        assert term_intro_rate("focal slowing", "focal slowing and spikes", lexicon) == 0.0

    def test_term_intro_half(self, lexicon):
        rate = term_intro_rate(
            "Focal slowing and triphasic waves.", "Focal slowing and spikes.", lexicon
        )
        assert rate == 0.5

    def test_term_intro_empty_candidate(self, lexicon):
        assert term_intro_rate("nothing here", "focal slowing", lexicon) == 0.0

    def test_contradiction_rate_zero_on_match(self, lexicon):
        text = "Focal slowing over the temporal region."
        assert contradiction_rate(text, text, lexicon) == 0.0

    def test_contradiction_rate_full_flip(self, lexicon):
        source = "Focal slowing over the temporal region. Spikes over the frontal region."
        candidate = (
            "No focal slowing over the temporal region. No spikes over the frontal region."
        )
        assert contradiction_rate(candidate, source, lexicon) == 1.0

    def test_contradiction_rate_no_candidate_facts(self, lexicon):
        assert contradiction_rate("plain text", "focal slowing", lexicon) == 0.0
