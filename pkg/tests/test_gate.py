"""Supportedness gate, filters, masks, buckets, diagnostics."""

import numpy as np
import pytest

from refrev.alignment import Alignment, align_example
from refrev.corpus import Example
from refrev.errors import ValidationError
from refrev.gate import (GateConfig, classify_example, classify_sentence,
                         diagnostics, example_halluc_rate, filter_no_admission,
                         filter_unsupported, halluc_ent_masks, pearson,
                         quality_bucket, token_coverage)

from helpers import hashed_ctx, mention, note, planted_corpus, sent


def _alignment(ref_sent_id, bs, n_tokens=3):
    return Alignment(ref_sent_id=ref_sent_id, aligned_src_ids=["s1"],
                     per_token_best=np.full(n_tokens, bs), bs_precision=bs)


class TestClassifySentence:
    def _example(self):
        src = sent("s1", "cough noted overnight",
                   [mention("s1-m0", "diagnosis", "cough", (0, 1), {"R05"})])
        return Example("e1", (note("n1", "Admission", 0, [src]),), ())

    def test_inclusive_bs_threshold(self):
        example = self._example()
        ref = sent("r1", "cough mild today",
                   [mention("r1-m0", "diagnosis", "cough", (0, 1), {"R05"})])
        _, ctx = hashed_ctx([example])
        label = classify_sentence(ref, _alignment("r1", 0.75), example, ctx)
        assert label.supported and label.halluc_mentions == ()

    def test_hallucination_blocks_high_bs(self):
        example = self._example()
        ref = sent("r1", "robitussin given today",
                   [mention("r1-m0", "medication", "robitussin", (0, 1), {"RX9"})])
        _, ctx = hashed_ctx([example])
        label = classify_sentence(ref, _alignment("r1", 0.9), example, ctx)
        assert not label.supported
        assert label.halluc_mentions == ("r1-m0",)

    def test_low_bs_blocks_zero_mentions(self):
        example = self._example()
        ref = sent("r1", "entirely unrelated text")
        _, ctx = hashed_ctx([example])
        label = classify_sentence(ref, _alignment("r1", 0.6), example, ctx)
        assert not label.supported and label.halluc_mentions == ()

    def test_label_invariant_holds(self):
        corpus, _ = planted_corpus(5)
        for example in corpus:
            embedder, ctx = hashed_ctx(corpus)
            alignments = align_example(example, embedder, ctx)
            for label in classify_example(example, alignments, ctx).values():
                assert label.supported == (
                    not label.halluc_mentions and label.bs_precision >= 0.75)


class TestFilters:
    def test_no_admission_keeps(self):
        ex = Example("e", (note("n1", "Admission", 0, []),
                           note("n2", "Nursing", 1, [])), ())
        assert filter_no_admission(ex)

    def test_no_admission_case_insensitive(self):
        ex = Example("e", (note("n1", "ADMISSION", 0, []),), ())
        assert filter_no_admission(ex)

    def test_no_admission_drops(self):
        assert not filter_no_admission(Example("e", (note("n1", "Nursing", 0, []),), ()))
        assert not filter_no_admission(Example("e", (), ()))

    def _cov_example(self, ref_tokens_in_src, ref_tokens_out):
        src = sent("s1", " ".join(f"w{i}" for i in range(ref_tokens_in_src)))
        ref_text = " ".join([f"w{i}" for i in range(ref_tokens_in_src)]
                            + [f"x{i}" for i in range(ref_tokens_out)])
        return Example("e", (note("n1", "A", 0, [src]),), (sent("r1", ref_text),))

    def test_coverage_clause(self):
        ex = self._cov_example(7, 3)  # coverage 0.7
        labels = {"r1": _label("r1", supported=True)}
        assert token_coverage(ex) == pytest.approx(0.7)
        assert not filter_unsupported(ex, labels)

    def test_rate_clause(self):
        src = sent("s1", "a b c d e f g h i j")
        ref = sent("r1", "a b c d e f g h",
                   [mention(f"r1-m{i}", "test", "a", (i, i + 1)) for i in range(8)])
        ex = Example("e", (note("n1", "A", 0, [src]),), (ref,))
        labels = {"r1": _label("r1", halluc=("r1-m0",))}  # rate 1/8 > 0.10
        assert not filter_unsupported(ex, labels)

    def test_both_pass(self):
        ex = self._cov_example(8, 2)  # coverage 0.8
        labels = {"r1": _label("r1")}
        assert filter_unsupported(ex, labels)


def _label(rid, supported=True, halluc=(), bs=1.0):
    from refrev.gate import SupportLabel
    return SupportLabel(ref_sent_id=rid, supported=supported,
                        halluc_mentions=tuple(halluc), bs_precision=bs)


class TestMasks:
    def test_no_hallucinations_all_false(self):
        ref = sent("r1", "a b c")
        masks = halluc_ent_masks([ref], {"r1": _label("r1")})
        assert masks["r1"] == [False, False, False]

    def test_span_masked(self):
        ref = sent("r1", "a b c d e",
                   [mention("r1-m0", "test", "c d", (2, 4))])
        masks = halluc_ent_masks([ref], {"r1": _label("r1", supported=False,
                                                      halluc=("r1-m0",))})
        assert masks["r1"] == [False, False, True, True, False]

    def test_full_span_all_true(self):
        ref = sent("r1", "a b", [mention("r1-m0", "test", "a b", (0, 2))])
        masks = halluc_ent_masks([ref], {"r1": _label("r1", supported=False,
                                                      halluc=("r1-m0",))})
        assert masks["r1"] == [True, True]


class TestQualityBucket:
    def _with_coverage(self, cov_num, cov_den):
        src = sent("s1", " ".join(f"w{i}" for i in range(cov_num)))
        ref_toks = [f"w{i}" for i in range(cov_num)] + \
                   [f"x{i}" for i in range(cov_den - cov_num)]
        return Example("e", (note("n1", "A", 0, [src]),),
                       (sent("r1", " ".join(ref_toks)),))

    def test_zero(self):
        assert quality_bucket(self._with_coverage(0, 5)) == 0

    def test_full_maps_to_top(self):
        assert quality_bucket(self._with_coverage(5, 5)) == 9

    def test_exact_tenths_bucket_correctly(self):
        # 3/10 must land in bucket 3 despite 0.3 * 10 == 2.999... in floats
        assert quality_bucket(self._with_coverage(3, 10)) == 3

    def test_fractional(self):
        assert quality_bucket(self._with_coverage(23, 100)) == 2

    def test_filter_pass_implies_high_bucket(self):
        corpus, _ = planted_corpus(10)
        for ex in corpus:
            labels = {r.sent_id: _label(r.sent_id) for r in ex.reference}
            if filter_unsupported(ex, labels):
                assert quality_bucket(ex) >= 7


class TestPearson:
    def test_perfect_correlation(self):
        assert pearson([0.0, 1.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_zero_variance_is_undefined(self):
        assert pearson([0.5, 0.5, 0.5], [0.1, 0.2, 0.3]) is None

    def test_matches_textbook_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            x = rng.uniform(size=10)
            y = rng.uniform(size=10)
            got = pearson(list(x), list(y))
            mx, my = x.mean(), y.mean()
            oracle = (np.sum((x - mx) * (y - my))
                      / np.sqrt(np.sum((x - mx) ** 2) * np.sum((y - my) ** 2)))
            assert got == pytest.approx(float(oracle), abs=1e-9)


class TestDiagnostics:
    def test_report_shape(self):
        corpus, _ = planted_corpus(6)
        embedder, ctx = hashed_ctx(corpus)
        labels = {}
        for ex in corpus:
            alignments = align_example(ex, embedder, ctx)
            labels[ex.example_id] = classify_example(ex, alignments, ctx)
        report = diagnostics(corpus, labels)
        assert report["example_count"] == 6
        assert len(report["example_halluc_histogram"]) == 20
        assert len(report["sentence_halluc_histogram"]) == 20
        assert sum(report["classes"].values()) == sum(len(e.reference) for e in corpus)

    def test_identical_coverage_gives_undefined_pearson(self):
        ex1 = Example("e1", (note("n1", "A", 0, [sent("s1", "a b")]),),
                      (sent("r1", "a b"),))
        ex2 = Example("e2", (note("n1", "A", 0, [sent("s1", "c d")]),),
                      (sent("r1", "c d"),))
        labels = {"e1": {"r1": _label("r1")}, "e2": {"r1": _label("r1")}}
        report = diagnostics([ex1, ex2], labels)
        assert report["coverage_halluc_pearson"] is None

    def test_needs_two_examples(self):
        with pytest.raises(ValidationError):
            diagnostics([Example("e1", (), ())], {"e1": {}})
