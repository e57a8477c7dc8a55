"""Faithfulness metrics and the corpus report."""

import numpy as np
import pytest

from refrev.corpus import Example, Sentence
from refrev.errors import ValidationError
from refrev.matching import mention_refs, reference_mention_refs, source_mention_refs
from refrev.metrics import (compression, corpus_report, example_metrics,
                            faithful_adjusted_recall, hallucination_rate,
                            report_to_csv)

from helpers import hashed_ctx, mention, note, planted_corpus, sent


def _mention_sentence(sid, words, ent_specs):
    from refrev.corpus import EntityMention
    entities = tuple(EntityMention(f"{sid}-m{i}", etype, words[idx], (idx, idx + 1),
                                   frozenset(codes))
                     for i, (idx, etype, codes) in enumerate(ent_specs))
    return Sentence(sid, " ".join(words), tuple(words), entities)


def _example():
    src = _mention_sentence("s1", ["cough", "and", "fever", "noted"],
                            [(0, "diagnosis", {"R05"}), (2, "diagnosis", {"R50"})])
    src2 = _mention_sentence("s2", ["insulin", "started"],
                             [(0, "medication", {"RX3"})])
    ref = _mention_sentence("r1", ["cough", "fever", "insulin"],
                            [(0, "diagnosis", {"R05"}), (1, "diagnosis", {"R50"}),
                             (2, "medication", {"RX3"})])
    return Example("e1", (note("n1", "A", 0, [src, src2]),), (ref,))


class TestHallucinationRate:
    def test_counting(self):
        example = _example()
        _, ctx = hashed_ctx([example])
        summary = _mention_sentence(
            "y1", ["cough", "fever", "insulin", "zq9k"],
            [(0, "diagnosis", {"R05"}), (1, "diagnosis", {"R50"}),
             (2, "medication", {"RX3"}), (3, "medication", {"ZZ"})])
        refs = mention_refs(example, [summary])
        rate = hallucination_rate(refs, source_mention_refs(example), ctx)
        assert rate == pytest.approx(0.25)

    def test_zero_mentions(self):
        example = _example()
        _, ctx = hashed_ctx([example])
        assert hallucination_rate([], source_mention_refs(example), ctx) == 0.0

    def test_verbatim_copies_score_zero(self):
        example = _example()
        _, ctx = hashed_ctx([example])
        refs = reference_mention_refs(example)
        assert hallucination_rate(refs, source_mention_refs(example), ctx) == 0.0


class TestFaR:
    def test_counting(self):
        example = _example()
        _, ctx = hashed_ctx([example])
        # summary covers cough + insulin but not fever
        summary = _mention_sentence("y1", ["cough", "insulin"],
                                    [(0, "diagnosis", {"R05"}),
                                     (1, "medication", {"RX3"})])
        far = faithful_adjusted_recall(mention_refs(example, [summary]),
                                       reference_mention_refs(example),
                                       source_mention_refs(example), ctx)
        assert far == pytest.approx(2 / 3)

    def test_identity_summary_is_one(self):
        example = _example()
        _, ctx = hashed_ctx([example])
        far = faithful_adjusted_recall(reference_mention_refs(example),
                                       reference_mention_refs(example),
                                       source_mention_refs(example), ctx)
        assert far == 1.0

    def test_no_supported_reference_entities_is_none(self):
        example = _example()
        _, ctx = hashed_ctx([example])
        alien_ref = _mention_sentence("r9", ["zq9k"], [(0, "diagnosis", {"ZZ"})])
        far = faithful_adjusted_recall([], mention_refs(example, [alien_ref]),
                                       source_mention_refs(example), ctx)
        assert far is None

    def test_monotone_in_summary_mentions(self):
        example = _example()
        _, ctx = hashed_ctx([example])
        ref_refs = reference_mention_refs(example)
        src_refs = source_mention_refs(example)
        summary_pool = reference_mention_refs(example)
        prev = 0.0
        for k in range(len(summary_pool) + 1):
            far = faithful_adjusted_recall(summary_pool[:k], ref_refs, src_refs, ctx)
            assert far is not None and far >= prev - 1e-12
            prev = far


class TestCompression:
    def test_ratio(self):
        assert compression(["w"] * 20, ["w"] * 5) == 4.0

    def test_equal(self):
        assert compression(["a"], ["b"]) == 1.0

    def test_corpus_scale_ratio(self):
        assert compression(["t"] * 7553, ["t"] * 370) == pytest.approx(20.4, abs=0.02)

    def test_empty_summary_errors(self):
        with pytest.raises(ValidationError):
            compression(["a"], [])


class TestCorpusReport:
    def test_single_example_mean_equals_row(self):
        example = _example()
        embedder, ctx = hashed_ctx([example])
        report = corpus_report([example], {"e1": list(example.reference)},
                               embedder, ctx)
        row = report["per_example"][0]
        for key, value in report["corpus_means"].items():
            if value is not None:
                assert value == pytest.approx(row[key])

    def test_mean_of_two(self):
        corpus, _ = planted_corpus(2)
        embedder, ctx = hashed_ctx(corpus)
        summaries = {e.example_id: list(e.reference) for e in corpus}
        report = corpus_report(corpus, summaries, embedder, ctx)
        rates = [r["hallucination_rate"] for r in report["per_example"]]
        assert report["corpus_means"]["hallucination_rate"] == \
            pytest.approx(sum(rates) / 2)

    def test_deterministic(self):
        corpus, _ = planted_corpus(3)
        embedder, ctx = hashed_ctx(corpus)
        summaries = {e.example_id: list(e.reference) for e in corpus}
        a = corpus_report(corpus, summaries, embedder, ctx)
        b = corpus_report(corpus, summaries, embedder, ctx)
        assert a == b

    def test_missing_summary_errors(self):
        corpus, _ = planted_corpus(2)
        embedder, ctx = hashed_ctx(corpus)
        with pytest.raises(ValidationError, match="p001"):
            corpus_report(corpus, {"p000": list(corpus[0].reference)}, embedder, ctx)

    def test_entailment_passthrough(self):
        example = _example()
        embedder, ctx = hashed_ctx([example])
        report = corpus_report([example], {"e1": list(example.reference)},
                               embedder, ctx, {"e1": {"r1": 0.8}})
        assert report["per_example"][0]["entailment"] == pytest.approx(0.8)

    def test_csv_columns(self):
        example = _example()
        embedder, ctx = hashed_ctx([example])
        report = corpus_report([example], {"e1": list(example.reference)},
                               embedder, ctx)
        text = report_to_csv(report)
        header = text.splitlines()[0].split(",")
        assert header[0] == "example_id"
        assert "hallucination_rate" in header
        assert len(text.splitlines()) == 2


class TestFullyExtractiveGuarantee:
    def test_extractive_summary_rate_zero(self):
        from refrev.rescore import fully_extractive_revise
        corpus, _ = planted_corpus(4)
        embedder, ctx = hashed_ctx(corpus)
        for example in corpus:
            for ref in example.reference:
                chosen = fully_extractive_revise(ref, example, embedder)
                refs = mention_refs(example, [chosen])
                assert hallucination_rate(refs, source_mention_refs(example),
                                          ctx) == 0.0
