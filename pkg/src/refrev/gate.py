"""Supportedness classification, filtering baselines, loss masks, diagnostics.

A reference sentence is supported when it has zero hallucinated entities
(no synonym anywhere in the example's source notes) and its aligned-evidence
BERTScore precision clears the threshold. Example-level filters and quality
buckets work off exact-match token coverage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alignment import Alignment
from .corpus import Example, Sentence
from .errors import ValidationError
from .matching import MatcherContext, mention_refs, source_mention_refs

HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class GateConfig:
    support_bs_threshold: float = 0.75
    filter_token_coverage: float = 0.75
    filter_halluc_rate: float = 0.10
    bucket_count: int = 10

    def __post_init__(self):
        for name in ("support_bs_threshold", "filter_token_coverage", "filter_halluc_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must be in [0,1], got {v}", field=name)
        if self.bucket_count < 2:
            raise ValidationError("bucket_count must be >= 2", field="bucket_count")


@dataclass(frozen=True)
class SupportLabel:
    ref_sent_id: str
    supported: bool
    halluc_mentions: tuple[str, ...]
    bs_precision: float

    def to_dict(self, example_id: str) -> dict:
        return {"example_id": example_id, "ref_sent_id": self.ref_sent_id,
                "supported": self.supported,
                "halluc_mentions": list(self.halluc_mentions),
                "bs_precision": self.bs_precision}


def classify_sentence(ref: Sentence, alignment: Alignment, example: Example,
                      ctx: MatcherContext, config: GateConfig | None = None) -> SupportLabel:
    """Hallucinated = no synonym in the full source; supported needs zero of
    those plus aligned-evidence BERTScore precision above threshold."""
    config = config or GateConfig()
    if alignment.ref_sent_id != ref.sent_id:
        raise ValidationError("alignment does not belong to this sentence",
                              sent_id=ref.sent_id)
    source_mentions = source_mention_refs(example)
    halluc = tuple(
        m.mention.mention_id for m in mention_refs(example, [ref])
        if not ctx.supported(m, source_mentions)
    )
    supported = not halluc and alignment.bs_precision >= config.support_bs_threshold
    return SupportLabel(ref_sent_id=ref.sent_id, supported=supported,
                        halluc_mentions=halluc, bs_precision=alignment.bs_precision)


def classify_example(example: Example, alignments: dict[str, Alignment],
                     ctx: MatcherContext,
                     config: GateConfig | None = None) -> dict[str, SupportLabel]:
    return {ref.sent_id: classify_sentence(ref, alignments[ref.sent_id], example,
                                           ctx, config)
            for ref in example.reference}


def filter_no_admission(example: Example) -> bool:
    """Keep only examples whose source includes an Admission note."""
    return any(note.note_type.lower() == "admission" for note in example.source_notes)


def token_coverage(example: Example) -> float:
    """Fraction of reference tokens present (exact match) anywhere in source."""
    ref_tokens = [t for s in example.reference for t in s.tokens]
    if not ref_tokens:
        return 0.0
    src_vocab = {t for s in example.source_sentences() for t in s.tokens}
    return sum(1 for t in ref_tokens if t in src_vocab) / len(ref_tokens)


def example_halluc_rate(example: Example, labels: dict[str, SupportLabel]) -> float:
    total = sum(len(s.entities) for s in example.reference)
    if total == 0:
        return 0.0
    halluc = sum(len(labels[s.sent_id].halluc_mentions) for s in example.reference)
    return halluc / total


def filter_unsupported(example: Example, labels: dict[str, SupportLabel],
                       config: GateConfig | None = None) -> bool:
    """Keep iff token coverage and hallucination rate are both acceptable."""
    config = config or GateConfig()
    return (token_coverage(example) >= config.filter_token_coverage
            and example_halluc_rate(example, labels) <= config.filter_halluc_rate)


def halluc_ent_masks(reference: list[Sentence],
                     labels: dict[str, SupportLabel]) -> dict[str, list[bool]]:
    """Per-sentence masks: True marks tokens inside hallucinated entity spans
    (to be excluded from a training loss)."""
    masks = {}
    for sentence in reference:
        halluc = set(labels[sentence.sent_id].halluc_mentions)
        mask = [False] * len(sentence.tokens)
        for m in sentence.entities:
            if m.mention_id in halluc:
                for i in range(m.start, m.end):
                    mask[i] = True
        masks[sentence.sent_id] = mask
    return masks


def _bin_index(value: float, bins: int) -> int:
    # i/n ratios can land one ulp under a bin edge; nudge before flooring.
    return min(int(math.floor(value * bins + 1e-9)), bins - 1)


def quality_bucket(example: Example, config: GateConfig | None = None) -> int:
    """Coverage decile-style bucket; coverage 1.0 maps to the top bucket."""
    config = config or GateConfig()
    return _bin_index(token_coverage(example), config.bucket_count)


def pearson(xs: list[float], ys: list[float]) -> float | None:
    """Pearson correlation; None when either series has zero variance."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValidationError("pearson needs two equal-length series of >= 2 points")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    if denom == 0.0:
        return None
    return float(np.dot(xc, yc)) / denom


def _histogram(values: list[float], bins: int = HISTOGRAM_BINS) -> list[int]:
    counts = [0] * bins
    for v in values:
        counts[_bin_index(v, bins)] += 1
    return counts


def diagnostics(corpus: list[Example],
                labels: dict[str, dict[str, SupportLabel]],
                config: GateConfig | None = None) -> dict:
    """Corpus-level report: hallucination-rate histograms, the coverage vs
    hallucination correlation, and the four supportedness classes."""
    config = config or GateConfig()
    if len(corpus) < 2:
        raise ValidationError("diagnostics needs at least 2 examples")
    example_rates, coverages, sentence_rates = [], [], []
    classes = {"fails_both": 0, "entity_only": 0, "bs_only": 0, "supported": 0}
    for example in corpus:
        ex_labels = labels[example.example_id]
        example_rates.append(example_halluc_rate(example, ex_labels))
        coverages.append(token_coverage(example))
        for sentence in example.reference:
            label = ex_labels[sentence.sent_id]
            if sentence.entities:
                sentence_rates.append(len(label.halluc_mentions) / len(sentence.entities))
            has_halluc = bool(label.halluc_mentions)
            low_bs = label.bs_precision < config.support_bs_threshold
            if has_halluc and low_bs:
                classes["fails_both"] += 1
            elif has_halluc:
                classes["entity_only"] += 1
            elif low_bs:
                classes["bs_only"] += 1
            else:
                classes["supported"] += 1
    return {
        "example_count": len(corpus),
        "example_halluc_histogram": _histogram(example_rates),
        "sentence_halluc_histogram": _histogram(sentence_rates),
        "coverage_halluc_pearson": pearson(coverages, example_rates),
        "classes": classes,
    }
