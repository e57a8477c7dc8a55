"""Faithfulness metrics over (source, summary) pairs and corpus reports.

Hallucination rate counts summary entity mentions with no synonym anywhere in
the source. Faithful-adjusted recall measures how many source-supported
reference concepts (synonym-deduplicated) the summary covers. BERTScore is
computed over whole concatenated summaries against the concatenated source.
"""

from __future__ import annotations

import csv
import io
from typing import Optional, Sequence

import numpy as np

from .alignment import bertscore
from .corpus import Example, Sentence, scoped_key
from .embeddings import Embedder
from .errors import ValidationError
from .matching import MatcherContext, MentionRef, mention_refs, source_mention_refs
from .rescore import fragment_stats

REPORT_COLUMNS = ("example_id", "hallucination_rate", "bs_precision", "bs_recall",
                  "bs_f1", "far", "coverage", "density", "compression", "entailment")


def hallucination_rate(summary_mentions: Sequence[MentionRef],
                       source_mentions: Sequence[MentionRef],
                       ctx: MatcherContext) -> float:
    """Fraction of summary mentions with no source synonym; 0 when empty."""
    if not summary_mentions:
        return 0.0
    unmatched = sum(1 for m in summary_mentions
                    if not ctx.supported(m, source_mentions))
    return unmatched / len(summary_mentions)


def faithful_adjusted_recall(summary_mentions: Sequence[MentionRef],
                             reference_mentions: Sequence[MentionRef],
                             source_mentions: Sequence[MentionRef],
                             ctx: MatcherContext) -> Optional[float]:
    """Coverage of source-supported reference concepts by the summary.

    Concepts are reference mentions deduplicated by the synonym relation;
    None when no reference concept is source-supported.
    """
    concepts: list[MentionRef] = []
    for m in reference_mentions:
        if not ctx.supported(m, source_mentions):
            continue
        if any(ctx.is_synonym(m, g) for g in concepts):
            continue
        concepts.append(m)
    if not concepts:
        return None
    covered = sum(1 for g in concepts
                  if any(ctx.is_synonym(s, g) for s in summary_mentions))
    return covered / len(concepts)


def compression(source_tokens: Sequence[str], summary_tokens: Sequence[str]) -> float:
    if not summary_tokens:
        raise ValidationError("compression requires a non-empty summary")
    return len(source_tokens) / len(summary_tokens)


def example_metrics(example: Example, summary: Sequence[Sentence],
                    embedder: Embedder, ctx: MatcherContext,
                    entailment: Optional[dict[str, float]] = None) -> dict:
    source_tokens = [t for s in example.source_sentences() for t in s.tokens]
    summary_tokens = [t for s in summary for t in s.tokens]
    if not summary_tokens:
        raise ValidationError("summary has no tokens", example_id=example.example_id)
    eid = example.example_id
    summary_mentions = [MentionRef(m, scoped_key(eid, s.sent_id), s)
                        for s in summary for m in s.entities]
    src_mentions = source_mention_refs(example)
    ref_mentions = mention_refs(example, example.reference)

    summary_matrix = np.vstack([
        embedder.resolve(s.tokens, key=scoped_key(eid, s.sent_id))
        for s in summary if s.tokens])
    source_matrix = np.vstack([
        embedder.matrix(scoped_key(eid, s.sent_id), s.tokens)
        for s in example.source_sentences() if s.tokens])
    precision, recall, f1 = bertscore(summary_matrix, source_matrix)
    coverage, density = fragment_stats(summary_tokens, source_tokens)
    row = {
        "example_id": eid,
        "hallucination_rate": hallucination_rate(summary_mentions, src_mentions, ctx),
        "bs_precision": precision,
        "bs_recall": recall,
        "bs_f1": f1,
        "far": faithful_adjusted_recall(summary_mentions, ref_mentions,
                                        src_mentions, ctx),
        "coverage": coverage,
        "density": density,
        "compression": compression(source_tokens, summary_tokens),
    }
    if entailment is not None:
        values = [entailment[s.sent_id] for s in summary if s.sent_id in entailment]
        row["entailment"] = sum(values) / len(values) if values else None
    return row


def corpus_report(corpus: Sequence[Example],
                  summaries: dict[str, Sequence[Sentence]],
                  embedder: Embedder, ctx: MatcherContext,
                  entailment: Optional[dict[str, dict[str, float]]] = None) -> dict:
    """Per-example rows (sorted by example_id) plus unweighted corpus means."""
    rows = []
    for example in sorted(corpus, key=lambda e: e.example_id):
        summary = summaries.get(example.example_id)
        if summary is None:
            raise ValidationError("no summary supplied",
                                  example_id=example.example_id)
        ex_entail = entailment.get(example.example_id) if entailment else None
        rows.append(example_metrics(example, summary, embedder, ctx, ex_entail))
    means: dict[str, Optional[float]] = {}
    for column in REPORT_COLUMNS[1:]:
        values = [r[column] for r in rows if r.get(column) is not None]
        means[column] = sum(values) / len(values) if values else None
    return {"per_example": rows, "corpus_means": means}


def report_to_csv(report: dict) -> str:
    buf = io.StringIO()
    columns = [c for c in REPORT_COLUMNS
               if any(c in row for row in report["per_example"])] or list(REPORT_COLUMNS)
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for row in report["per_example"]:
        writer.writerow(row)
    return buf.getvalue()
