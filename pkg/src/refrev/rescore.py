"""Selection among over-generated revision candidates.

Less-abstractive selection maximizes BERTScore precision against the aligned
context; more-abstractive subtracts a bounded penalty on normalized extractive
fragment density. Fully extractive revision replaces a sentence with the
best-matching source sentence outright (zero hallucinations by construction),
and rank-corrected selection orders candidates by an externally supplied
entailment score.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .alignment import bertscore
from .corpus import Example, Sentence
from .embeddings import Embedder
from .errors import ValidationError

STRATEGIES = ("less_abstractive", "more_abstractive", "fully_extractive",
              "rank_corrected")


@dataclass(frozen=True)
class RescoreConfig:
    density_penalty_weight: float = 0.25
    strategy: str = "less_abstractive"

    def __post_init__(self):
        if self.density_penalty_weight < 0:
            raise ValidationError("density_penalty_weight must be >= 0")
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")


@dataclass
class Candidate:
    text: str
    tokens: tuple[str, ...]
    source_frac_bin: int = 0
    scores: dict[str, float] = field(default_factory=dict)


def fragment_stats(summary: Sequence[str], source: Sequence[str]) -> tuple[float, float]:
    """Extractive fragment coverage and density (greedy maximal shared
    subsequences, left to right)."""
    if not summary:
        raise ValidationError("fragment_stats requires a non-empty summary")
    positions: dict[str, list[int]] = {}
    for j, tok in enumerate(source):
        positions.setdefault(tok, []).append(j)
    fragments: list[int] = []
    i = 0
    n, m = len(summary), len(source)
    while i < n:
        best = 0
        for j in positions.get(summary[i], ()):
            length = 0
            while i + length < n and j + length < m and summary[i + length] == source[j + length]:
                length += 1
            if length > best:
                best = length
        if best:
            fragments.append(best)
            i += best
        else:
            i += 1
    total = sum(fragments)
    return total / n, sum(f * f for f in fragments) / n


def score_candidate(candidate: Candidate, context_matrix: np.ndarray,
                    context_tokens: Sequence[str], embedder: Embedder,
                    config: RescoreConfig) -> float:
    """Strategy score; fills bs_precision/coverage/density on the candidate."""
    if not candidate.tokens:
        raise ValidationError("candidate has no tokens")
    if "bs_precision" not in candidate.scores:
        matrix = embedder.resolve(candidate.tokens)
        candidate.scores["bs_precision"] = bertscore(matrix, context_matrix)[0]
    if "density" not in candidate.scores:
        coverage, density = fragment_stats(candidate.tokens, context_tokens)
        candidate.scores["coverage"] = coverage
        candidate.scores["density"] = density
    precision = candidate.scores["bs_precision"]
    if config.strategy == "less_abstractive":
        return precision
    if config.strategy == "more_abstractive":
        norm_density = candidate.scores["density"] / len(candidate.tokens)
        return precision - config.density_penalty_weight * norm_density
    raise ValidationError(f"score_candidate does not handle {config.strategy!r}")


def select_revision(candidates: Sequence[Candidate], context_matrix: np.ndarray,
                    context_tokens: Sequence[str], embedder: Embedder,
                    config: RescoreConfig) -> int:
    """Index of the argmax-scoring candidate; ties by lower density, then
    lower index."""
    if not candidates:
        raise ValidationError("select_revision requires >= 1 candidate")
    best_idx, best_key = 0, None
    for i, cand in enumerate(candidates):
        score = score_candidate(cand, context_matrix, context_tokens, embedder, config)
        key = (-score, cand.scores["density"], i)
        if best_key is None or key < best_key:
            best_idx, best_key = i, key
    return best_idx


def fully_extractive_revise(ref: Sentence, example: Example,
                            embedder: Embedder) -> Sentence:
    """The source sentence with the highest BERTScore F1 against the
    reference; its entity annotations come along unchanged."""
    sources = [s for s in example.source_sentences() if s.tokens]
    if not sources:
        raise ValidationError("no source sentences to extract from",
                              example_id=example.example_id, sent_id=ref.sent_id)
    ref_matrix = embedder.sentence_matrix(example.example_id, ref)
    if ref_matrix.shape[0] == 0:
        raise ValidationError("reference sentence has no tokens",
                              example_id=example.example_id, sent_id=ref.sent_id)
    best, best_key = None, None
    for s in sources:
        matrix = embedder.sentence_matrix(example.example_id, s)
        f1 = bertscore(matrix, ref_matrix)[2]
        key = (-f1, s.sent_id)
        if best_key is None or key < best_key:
            best, best_key = s, key
    return best


def rank_corrected(candidates: Sequence[Candidate]) -> int:
    """Argmax entailment; ties by lowest density (most abstractive), then
    lowest index. Every candidate must carry an entailment score."""
    if not candidates:
        raise ValidationError("rank_corrected requires >= 1 candidate")
    for i, c in enumerate(candidates):
        if "entailment" not in c.scores:
            raise ValidationError(f"candidate {i} is missing an entailment score")
    best_idx, best_key = 0, None
    for i, c in enumerate(candidates):
        key = (-c.scores["entailment"], c.scores.get("density", 0.0), i)
        if best_key is None or key < best_key:
            best_idx, best_key = i, key
    return best_idx


def extractiveness_bins(candidates: Sequence[Candidate],
                        edges: Sequence[float],
                        score_key: str = "entailment") -> list[dict]:
    """Assign candidates to coverage bins; report count and mean score."""
    if len(edges) < 2 or edges[0] != 0.0 or edges[-1] != 1.0:
        raise ValidationError("edges must span [0, 1]")
    if any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValidationError("edges must be strictly increasing")
    bins = [{"lo": lo, "hi": hi, "count": 0, "scores": []}
            for lo, hi in zip(edges, edges[1:])]
    for c in candidates:
        coverage = c.scores["coverage"]
        idx = len(bins) - 1
        for i, b in enumerate(bins):
            if b["lo"] <= coverage < b["hi"]:
                idx = i
                break
        bins[idx]["count"] += 1
        if score_key in c.scores:
            bins[idx]["scores"].append(c.scores[score_key])
    out = []
    for b in bins:
        scores = b.pop("scores")
        b["mean_score"] = sum(scores) / len(scores) if scores else None
        out.append(b)
    return out
