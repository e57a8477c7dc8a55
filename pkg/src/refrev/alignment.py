"""Greedy importance-weighted alignment of reference sentences to source evidence.

Each reference sentence is linked to at most ``max_extractions`` source
sentences. Selection maximizes the importance-weighted mean of per-token best
cosines; after each pick, token importance drops to the inverse of its best
coverage so already-covered tokens stop driving selection. Picks that improve
coverage too little are dropped, then source sentences are added back as
needed so every source-supported reference entity has a synonym in the
aligned context.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Example, Sentence, scoped_key
from .embeddings import Embedder, greedy_align_scores
from .errors import ValidationError
from .kernels import max_cosine_both
from .matching import MatcherContext, mention_refs, source_mention_refs

COVERED_EPS = 1e-6  # importance below this means the token is fully covered


@dataclass(frozen=True)
class AlignConfig:
    max_extractions: int = 5
    avg_improve_min: float = 0.01
    max_improve_min: float = 0.05

    def __post_init__(self):
        if self.max_extractions < 1:
            raise ValidationError("max_extractions must be >= 1", field="max_extractions")
        if self.avg_improve_min < 0 or self.max_improve_min < 0:
            raise ValidationError("improvement thresholds must be >= 0")


@dataclass
class Alignment:
    ref_sent_id: str
    aligned_src_ids: list[str]
    per_token_best: np.ndarray
    bs_precision: float
    completion_ids: list[str] = field(default_factory=list)

    def greedy_ids(self) -> list[str]:
        completion = set(self.completion_ids)
        return [s for s in self.aligned_src_ids if s not in completion]

    def to_dict(self, example_id: str) -> dict:
        return {
            "example_id": example_id,
            "ref_sent_id": self.ref_sent_id,
            "aligned_src_ids": list(self.aligned_src_ids),
            "completion_ids": list(self.completion_ids),
            "bs_precision": self.bs_precision,
            "per_token_best": [float(v) for v in self.per_token_best],
        }


def select_next(ref_matrix: np.ndarray, importance: np.ndarray,
                candidates: list[tuple[str, np.ndarray]]) -> tuple[str, np.ndarray]:
    """The candidate maximizing sum(w * align) / sum(w); ties by ascending id."""
    if not candidates:
        raise ValidationError("select_next requires at least one candidate")
    w = np.asarray(importance, dtype=np.float64)
    denom = float(w.sum())
    if denom <= 0.0:
        raise ValidationError("importance is all zero: reference fully covered")
    best_id, best_vec, best_score = None, None, -np.inf
    for sent_id, matrix in candidates:
        align = greedy_align_scores(ref_matrix, matrix)
        score = float(np.dot(w, align)) / denom
        if score > best_score or (score == best_score and sent_id < best_id):
            best_id, best_vec, best_score = sent_id, align, score
    return best_id, best_vec


def update_importance(importance: np.ndarray, align_scores: np.ndarray) -> np.ndarray:
    """w_{t+1} = min(w_t, 1 - align)."""
    w = np.asarray(importance, dtype=np.float64)
    a = np.asarray(align_scores, dtype=np.float64)
    if w.shape != a.shape:
        raise ValidationError(f"length mismatch: {w.shape} vs {a.shape}")
    return np.minimum(w, 1.0 - a)


def improvement(prev_best: np.ndarray, new_scores: np.ndarray) -> np.ndarray:
    """Per-token positive gain of the new pick over prior best coverage."""
    p = np.asarray(prev_best, dtype=np.float64)
    n = np.asarray(new_scores, dtype=np.float64)
    if p.shape != n.shape:
        raise ValidationError(f"length mismatch: {p.shape} vs {n.shape}")
    return np.maximum(0.0, n - p)


def bertscore(candidate_matrix: np.ndarray,
              reference_matrix: np.ndarray) -> tuple[float, float, float]:
    """Greedy-matching (precision, recall, F1); negative cosines clamp to 0."""
    cand = np.asarray(candidate_matrix)
    ref = np.asarray(reference_matrix)
    if cand.shape[0] == 0 or ref.shape[0] == 0:
        raise ValidationError("bertscore requires non-empty matrices")
    best_c, best_r = max_cosine_both(cand, ref)
    precision = float(np.clip(best_c, 0.0, 1.0).mean())
    recall = float(np.clip(best_r, 0.0, 1.0).mean())
    f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass
class GreedyStep:
    sent_id: str
    align: np.ndarray
    improvement: np.ndarray
    importance_after: np.ndarray


def greedy_trace(ref_matrix: np.ndarray, candidates: list[tuple[str, np.ndarray]],
                 config: AlignConfig) -> tuple[list[GreedyStep], list[str]]:
    """Run the greedy selection loop and the improvement filter.

    Returns every step taken plus the surviving sentence ids in selection
    order.
    """
    importance = np.ones(ref_matrix.shape[0])
    remaining = list(candidates)
    steps: list[GreedyStep] = []
    for _ in range(config.max_extractions):
        if not remaining or bool(np.all(importance <= COVERED_EPS)):
            break
        sent_id, align = select_next(ref_matrix, importance, remaining)
        improve = improvement(1.0 - importance, align)
        importance = update_importance(importance, align)
        steps.append(GreedyStep(sent_id=sent_id, align=align, improvement=improve,
                                importance_after=importance))
        remaining = [(sid, m) for sid, m in remaining if sid != sent_id]
    survivors = [s.sent_id for s in steps
                 if float(s.improvement.mean()) >= config.avg_improve_min
                 or float(s.improvement.max()) >= config.max_improve_min]
    return steps, survivors


def align_reference_sentence(ref: Sentence, example: Example, embedder: Embedder,
                             ctx: MatcherContext,
                             config: AlignConfig | None = None) -> Alignment:
    config = config or AlignConfig()
    source_sentences = [s for s in example.source_sentences() if s.tokens]
    if not source_sentences:
        raise ValidationError("cannot align against an empty source",
                              example_id=example.example_id, sent_id=ref.sent_id)
    eid = example.example_id
    ref_matrix = embedder.matrix(scoped_key(eid, ref.sent_id), ref.tokens)
    k = ref_matrix.shape[0]
    if k == 0:
        return Alignment(ref_sent_id=ref.sent_id, aligned_src_ids=[],
                         per_token_best=np.zeros(0), bs_precision=0.0)

    matrices = {s.sent_id: embedder.matrix(scoped_key(eid, s.sent_id), s.tokens)
                for s in source_sentences}
    _, survivor_ids = greedy_trace(
        ref_matrix, [(s.sent_id, matrices[s.sent_id]) for s in source_sentences],
        config)

    # Entity completion: every source-supported reference entity must have a
    # synonym inside the aligned context.
    by_id = {s.sent_id: s for s in source_sentences}
    src_mentions = source_mention_refs(example)
    covered_mentions = mention_refs(example, [by_id[sid] for sid in survivor_ids])
    completion_ids: list[str] = []
    for ref_mention in mention_refs(example, [ref]):
        synonyms = [m for m in src_mentions if ctx.is_synonym(ref_mention, m)]
        if not synonyms:
            continue  # unsupported entity; the quality gate deals with it
        present = covered_mentions + mention_refs(
            example, [by_id[sid] for sid in completion_ids])
        if any(ctx.is_synonym(ref_mention, m) for m in present):
            continue
        best = min(synonyms, key=lambda m: (-ctx.embed_overlap(ref_mention, m),
                                            m.sentence.sent_id, m.mention.mention_id))
        sid = best.sentence.sent_id
        if sid not in survivor_ids and sid not in completion_ids:
            completion_ids.append(sid)

    aligned_ids = survivor_ids + completion_ids
    if aligned_ids:
        context = np.vstack([matrices[sid] for sid in aligned_ids])
        per_token_best = np.clip(greedy_align_scores(ref_matrix, context), 0.0, 1.0)
        bs_precision = float(per_token_best.mean())
    else:
        per_token_best = np.zeros(k)
        bs_precision = 0.0
    return Alignment(ref_sent_id=ref.sent_id, aligned_src_ids=aligned_ids,
                     per_token_best=per_token_best, bs_precision=bs_precision,
                     completion_ids=completion_ids)


def align_example(example: Example, embedder: Embedder, ctx: MatcherContext,
                  config: AlignConfig | None = None) -> dict[str, Alignment]:
    return {ref.sent_id: align_reference_sentence(ref, example, embedder, ctx, config)
            for ref in example.reference}


def context_matrix(example: Example, alignment: Alignment,
                   embedder: Embedder) -> np.ndarray | None:
    """Concatenated token matrix of the aligned source sentences."""
    by_id = {s.sent_id: s for s in example.source_sentences()}
    parts = [embedder.matrix(scoped_key(example.example_id, sid), by_id[sid].tokens)
             for sid in alignment.aligned_src_ids]
    parts = [p for p in parts if p.shape[0]]
    return np.vstack(parts) if parts else None


def context_tokens(example: Example, alignment: Alignment) -> list[str]:
    by_id = {s.sent_id: s for s in example.source_sentences()}
    return [t for sid in alignment.aligned_src_ids for t in by_id[sid].tokens]


def context_text(example: Example, alignment: Alignment) -> str:
    by_id = {s.sent_id: s for s in example.source_sentences()}
    return " ".join(by_id[sid].text for sid in alignment.aligned_src_ids)
