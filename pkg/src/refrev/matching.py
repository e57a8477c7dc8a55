"""Entity synonym decisions: code overlap, embedding overlap, TF-IDF overlap.

Two mentions are synonyms when any disjunct clears its threshold:
code >= 0.4, embedding cosine >= 0.75, or the three-way average >= 0.4.
When neither mention carries ontology codes, only the lexical disjuncts
(embedding, average with a zero code term) are consulted. Candidates are
always gated to the same entity type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Example, EntityMention, Sentence, scoped_key
from .embeddings import Embedder
from .errors import ValidationError

DEFAULT_STOPWORDS = frozenset("""
a an and are as at be by for from has have in is it of on or that the to was
were with
""".split())

_PUNCT_ONLY = set("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")


@dataclass(frozen=True)
class MatchConfig:
    code_threshold: float = 0.4
    embed_threshold: float = 0.75
    agg_threshold: float = 0.4
    stopwords: frozenset[str] = DEFAULT_STOPWORDS

    def __post_init__(self):
        for name in ("code_threshold", "embed_threshold", "agg_threshold"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must be in [0,1], got {v}", field=name)


@dataclass(frozen=True)
class DocFrequencyTable:
    doc_count: int
    df: dict[str, int] = field(default_factory=dict)


def build_df_table(corpus: Iterable[Example]) -> DocFrequencyTable:
    """Document frequencies with one sentence per document."""
    df: dict[str, int] = {}
    n = 0
    for example in corpus:
        for sentence in example.all_sentences():
            n += 1
            for token in set(sentence.tokens):
                df[token] = df.get(token, 0) + 1
    return DocFrequencyTable(doc_count=max(n, 1), df=df)


@dataclass(frozen=True)
class MentionRef:
    """An entity mention located in its sentence (for span tokens/vectors)."""

    mention: EntityMention
    key: str  # scoped 'example_id/sent_id'
    sentence: Sentence

    @property
    def span_tokens(self) -> tuple[str, ...]:
        return self.sentence.span_tokens(self.mention)


def mention_refs(example: Example, sentences: Sequence[Sentence]) -> list[MentionRef]:
    return [MentionRef(m, scoped_key(example.example_id, s.sent_id), s)
            for s in sentences for m in s.entities]


def source_mention_refs(example: Example) -> list[MentionRef]:
    return mention_refs(example, example.source_sentences())


def reference_mention_refs(example: Example) -> list[MentionRef]:
    return mention_refs(example, example.reference)


def code_overlap(e_x: EntityMention, e_y: EntityMention) -> float:
    """|codes_x & codes_y| / (|codes_x| + |codes_y|); 0 when either set is empty."""
    if not e_x.codes or not e_y.codes:
        return 0.0
    return len(e_x.codes & e_y.codes) / (len(e_x.codes) + len(e_y.codes))


def tfidf_overlap(tokens_x: Sequence[str], tokens_y: Sequence[str],
                  dft: DocFrequencyTable) -> float:
    """Cosine of smoothed tf-idf vectors over the two token multisets."""
    def weights(tokens: Sequence[str]) -> dict[str, float]:
        tf: dict[str, int] = {}
        for t in tokens:
            tf[t] = tf.get(t, 0) + 1
        return {t: c * (math.log((1 + dft.doc_count) / (1 + dft.df.get(t, 0))) + 1.0)
                for t, c in tf.items()}

    wx = weights(tokens_x)
    wy = weights(tokens_y)
    if not wx or not wy:
        return 0.0
    if wx == wy:
        return 1.0
    dot = sum(w * wy[t] for t, w in wx.items() if t in wy)
    if dot == 0.0:
        return 0.0
    nx = math.sqrt(sum(w * w for w in wx.values()))
    ny = math.sqrt(sum(w * w for w in wy.values()))
    return min(dot / (nx * ny), 1.0)


def agg_overlap(code: float, embed: float, tfidf: float) -> float:
    """Arithmetic mean of the three overlap scores."""
    return (code + embed + tfidf) / 3.0


@dataclass(frozen=True)
class SynonymScores:
    code: float
    embed: float
    tfidf: float
    agg: float
    code_met: bool
    embed_met: bool
    agg_met: bool

    @property
    def synonym(self) -> bool:
        return self.code_met or self.embed_met or self.agg_met


class MatcherContext:
    """Bundles the embedder, document frequencies, and thresholds."""

    def __init__(self, embedder: Embedder, dft: DocFrequencyTable,
                 config: MatchConfig | None = None):
        self.embedder = embedder
        self.dft = dft
        self.config = config or MatchConfig()
        self._span_cache: dict[tuple, np.ndarray] = {}

    def span_vector(self, ref: MentionRef) -> np.ndarray:
        """Mean of mention-span token vectors, stopwords/punctuation filtered.

        If filtering empties the span, the unfiltered span is used.
        """
        cache_key = (ref.key, ref.mention.token_span, ref.sentence.tokens)
        cached = self._span_cache.get(cache_key)
        if cached is not None:
            return cached
        matrix = self.embedder.matrix(ref.key, ref.sentence.tokens)
        start, end = ref.mention.token_span
        tokens = ref.sentence.tokens[start:end]
        keep = [i for i, t in enumerate(tokens)
                if t not in self.config.stopwords and not set(t) <= _PUNCT_ONLY]
        rows = matrix[start:end]
        if keep and len(keep) < len(tokens):
            rows = rows[keep]
        vec = np.asarray(rows, dtype=np.float64).mean(axis=0)
        self._span_cache[cache_key] = vec
        return vec

    def embed_overlap(self, x: MentionRef, y: MentionRef) -> float:
        """Cosine of pooled span vectors, clamped into [0, 1]."""
        u = self.span_vector(x)
        v = self.span_vector(y)
        if np.array_equal(u, v):
            return 0.0 if not u.any() else 1.0
        nu = float(np.linalg.norm(u))
        nv = float(np.linalg.norm(v))
        if nu == 0.0 or nv == 0.0:
            return 0.0
        cos = float(np.dot(u, v)) / (nu * nv)
        return min(max(cos, 0.0), 1.0)

    def scores(self, x: MentionRef, y: MentionRef) -> SynonymScores:
        code = code_overlap(x.mention, y.mention)
        embed = self.embed_overlap(x, y)
        tfidf = tfidf_overlap(x.span_tokens, y.span_tokens, self.dft)
        agg = agg_overlap(code, embed, tfidf)
        both_codeless = not x.mention.codes and not y.mention.codes
        cfg = self.config
        return SynonymScores(
            code=code, embed=embed, tfidf=tfidf, agg=agg,
            code_met=(not both_codeless) and code >= cfg.code_threshold,
            embed_met=embed >= cfg.embed_threshold,
            agg_met=agg >= cfg.agg_threshold,
        )

    def is_synonym(self, x: MentionRef, y: MentionRef) -> bool:
        if x.mention.etype != y.mention.etype:
            return False
        return self.scores(x, y).synonym

    def support_mention(self, mention: MentionRef,
                        candidates: Sequence[MentionRef]) -> Optional[str]:
        """Best synonym among candidates: highest agg, ties by mention_id."""
        typed = [c for c in candidates if c.mention.etype == mention.mention.etype]
        scored = [(c, self.scores(mention, c)) for c in typed]
        scored.sort(key=lambda cs: (-cs[1].agg, cs[0].mention.mention_id))
        for candidate, s in scored:
            if s.synonym:
                return candidate.mention.mention_id
        return None

    def supported(self, mention: MentionRef, candidates: Sequence[MentionRef]) -> bool:
        return self.support_mention(mention, candidates) is not None
