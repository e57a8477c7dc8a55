"""Synthetic hallucination machinery: distractor sets, entity swaps, span
deletion, optional shuffling, and the swap baselines.

Corruption of a sentence samples a swap count k ~ Binomial(m, 0.5) over its m
entity mentions (half swapped on average), replaces each chosen mention with
a same-type entity from the distractor pool, deletes a short token span
(geometric length, mean 3), and optionally shuffles tokens outside entity
spans. Every decision is reproducible from (seed, input) alone.

Emitted records feed an external seq2seq trainer. Train records expose the
exchanged distractor set and the original sentence as the target. Inference
records withhold the removed entities (and their synonyms) from the
distractor field and advertise k+1 swaps, steering a generator toward
hallucinating rather than reconstructing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace
from typing import Callable, Optional, Sequence

import numpy as np

from .alignment import bertscore
from .corpus import Example, EntityMention, Sentence, iter_sentences_scoped
from .embeddings import Embedder, SentenceIndex, knn, pool_sentence
from .errors import ValidationError
from .matching import MatcherContext, MentionRef
from .seeding import derive_seed

MAX_DISTRACTORS = 25
DELETION_P = 1.0 / 3.0  # geometric(p) - 1 failures + 1 => mean 3 tokens


@dataclass(frozen=True)
class DistractorSet:
    anchor_key: str
    entries: tuple[MentionRef, ...]

    def by_etype(self, etype: str) -> list[MentionRef]:
        return [e for e in self.entries if e.mention.etype == etype]


def build_distractors(anchor_key: str, anchor: Sentence, index: SentenceIndex,
                      sentences: dict[str, Sentence], embedder: Embedder,
                      ctx: MatcherContext, max_size: int = MAX_DISTRACTORS) -> DistractorSet:
    """Walk nearest neighbors of the anchor collecting entities in mention
    order, skipping synonyms of anything already collected, up to max_size."""
    if not index.keys:
        return DistractorSet(anchor_key=anchor_key, entries=())
    if not anchor.tokens:
        return DistractorSet(anchor_key=anchor_key, entries=())
    query = pool_sentence(embedder.matrix(anchor_key, anchor.tokens))
    neighbors = knn(index, query, k=len(index.keys), exclude={anchor_key})
    collected: list[MentionRef] = []
    for key, _score in neighbors:
        sentence = sentences[key]
        for mention in sentence.entities:
            ref = MentionRef(mention, key, sentence)
            if any(ctx.is_synonym(ref, seen) for seen in collected):
                continue
            collected.append(ref)
            if len(collected) >= max_size:
                return DistractorSet(anchor_key=anchor_key, entries=tuple(collected))
    return DistractorSet(anchor_key=anchor_key, entries=tuple(collected))


@dataclass(frozen=True)
class CorruptionOptions:
    m1: bool = True
    m2: bool = True
    deletion: bool = True
    shuffle: bool = False


@dataclass(frozen=True)
class CorruptionPlan:
    anchor_key: str
    k: int
    swap_pairs: tuple[tuple[str, MentionRef], ...]  # (removed mention_id, replacement)
    deleted_span: Optional[tuple[int, int]]  # post-swap token indices
    shuffle: bool
    seed: int
    m1: bool
    m2: bool
    clamped: bool = False

    def removed_ids(self) -> set[str]:
        return {mid for mid, _ in self.swap_pairs}

    def replacements(self) -> list[MentionRef]:
        return [rep for _, rep in self.swap_pairs]


def _post_swap_layout(s: Sentence, swaps: dict[str, MentionRef]) -> tuple[int, list[tuple[int, int]]]:
    """Token count after swaps and the swapped-in span positions."""
    length = 0
    swapped_spans = []
    cursor = 0
    for mention in sorted(s.entities, key=lambda m: m.start):
        length += mention.start - cursor
        if mention.mention_id in swaps:
            rep = swaps[mention.mention_id]
            rep_len = max(rep.mention.end - rep.mention.start, 0)
            swapped_spans.append((length, length + rep_len))
            length += rep_len
        else:
            length += mention.end - mention.start
        cursor = mention.end
    length += len(s.tokens) - cursor
    return length, swapped_spans


def sample_plan(s: Sentence, anchor_key: str, distractors: DistractorSet, seed: int,
                options: CorruptionOptions | None = None) -> CorruptionPlan:
    """Sample one corruption plan. Draw order is fixed: swap count, swapped
    mentions, per-swap replacements, deletion start, deletion length."""
    options = options or CorruptionOptions()
    rng = np.random.default_rng(seed)
    m = len(s.entities)
    k_target = int(rng.binomial(m, 0.5)) if m else 0
    chosen: list[EntityMention] = []
    if k_target:
        idx = sorted(rng.choice(m, size=k_target, replace=False).tolist())
        ordered = sorted(s.entities, key=lambda e: e.start)
        chosen = [ordered[i] for i in idx]

    pool = list(distractors.entries)
    swap_pairs: list[tuple[str, MentionRef]] = []
    clamped = False
    for mention in chosen:
        candidates = [e for e in pool if e.mention.etype == mention.etype]
        if not candidates:
            candidates = pool
        if not candidates:
            clamped = True
            continue
        rep = candidates[int(rng.integers(len(candidates)))]
        pool.remove(rep)
        if not options.m1:
            # exchange semantics: the removed entity becomes available
            pool.append(MentionRef(mention, anchor_key, s))
        swap_pairs.append((mention.mention_id, rep))

    deleted_span = None
    if options.deletion:
        swaps = {mid: rep for mid, rep in swap_pairs}
        length, swapped_spans = _post_swap_layout(s, swaps)
        blocked = [False] * length
        for lo, hi in swapped_spans:
            for i in range(lo, hi):
                blocked[i] = True
        valid_starts = [i for i in range(length) if not blocked[i]]
        if valid_starts:
            start = valid_starts[int(rng.integers(len(valid_starts)))]
            failures = int(rng.geometric(DELETION_P)) - 1
            limit = length
            for lo, _hi in swapped_spans:
                if lo > start:
                    limit = min(limit, lo)
            span_len = min(failures + 1, limit - start)
            if span_len >= length:
                span_len = length - 1  # never delete the whole sentence
            if span_len > 0:
                deleted_span = (start, start + span_len)

    return CorruptionPlan(anchor_key=anchor_key, k=len(swap_pairs),
                          swap_pairs=tuple(swap_pairs), deleted_span=deleted_span,
                          shuffle=options.shuffle, seed=seed,
                          m1=options.m1, m2=options.m2, clamped=clamped)


@dataclass(frozen=True)
class CorruptedSentence:
    sentence: Sentence
    origins: tuple[tuple[str, int], ...]  # per token: (scoped sent key, row index)
    plan: Optional[CorruptionPlan] = None  # None when reloaded from disk

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.sentence.tokens

    def matrix(self, embedder: Embedder) -> np.ndarray:
        return embedder.gather(list(self.origins), self.sentence.tokens)


def apply_plan(s: Sentence, plan: CorruptionPlan) -> CorruptedSentence:
    """Execute swaps, then deletion, then the optional shuffle.

    Swapped-in entities carry fresh mention annotations; original mentions
    whose spans survive are re-indexed. Deletion drops any mention it cuts.
    """
    swaps = dict(plan.swap_pairs)
    tokens: list[str] = []
    origins: list[tuple[str, int]] = []
    mentions: list[EntityMention] = []
    cursor = 0
    swap_counter = 0
    for mention in sorted(s.entities, key=lambda m: m.start):
        for i in range(cursor, mention.start):
            tokens.append(s.tokens[i])
            origins.append((plan.anchor_key, i))
        rep = swaps.get(mention.mention_id)
        if rep is None:
            new_span = (len(tokens), len(tokens) + (mention.end - mention.start))
            for i in range(mention.start, mention.end):
                tokens.append(s.tokens[i])
                origins.append((plan.anchor_key, i))
            mentions.append(dc_replace(mention, token_span=new_span))
        else:
            rep_tokens = rep.span_tokens
            new_span = (len(tokens), len(tokens) + len(rep_tokens))
            for j, tok in enumerate(rep_tokens):
                tokens.append(tok)
                origins.append((rep.key, rep.mention.start + j))
            mentions.append(EntityMention(
                mention_id=f"{s.sent_id}-sw{swap_counter}",
                etype=rep.mention.etype, text=rep.mention.text,
                token_span=new_span, codes=rep.mention.codes))
            swap_counter += 1
        cursor = mention.end
    for i in range(cursor, len(s.tokens)):
        tokens.append(s.tokens[i])
        origins.append((plan.anchor_key, i))

    if plan.deleted_span is not None:
        lo, hi = plan.deleted_span
        tokens = tokens[:lo] + tokens[hi:]
        origins = origins[:lo] + origins[hi:]
        cut = hi - lo
        kept = []
        for m in mentions:
            if m.end <= lo:
                kept.append(m)
            elif m.start >= hi:
                kept.append(dc_replace(m, token_span=(m.start - cut, m.end - cut)))
            # else: the deletion cut into this mention; drop its annotation
        mentions = kept

    if plan.shuffle and tokens:
        inside = [False] * len(tokens)
        for m in mentions:
            for i in range(m.start, m.end):
                inside[i] = True
        outside = [i for i in range(len(tokens)) if not inside[i]]
        rng = np.random.default_rng(derive_seed(plan.seed, "shuffle"))
        perm = rng.permutation(len(outside))
        moved_tokens = [tokens[outside[p]] for p in perm]
        moved_origins = [origins[outside[p]] for p in perm]
        for slot, tok, org in zip(outside, moved_tokens, moved_origins):
            tokens[slot] = tok
            origins[slot] = org

    corrupted = Sentence(sent_id=s.sent_id, text=" ".join(tokens),
                         tokens=tuple(tokens), entities=tuple(mentions))
    return CorruptedSentence(sentence=corrupted, origins=tuple(origins), plan=plan)


# ---------------------------------------------------------------------------
# Swap baselines
# ---------------------------------------------------------------------------

@dataclass
class EntityFrequencyTable:
    """Corpus-wide empirical entity frequencies, grouped per entity type."""

    by_etype: dict[str, tuple[list[MentionRef], np.ndarray]]

    @classmethod
    def build(cls, corpus: Sequence[Example]) -> "EntityFrequencyTable":
        groups: dict[str, dict[tuple, tuple[MentionRef, int]]] = {}
        for example in corpus:
            for key, sentence in iter_sentences_scoped(example):
                for mention in sentence.entities:
                    ident = (mention.etype, mention.text.lower(), mention.codes)
                    per_type = groups.setdefault(mention.etype, {})
                    proto, count = per_type.get(ident, (None, 0))
                    if proto is None:
                        proto = MentionRef(mention, key, sentence)
                    per_type[ident] = (proto, count + 1)
        by_etype = {}
        for etype, entries in groups.items():
            protos = [p for p, _ in entries.values()]
            counts = np.array([c for _, c in entries.values()], dtype=np.float64)
            by_etype[etype] = (protos, counts / counts.sum())
        return cls(by_etype=by_etype)

    def sample(self, etype: str, rng: np.random.Generator) -> Optional[MentionRef]:
        if etype not in self.by_etype:
            return None
        protos, probs = self.by_etype[etype]
        return protos[int(rng.choice(len(protos), p=probs))]


def _swap_only_plan(s: Sentence, anchor_key: str, seed: int,
                    pick: Callable[[EntityMention, np.random.Generator], Optional[MentionRef]],
                    ) -> CorruptionPlan:
    rng = np.random.default_rng(seed)
    m = len(s.entities)
    k_target = int(rng.binomial(m, 0.5)) if m else 0
    swap_pairs: list[tuple[str, MentionRef]] = []
    clamped = False
    if k_target:
        idx = sorted(rng.choice(m, size=k_target, replace=False).tolist())
        ordered = sorted(s.entities, key=lambda e: e.start)
        for i in idx:
            mention = ordered[i]
            rep = pick(mention, rng)
            if rep is None:
                clamped = True
                continue
            swap_pairs.append((mention.mention_id, rep))
    return CorruptionPlan(anchor_key=anchor_key, k=len(swap_pairs),
                          swap_pairs=tuple(swap_pairs), deleted_span=None,
                          shuffle=False, seed=seed, m1=False, m2=False,
                          clamped=clamped)


def swap_random(s: Sentence, anchor_key: str, freq: EntityFrequencyTable,
                seed: int) -> CorruptedSentence:
    """Replace sampled mentions with same-type entities drawn by corpus
    frequency; mentions with no same-type entity anywhere stay unchanged."""
    plan = _swap_only_plan(s, anchor_key, seed,
                           lambda mention, rng: freq.sample(mention.etype, rng))
    return apply_plan(s, plan)


def swap_related(s: Sentence, anchor_key: str, distractors: DistractorSet,
                 seed: int) -> CorruptedSentence:
    """Replace sampled mentions uniformly from same-type distractor entries."""
    def pick(mention: EntityMention, rng: np.random.Generator) -> Optional[MentionRef]:
        candidates = distractors.by_etype(mention.etype)
        if not candidates:
            return None
        return candidates[int(rng.integers(len(candidates)))]

    plan = _swap_only_plan(s, anchor_key, seed, pick)
    return apply_plan(s, plan)


# ---------------------------------------------------------------------------
# Record emission
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RedressRecord:
    mode: str  # "train" | "inference"
    k_code: int
    distractors: tuple[EntityMention, ...]
    corrupted_text: str
    target_text: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "k_code": self.k_code,
            "distractors": [{"etype": e.etype, "text": e.text, "codes": sorted(e.codes)}
                            for e in self.distractors],
            "corrupted_text": self.corrupted_text,
        }
        if self.mode == "train":
            out["target_text"] = self.target_text
        return out

    def to_seq2seq(self) -> str:
        ents = " ; ".join(e.text for e in self.distractors)
        return f"{self.k_code} <sep> {ents} <sep> {self.corrupted_text}"


def emit_redress(s: Sentence, distractors: DistractorSet, plan: CorruptionPlan,
                 applied: CorruptedSentence, mode: str,
                 ctx: MatcherContext) -> RedressRecord:
    if mode not in ("train", "inference"):
        raise ValidationError(f"unknown redress mode {mode!r}")
    used = {(rep.key, rep.mention.mention_id) for rep in plan.replacements()}
    remaining = [e for e in distractors.entries
                 if (e.key, e.mention.mention_id) not in used]
    removed = [MentionRef(m, plan.anchor_key, s)
               for m in sorted(s.entities, key=lambda e: e.start)
               if m.mention_id in plan.removed_ids()]
    if mode == "train":
        field = [e.mention for e in remaining] + [r.mention for r in removed]
        return RedressRecord(mode="train", k_code=plan.k,
                             distractors=tuple(field),
                             corrupted_text=applied.sentence.text,
                             target_text=s.text)
    if plan.m1:
        remaining = [e for e in remaining
                     if not any(ctx.is_synonym(e, r) for r in removed)]
    k_code = plan.k + 1 if plan.m2 else plan.k
    return RedressRecord(mode="inference", k_code=k_code,
                         distractors=tuple(e.mention for e in remaining),
                         corrupted_text=applied.sentence.text)


def select_most_unsupported(candidates: Sequence[CorruptedSentence],
                            context_matrix: np.ndarray, embedder: Embedder) -> int:
    """Index of the candidate least supported by the aligned context (lowest
    BERTScore precision); empty candidates count as precision 0."""
    if not candidates:
        raise ValidationError("select_most_unsupported requires >= 1 candidate")
    best_idx, best_prec = 0, np.inf
    for i, cand in enumerate(candidates):
        matrix = cand.matrix(embedder)
        prec = 0.0 if matrix.shape[0] == 0 else bertscore(matrix, context_matrix)[0]
        if prec < best_prec:
            best_idx, best_prec = i, prec
    return best_idx


def diversity(sample_a: Sequence[str], sample_b: Sequence[str]) -> float:
    """One minus the fraction of a's tokens (with multiplicity) found in b."""
    if not sample_a or not sample_b:
        raise ValidationError("diversity requires non-empty token sequences")
    vocab_b = set(sample_b)
    covered = sum(1 for t in sample_a if t in vocab_b)
    return 1.0 - covered / len(sample_a)


def mean_pairwise_diversity(samples: Sequence[Sequence[str]]) -> float:
    """Average diversity over all ordered pairs of distinct samples."""
    pairs = [(a, b) for i, a in enumerate(samples) for j, b in enumerate(samples)
             if i != j]
    if not pairs:
        raise ValidationError("need >= 2 samples for pairwise diversity")
    return sum(diversity(a, b) for a, b in pairs) / len(pairs)
