"""Contrastive revision tuples and inference prompts.

For every supported reference sentence r with aligned context S and N
corruption candidates, four training records are assembled (two fewer when
the example has no other aligned reference sentence):

  positive: (worst corruption, S, r)       positive: (other reference r*, S, r)
  negative: (worst corruption, S, random corruption)
  negative: (r, context of r*, r)

Copy-fraction control codes are computed from each record's own texts and
binned into deciles. Unsupported sentences instead get 10 inference prompts
sweeping the source-copy bin, with the input-copy bin fixed to the lexical
overlap proxy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .alignment import Alignment, context_matrix, context_text, context_tokens
from .corpus import Example, Sentence
from .corruption import CorruptedSentence, select_most_unsupported
from .embeddings import Embedder
from .errors import ValidationError
from .gate import SupportLabel
from .seeding import derive_rng

PROVENANCES = ("redress_worst", "random_other_ref", "redress_random_negative",
               "self_with_other_context", "inference")


def decile(frac: float) -> int:
    """floor(frac * 10) with 1.0 mapping to 9; robust to i/n rounding."""
    if not (0.0 <= frac <= 1.0):
        raise ValidationError(f"fraction {frac} outside [0,1]")
    return min(int(math.floor(frac * 10 + 1e-9)), 9)


@dataclass(frozen=True)
class CodePair:
    input_frac: float
    source_frac: float

    @property
    def input_frac_bin(self) -> int:
        return decile(self.input_frac)

    @property
    def source_frac_bin(self) -> int:
        return decile(self.source_frac)


def compute_codes(r_out: Sequence[str], r_in: Sequence[str],
                  s_tokens: Sequence[str]) -> CodePair:
    """Copy fractions of the revision target from the input and the context.

    Tokens of r_out are counted with multiplicity against the other side's
    vocabulary.
    """
    if not r_out:
        raise ValidationError("compute_codes requires a non-empty revision target")
    in_vocab = set(r_in)
    src_vocab = set(s_tokens)
    n = len(r_out)
    return CodePair(
        input_frac=sum(1 for t in r_out if t in in_vocab) / n,
        source_frac=sum(1 for t in r_out if t in src_vocab) / n,
    )


@dataclass(frozen=True)
class RevisionRecord:
    example_id: str
    ref_sent_id: str
    input_text: str
    context_sent_ids: tuple[str, ...]
    context_text: str
    target_text: Optional[str]
    polarity: Optional[str]  # "positive" | "negative" | None for inference
    input_frac: float
    source_frac: float
    provenance: str

    @property
    def input_frac_bin(self) -> int:
        return decile(self.input_frac)

    @property
    def source_frac_bin(self) -> int:
        return decile(self.source_frac)

    def serialized_input(self) -> str:
        return (f"<IF_{self.input_frac_bin}> <SF_{self.source_frac_bin}> "
                f"{self.input_text} <SEP> {self.context_text}")

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "ref_sent_id": self.ref_sent_id,
            "input_text": self.input_text,
            "context_sent_ids": list(self.context_sent_ids),
            "context_text": self.context_text,
            "target_text": self.target_text,
            "polarity": self.polarity,
            "input_frac": self.input_frac,
            "source_frac": self.source_frac,
            "input_frac_bin": self.input_frac_bin,
            "source_frac_bin": self.source_frac_bin,
            "provenance": self.provenance,
            "serialized_input": self.serialized_input(),
        }


def _record(example: Example, ref_sent_id: str, input_sentence, alignment: Alignment,
            target_tokens: Sequence[str], target_text: str, polarity: str,
            provenance: str, input_tokens: Sequence[str]) -> RevisionRecord:
    codes = compute_codes(target_tokens, input_tokens,
                          context_tokens(example, alignment))
    return RevisionRecord(
        example_id=example.example_id, ref_sent_id=ref_sent_id,
        input_text=input_sentence, context_sent_ids=tuple(alignment.aligned_src_ids),
        context_text=context_text(example, alignment), target_text=target_text,
        polarity=polarity, input_frac=codes.input_frac,
        source_frac=codes.source_frac, provenance=provenance)


def expected_record_count(supported_count: int, other_aligned_refs: bool) -> int:
    """Closed-form template count per example."""
    return supported_count * (4 if other_aligned_refs else 2)


def build_contrast_sets(example: Example, labels: dict[str, SupportLabel],
                        alignments: dict[str, Alignment],
                        corruptions: dict[str, list[CorruptedSentence]],
                        embedder: Embedder, seed: int) -> list[RevisionRecord]:
    """Contrast records for every supported sentence, in reference order.

    Per sentence, the RNG draw order is fixed: other-reference pick, then
    negative-candidate pick. Both derive from (seed, example, sentence), so
    output is independent of scheduling.
    """
    records: list[RevisionRecord] = []
    for ref in example.reference:
        label = labels[ref.sent_id]
        if not label.supported:
            continue
        alignment = alignments[ref.sent_id]
        candidates = corruptions.get(ref.sent_id) or []
        if len(candidates) < 2:
            raise ValidationError(
                "need >= 2 corruption candidates to form a negative",
                example_id=example.example_id, sent_id=ref.sent_id)
        ctx_matrix = context_matrix(example, alignment, embedder)
        if ctx_matrix is None:
            raise ValidationError("supported sentence has an empty aligned context",
                                  example_id=example.example_id, sent_id=ref.sent_id)
        rng = derive_rng(seed, example.example_id, ref.sent_id, "contrast")
        u_idx = select_most_unsupported(candidates, ctx_matrix, embedder)
        worst = candidates[u_idx]

        others = [r for r in example.reference
                  if r.sent_id != ref.sent_id and r.sent_id in alignments]
        r_star: Sentence | None = None
        if others:
            r_star = others[int(rng.integers(len(others)))]

        records.append(_record(example, ref.sent_id, worst.sentence.text, alignment,
                               ref.tokens, ref.text, "positive", "redress_worst",
                               worst.tokens))
        if r_star is not None:
            records.append(_record(example, ref.sent_id, r_star.text, alignment,
                                   ref.tokens, ref.text, "positive",
                                   "random_other_ref", r_star.tokens))
        other_idx = [i for i in range(len(candidates)) if i != u_idx]
        n_idx = other_idx[int(rng.integers(len(other_idx)))]
        negative = candidates[n_idx]
        records.append(_record(example, ref.sent_id, worst.sentence.text, alignment,
                               negative.tokens, negative.sentence.text, "negative",
                               "redress_random_negative", worst.tokens))
        if r_star is not None:
            star_alignment = alignments[r_star.sent_id]
            records.append(_record(example, ref.sent_id, ref.text, star_alignment,
                                   ref.tokens, ref.text, "negative",
                                   "self_with_other_context", ref.tokens))
    return records


def build_inference_prompts(example: Example, labels: dict[str, SupportLabel],
                            alignments: dict[str, Alignment]) -> list[RevisionRecord]:
    """Ten prompts per unsupported sentence, sweeping source-copy bins 0-9."""
    records: list[RevisionRecord] = []
    for ref in example.reference:
        if labels[ref.sent_id].supported:
            continue
        alignment = alignments.get(ref.sent_id)
        if alignment is None:
            raise ValidationError("unsupported sentence lacks an alignment",
                                  example_id=example.example_id, sent_id=ref.sent_id)
        s_tokens = context_tokens(example, alignment)
        src_vocab = set(s_tokens)
        if ref.tokens:
            proxy = sum(1 for t in ref.tokens if t in src_vocab) / len(ref.tokens)
        else:
            proxy = 0.0
        ctx_text = context_text(example, alignment)
        for b in range(10):
            records.append(RevisionRecord(
                example_id=example.example_id, ref_sent_id=ref.sent_id,
                input_text=ref.text, context_sent_ids=tuple(alignment.aligned_src_ids),
                context_text=ctx_text, target_text=None, polarity=None,
                input_frac=proxy, source_frac=b / 10.0, provenance="inference"))
    return records
