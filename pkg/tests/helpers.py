"""Shared builders: tiny sentences, hand-made embedding stores, and planted
corpora with ground-truth supportedness known by construction."""

from __future__ import annotations

import numpy as np

from refrev.corpus import (Example, EntityMention, Sentence, SourceNote,
                           sentence_from_text, tokenize)
from refrev.embeddings import Embedder, EmbeddingStore
from refrev.matching import MatchConfig, MatcherContext, MentionRef, build_df_table

TOY_CONFIG = "data/toy/config.toml"
TOY_CORPUS = "data/toy/corpus.jsonl"


def sent(sid: str, text: str, entities=()) -> Sentence:
    return Sentence(sent_id=sid, text=text, tokens=tuple(tokenize(text)),
                    entities=tuple(entities))


def mention(mid: str, etype: str, text: str, span: tuple[int, int],
            codes=()) -> EntityMention:
    return EntityMention(mention_id=mid, etype=etype, text=text,
                         token_span=span, codes=frozenset(codes))


def note(nid: str, ntype: str, order: int, sentences) -> SourceNote:
    return SourceNote(note_id=nid, note_type=ntype, order_index=order,
                      sentences=tuple(sentences))


def hashed_ctx(corpus: list[Example], dim: int = 32,
               config: MatchConfig | None = None) -> tuple[Embedder, MatcherContext]:
    embedder = Embedder(dim=dim)
    ctx = MatcherContext(embedder, build_df_table(corpus), config)
    return embedder, ctx


def store_ctx(records: dict[str, np.ndarray], dim: int,
              corpus: list[Example] | None = None,
              config: MatchConfig | None = None) -> tuple[Embedder, MatcherContext]:
    store = EmbeddingStore(dim=dim, records={k: np.asarray(v, dtype=np.float32)
                                             for k, v in records.items()})
    embedder = Embedder(store=store)
    ctx = MatcherContext(embedder, build_df_table(corpus or []), config)
    return embedder, ctx


def located(m: EntityMention, key: str, s: Sentence) -> MentionRef:
    return MentionRef(m, key, s)


def one_token_pair(codes_x, codes_y, vec_x, vec_y, tok_x="tokx", tok_y="toky",
                   etype="diagnosis", dft=None, config=None):
    """Two single-token mentions with fully controlled span vectors."""
    from refrev.matching import DocFrequencyTable
    dim = len(vec_x)
    sx = Sentence("sx", tok_x, (tok_x,),
                  (EntityMention("mx", etype, tok_x, (0, 1), frozenset(codes_x)),))
    sy = Sentence("sy", tok_y, (tok_y,),
                  (EntityMention("my", etype, tok_y, (0, 1), frozenset(codes_y)),))
    store = EmbeddingStore(dim=dim, records={
        "e/sx": np.asarray([vec_x], dtype=np.float32),
        "e/sy": np.asarray([vec_y], dtype=np.float32)})
    ctx = MatcherContext(Embedder(store=store),
                         dft or DocFrequencyTable(doc_count=1), config)
    return ctx, MentionRef(sx.entities[0], "e/sx", sx), MentionRef(sy.entities[0], "e/sy", sy)


# ---------------------------------------------------------------------------
# Planted corpora
# ---------------------------------------------------------------------------

_REAL_VOCAB = """
patient admitted stable overnight fever cough dyspnea fatigue nausea chest
lungs clear exam improved started continued monitor discharge morning evening
oxygen fluids culture pending results normal elevated mild severe acute
""".split()

_REAL_ENTITIES = [
    ("diagnosis", "pneumonia", ("J18",)),
    ("diagnosis", "bronchitis", ("J20",)),
    ("diagnosis", "cellulitis", ("L03",)),
    ("medication", "ceftriaxone", ("RX1",)),
    ("medication", "heparin", ("RX2",)),
    ("medication", "insulin", ("RX3",)),
    ("test", "radiograph", ()),
    ("test", "telemetry", ()),
    ("treatment", "nebulizer", ()),
]

# Alien tokens share no character 3-grams with the real vocabulary above.
_ALIEN_ENTITIES = [
    ("diagnosis", "zq8xkj", ("ZZ1",)),
    ("diagnosis", "wv7qzz", ("ZZ2",)),
    ("medication", "xj9qqw", ("ZZ3",)),
    ("medication", "qq6zzv", ("ZZ4",)),
    ("test", "kz5wwq", ()),
]
_ALIEN_FILLER = ["jjqz9", "zzxw7", "qwj88", "xzz66", "wwq55"]


def _entity_sentence(sid: str, rng: np.random.Generator, pool, filler,
                     n_tokens: int, n_entities: int) -> Sentence:
    tokens = [filler[int(rng.integers(len(filler)))] for _ in range(n_tokens)]
    entities = []
    slots = rng.choice(n_tokens, size=min(n_entities, n_tokens), replace=False)
    for i, slot in enumerate(sorted(int(s) for s in slots)):
        etype, text, codes = pool[int(rng.integers(len(pool)))]
        tokens[slot] = text
        entities.append(EntityMention(mention_id=f"{sid}-m{i}", etype=etype,
                                      text=text, token_span=(slot, slot + 1),
                                      codes=frozenset(codes)))
    return Sentence(sent_id=sid, text=" ".join(tokens), tokens=tuple(tokens),
                    entities=tuple(entities))


def planted_example(example_id: str, rng: np.random.Generator,
                    n_source: int = 4, n_supported: int = 2,
                    n_unsupported: int = 1) -> tuple[Example, dict[str, bool]]:
    """Example whose reference mixes verbatim source copies (supported) with
    alien-vocabulary fabrications (unsupported). Returns ground truth by
    reference sent_id."""
    source = [
        _entity_sentence(f"s{i}", rng, _REAL_ENTITIES, _REAL_VOCAB,
                         n_tokens=int(rng.integers(5, 9)),
                         n_entities=int(rng.integers(1, 3)))
        for i in range(n_source)
    ]
    half = max(1, n_source // 2)
    notes = (note(f"{example_id}-n0", "Admission", 0, source[:half]),
             note(f"{example_id}-n1", "Progress", 1, source[half:]))
    reference = []
    truth: dict[str, bool] = {}
    copies = rng.choice(n_source, size=min(n_supported, n_source), replace=False)
    for j, src_idx in enumerate(sorted(int(c) for c in copies)):
        copy = source[src_idx]
        rid = f"r{j}"
        reference.append(Sentence(
            sent_id=rid, text=copy.text, tokens=copy.tokens,
            entities=tuple(
                EntityMention(mention_id=f"{rid}-m{k}", etype=m.etype, text=m.text,
                              token_span=m.token_span, codes=m.codes)
                for k, m in enumerate(copy.entities))))
        truth[rid] = True
    for j in range(n_unsupported):
        rid = f"r{len(reference)}"
        fabricated = _entity_sentence(rid, rng, _ALIEN_ENTITIES, _ALIEN_FILLER,
                                      n_tokens=int(rng.integers(4, 7)),
                                      n_entities=int(rng.integers(1, 3)))
        reference.append(fabricated)
        truth[rid] = False
    return Example(example_id=example_id, source_notes=notes,
                   reference=tuple(reference)), truth


def planted_corpus(n_examples: int, seed: int = 7,
                   **kwargs) -> tuple[list[Example], dict[str, dict[str, bool]]]:
    rng = np.random.default_rng(seed)
    corpus, truth = [], {}
    for i in range(n_examples):
        example, ex_truth = planted_example(f"p{i:03d}", rng, **kwargs)
        corpus.append(example)
        truth[example.example_id] = ex_truth
    return corpus, truth
