"""Per-token vectors, pooled sentence vectors, and exact nearest-neighbor search.

Token matrices come from one of two sources: a binary store exported from a
real encoder, or the deterministic hashed fallback that lets the whole
pipeline (and every test) run with no model. Cosine of a zero vector with
anything is 0, so padded or unembeddable tokens never propagate NaNs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import Example, Sentence, iter_sentences_scoped, scoped_key
from .errors import FormatError, MissingEmbeddingError, ValidationError

MAGIC = b"REFREVE1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass
class EmbeddingStore:
    dim: int
    records: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, key: str) -> bool:
        return key in self.records

    def matrix(self, key: str) -> np.ndarray:
        try:
            return self.records[key]
        except KeyError:
            raise MissingEmbeddingError(key) from None


def load_store(stream) -> EmbeddingStore:
    """Parse the little-endian binary store format."""
    data = stream.read() if hasattr(stream, "read") else bytes(stream)
    if len(data) < 12 or data[:8] != MAGIC:
        raise FormatError(f"bad magic {data[:8]!r}, expected {MAGIC!r}", offset=0)
    (dim,) = struct.unpack_from("<I", data, 8)
    if dim == 0:
        raise FormatError("dim must be positive", offset=8)
    records: dict[str, np.ndarray] = {}
    pos = 12
    total = len(data)
    while pos < total:
        if pos + 4 > total:
            raise FormatError("truncated record header", offset=pos)
        (key_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + key_len + 4 > total:
            raise FormatError("truncated record key", offset=pos)
        key = data[pos:pos + key_len].decode("utf-8")
        pos += key_len
        (n_tokens,) = struct.unpack_from("<I", data, pos)
        pos += 4
        nbytes = n_tokens * dim * 4
        if pos + nbytes > total:
            raise FormatError(f"truncated matrix for {key!r}", offset=pos)
        mat = np.frombuffer(data, dtype="<f4", count=n_tokens * dim, offset=pos)
        records[key] = mat.reshape(n_tokens, dim).copy()
        pos += nbytes
    return EmbeddingStore(dim=dim, records=records)


def save_store(store: EmbeddingStore, stream) -> None:
    stream.write(MAGIC)
    stream.write(struct.pack("<I", store.dim))
    for key, mat in store.records.items():
        if mat.shape[1] != store.dim:
            raise FormatError(f"record {key!r} has dim {mat.shape[1]}, store dim {store.dim}")
        raw = key.encode("utf-8")
        stream.write(struct.pack("<I", len(raw)))
        stream.write(raw)
        stream.write(struct.pack("<I", mat.shape[0]))
        stream.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


def validate_store(store: EmbeddingStore, corpus: list[Example]) -> None:
    """Check every record's row count against its corpus sentence."""
    sentences = {key: s for ex in corpus for key, s in iter_sentences_scoped(ex)}
    for key, mat in store.records.items():
        sentence = sentences.get(key)
        if sentence is None:
            raise ValidationError("embedding record has no corpus sentence", sent_id=key)
        if mat.shape[0] != len(sentence.tokens):
            raise ValidationError(
                f"embedding rows ({mat.shape[0]}) != token count ({len(sentence.tokens)})",
                sent_id=key)


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def hashed_embed(tokens: list[str] | tuple[str, ...], dim: int) -> np.ndarray:
    """Deterministic character-3-gram feature hashing; rows L2-normalized.

    Pure function of (tokens, dim) on every platform: FNV-1a 64 over each
    '#'-padded 3-gram picks bucket (hash mod dim) and sign (bit 63).
    """
    if dim < 8:
        raise ValueError(f"dim must be >= 8, got {dim}")
    out = np.zeros((len(tokens), dim), dtype=np.float32)
    for i, token in enumerate(tokens):
        padded = f"#{token}#"
        if len(padded) < 3:
            continue
        row = out[i]
        for j in range(len(padded) - 2):
            h = _fnv1a64(padded[j:j + 3].encode("utf-8"))
            sign = -1.0 if (h >> 63) & 1 else 1.0
            row[h % dim] += sign
        norm = float(np.sqrt(np.dot(row.astype(np.float64), row.astype(np.float64))))
        if norm > 0.0:
            out[i] = (row.astype(np.float64) / norm).astype(np.float32)
    return out


def greedy_align_scores(ref_matrix: np.ndarray, src_matrix: np.ndarray) -> np.ndarray:
    """Element k: max cosine of reference row k against all source rows."""
    return kernels.max_cosine_per_row(ref_matrix, src_matrix)


def pool_sentence(matrix: np.ndarray) -> np.ndarray:
    """Mean of token rows, L2-normalized; an all-zero mean stays zero."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise ValueError("pool_sentence requires at least one row")
    mean = m.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    return mean / norm if norm > 0.0 else mean


@dataclass
class SentenceIndex:
    keys: list[str]
    vectors: np.ndarray  # (num_sentences, dim), rows L2-normalized (or zero)

    def __post_init__(self):
        if len(self.keys) != self.vectors.shape[0]:
            raise ValueError("keys/vectors length mismatch")


def knn(index: SentenceIndex, query: np.ndarray, k: int,
        exclude: frozenset[str] | set[str] = frozenset()) -> list[tuple[str, float]]:
    """Exact top-k by cosine, ties broken by ascending sent key."""
    if k <= 0 or not index.keys:
        return []
    q = np.asarray(query, dtype=np.float64)
    if q.shape[0] != index.vectors.shape[1]:
        raise ValueError(f"query dim {q.shape[0]} != index dim {index.vectors.shape[1]}")
    norm = float(np.linalg.norm(q))
    if norm > 0.0:
        q = q / norm
    scores = index.vectors @ q
    order = sorted(range(len(index.keys)),
                   key=lambda i: (-scores[i], index.keys[i]))
    out = []
    for i in order:
        if index.keys[i] in exclude:
            continue
        out.append((index.keys[i], float(scores[i])))
        if len(out) == k:
            break
    return out


class Embedder:
    """Resolves token matrices for corpus sentences and derived sentences.

    With a store, corpus sentences must be present (missing -> error) and
    corrupted/derived sentences are assembled by gathering origin rows.
    Without a store, everything is hashed at ``dim``.
    """

    def __init__(self, store: EmbeddingStore | None = None, dim: int | None = None):
        if store is None and dim is None:
            raise ValueError("need a store or an explicit dim")
        self.store = store
        self.dim = store.dim if store is not None else int(dim)
        self._hash_cache: dict[tuple[str, ...], np.ndarray] = {}

    def matrix(self, key: str, tokens: tuple[str, ...]) -> np.ndarray:
        if self.store is not None:
            return self.store.matrix(key)
        return self.embed_tokens(tokens)

    def embed_tokens(self, tokens: tuple[str, ...]) -> np.ndarray:
        tokens = tuple(tokens)
        cached = self._hash_cache.get(tokens)
        if cached is None:
            cached = hashed_embed(tokens, self.dim)
            self._hash_cache[tokens] = cached
        return cached

    def gather(self, origins: list[tuple[str, int]],
               tokens: tuple[str, ...]) -> np.ndarray:
        """Matrix for a derived sentence whose token i came from origins[i]."""
        if self.store is None:
            return self.embed_tokens(tokens)
        rows = np.zeros((len(origins), self.dim), dtype=np.float32)
        for i, (key, row_idx) in enumerate(origins):
            rows[i] = self.store.matrix(key)[row_idx]
        return rows

    def sentence_matrix(self, example_id: str, sentence: Sentence) -> np.ndarray:
        return self.matrix(scoped_key(example_id, sentence.sent_id), sentence.tokens)

    def resolve(self, tokens: tuple[str, ...], key: str | None = None,
                origins: list[tuple[str, int]] | None = None) -> np.ndarray:
        """Best-effort matrix for possibly-derived text: store record if the
        key is present, gathered origin rows if given, hashed otherwise."""
        if self.store is not None:
            if key is not None and key in self.store:
                return self.store.matrix(key)
            if origins is not None and len(origins) == len(tokens):
                return self.gather(origins, tokens)
        return self.embed_tokens(tokens)


def build_hashed_store(corpus: list[Example], dim: int) -> EmbeddingStore:
    records = {key: hashed_embed(s.tokens, dim)
               for ex in corpus for key, s in iter_sentences_scoped(ex)}
    return EmbeddingStore(dim=dim, records=records)


def build_sentence_index(corpus: list[Example], embedder: Embedder) -> SentenceIndex:
    """Pooled-vector index over every corpus sentence with at least one token."""
    keys, vecs = [], []
    for ex in corpus:
        for key, sentence in iter_sentences_scoped(ex):
            if not sentence.tokens:
                continue
            keys.append(key)
            vecs.append(pool_sentence(embedder.matrix(key, sentence.tokens)))
    if not keys:
        return SentenceIndex(keys=[], vectors=np.zeros((0, embedder.dim)))
    return SentenceIndex(keys=keys, vectors=np.vstack(vecs))
