"""Export contextual token embeddings into the REFREVE1 binary store.

Reads a corpus in the pipeline's JSONL schema, runs every sentence through a
transformer encoder, pools hidden layers (mean of the last four by default),
pools subword vectors onto the corpus token grid by character-offset overlap,
and writes one float32 record per sentence keyed ``example_id/sent_id``.

The corpus schema and the binary layout are the only coupling to the
consuming pipeline; this package does not import it.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

MAGIC = b"REFREVE1"
_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"
_LAYERS_RE = re.compile(r"^last(\d*)$")


class ExportError(RuntimeError):
    pass


@dataclass
class ExportJob:
    corpus: Path
    model: str
    out: Path
    layers: str = "last4"
    batch_size: int = 8
    max_length: int = 512
    device: str = "cpu"

    def layer_count(self) -> int:
        m = _LAYERS_RE.match(self.layers.strip().lower())
        if not m:
            raise ExportError(f"unsupported layer spec {self.layers!r}; use lastN")
        return int(m.group(1) or "1")


@dataclass
class SentenceRecord:
    key: str
    sent_id: str
    text: str
    tokens: list[str]


def read_corpus_sentences(path: Path) -> list[SentenceRecord]:
    """All source and reference sentences, keyed example_id/sent_id."""
    out: list[SentenceRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            eid = obj["example_id"]
            sentences = [s for n in obj.get("source_notes") or ()
                         for s in n.get("sentences") or ()]
            sentences += list(obj.get("reference") or ())
            for s in sentences:
                out.append(SentenceRecord(key=f"{eid}/{s['sent_id']}",
                                          sent_id=s["sent_id"], text=s["text"],
                                          tokens=list(s["tokens"])))
    return out


def token_char_spans(record: SentenceRecord) -> list[tuple[int, int]]:
    """Character span of each corpus token inside the sentence text.

    Corpus tokens come from whitespace splitting with ASCII punctuation
    stripped from the edges; the span excludes the stripped characters.
    Raises when the text does not reproduce the stored tokens.
    """
    spans = []
    pos = 0
    text = record.text
    for chunk in text.split():
        start = text.index(chunk, pos)
        pos = start + len(chunk)
        stripped = chunk.strip(_PUNCT)
        if not stripped:
            continue
        lead = len(chunk) - len(chunk.lstrip(_PUNCT))
        trail = len(chunk) - len(chunk.rstrip(_PUNCT))
        spans.append((start + lead, start + len(chunk) - trail))
    if len(spans) != len(record.tokens):
        raise ExportError(
            f"sentence {record.key}: text yields {len(spans)} tokens but the "
            f"corpus stores {len(record.tokens)}")
    for i, ((lo, hi), tok) in enumerate(zip(spans, record.tokens)):
        if text[lo:hi].lower() != tok:
            raise ExportError(
                f"sentence {record.key}: token {i} mismatch: text has "
                f"{text[lo:hi]!r}, corpus stores {tok!r}")
    return spans


def pool_subwords(hidden: np.ndarray, offsets: list[tuple[int, int]],
                  spans: list[tuple[int, int]], key: str) -> np.ndarray:
    """Mean-pool subword vectors per corpus token by char-offset overlap."""
    out = np.zeros((len(spans), hidden.shape[1]), dtype=np.float32)
    for i, (lo, hi) in enumerate(spans):
        rows = [j for j, (a, b) in enumerate(offsets)
                if b > a and a < hi and lo < b]
        if not rows:
            raise ExportError(
                f"sentence {key}: token {i} [{lo},{hi}) has no overlapping "
                "subword (tokenizer/corpus misalignment)")
        out[i] = hidden[rows].mean(axis=0)
    return out


def _batched(items: list, size: int) -> Iterator[list]:
    for i in range(0, len(items), size):
        yield items[i:i + size]


def export(job: ExportJob) -> dict:
    """Run the export; returns a small summary dict."""
    sentences = read_corpus_sentences(job.corpus)
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    if not tokenizer.is_fast:
        raise ExportError("a fast tokenizer (offset mapping support) is required")
    model = AutoModel.from_pretrained(job.model)
    model.eval()
    model.to(job.device)
    n_layers = job.layer_count()
    dim = model.config.hidden_size

    job.out.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with open(job.out, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", dim))
        with torch.no_grad():
            for batch in _batched(sentences, job.batch_size):
                enc = tokenizer([r.text for r in batch], return_tensors="pt",
                                padding=True, truncation=True,
                                max_length=job.max_length,
                                return_offsets_mapping=True)
                offsets = enc.pop("offset_mapping")
                enc = {k: v.to(job.device) for k, v in enc.items()}
                output = model(**enc, output_hidden_states=True)
                stack = torch.stack(output.hidden_states[-n_layers:])
                pooled_layers = stack.mean(dim=0)  # (batch, seq, dim)
                for b, record in enumerate(batch):
                    seq_len = int(enc["attention_mask"][b].sum())
                    hidden = pooled_layers[b, :seq_len].cpu().numpy()
                    offs = [tuple(map(int, o)) for o in offsets[b][:seq_len]]
                    spans = token_char_spans(record)
                    matrix = pool_subwords(hidden, offs, spans, record.key)
                    raw = record.key.encode("utf-8")
                    fh.write(struct.pack("<I", len(raw)))
                    fh.write(raw)
                    fh.write(struct.pack("<I", matrix.shape[0]))
                    fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
                    written += 1
    return {"sentences": written, "dim": dim, "layers": n_layers,
            "out": str(job.out)}
