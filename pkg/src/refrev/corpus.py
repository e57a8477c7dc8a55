"""Corpus data model, JSONL serialization, and the naive lexicon tagger.

One JSONL line per example. All downstream stages consume these types and
never re-tokenize: the ``tokens`` field is authoritative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator

from .errors import ParseError, ValidationError

ENTITY_TYPES = ("diagnosis", "medication", "procedure", "treatment", "test")
# Types for which ontology codes may legitimately be absent.
CODELESS_TYPES = frozenset({"procedure", "treatment", "test"})

_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"


def tokenize(text: str) -> list[str]:
    """Whitespace split, strip leading/trailing ASCII punctuation, lowercase.

    Tokens that are punctuation-only are dropped.
    """
    out = []
    for raw in text.split():
        tok = raw.strip(_PUNCT).lower()
        if tok:
            out.append(tok)
    return out


@dataclass(frozen=True)
class EntityMention:
    """A typed entity span inside one sentence; the unit of hallucination accounting."""

    mention_id: str
    etype: str
    text: str
    token_span: tuple[int, int]  # half-open [start, end)
    codes: frozenset[str] = frozenset()

    @property
    def start(self) -> int:
        return self.token_span[0]

    @property
    def end(self) -> int:
        return self.token_span[1]


@dataclass(frozen=True)
class Sentence:
    sent_id: str
    text: str
    tokens: tuple[str, ...]
    entities: tuple[EntityMention, ...] = ()

    def span_tokens(self, mention: EntityMention) -> tuple[str, ...]:
        return self.tokens[mention.start:mention.end]


@dataclass(frozen=True)
class SourceNote:
    note_id: str
    note_type: str
    order_index: int
    sentences: tuple[Sentence, ...] = ()


@dataclass(frozen=True)
class Example:
    example_id: str
    source_notes: tuple[SourceNote, ...] = ()
    reference: tuple[Sentence, ...] = ()

    def source_sentences(self) -> list[Sentence]:
        return [s for note in self.source_notes for s in note.sentences]

    def all_sentences(self) -> list[Sentence]:
        return self.source_sentences() + list(self.reference)


@dataclass(frozen=True)
class Lexicon:
    """Surface phrase -> (etype, codes), all phrases lowercased."""

    entries: dict[str, tuple[str, frozenset[str]]] = field(default_factory=dict)

    def __post_init__(self):
        for phrase, (etype, _) in self.entries.items():
            if not phrase or phrase != phrase.lower():
                raise ValidationError("lexicon phrase must be non-empty and lowercased",
                                      field=f"entries[{phrase!r}]")
            if etype not in ENTITY_TYPES:
                raise ValidationError(f"unknown entity type {etype!r}",
                                      field=f"entries[{phrase!r}]")


def scoped_key(example_id: str, sent_id: str) -> str:
    """The 'example_id/sent_id' key used by embedding stores and indexes."""
    return f"{example_id}/{sent_id}"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_sentence(sentence: Sentence, example_id: str | None = None) -> None:
    sid = sentence.sent_id
    if sentence.entities and not sentence.tokens:
        raise ValidationError("sentence carrying entities has no tokens",
                              field="tokens", example_id=example_id, sent_id=sid)
    seen_ids = set()
    occupied: list[tuple[int, int, str]] = []
    for m in sentence.entities:
        start, end = m.token_span
        if m.etype not in ENTITY_TYPES:
            raise ValidationError(f"unknown entity type {m.etype!r}",
                                  field=f"entities[{m.mention_id}].etype",
                                  example_id=example_id, sent_id=sid)
        if not (0 <= start < end <= len(sentence.tokens)):
            raise ValidationError(f"token_span [{start},{end}) outside sentence bounds "
                                  f"(len={len(sentence.tokens)})",
                                  field=f"entities[{m.mention_id}].token_span",
                                  example_id=example_id, sent_id=sid)
        if not m.codes and m.etype not in CODELESS_TYPES:
            raise ValidationError(f"etype {m.etype!r} requires at least one ontology code",
                                  field=f"entities[{m.mention_id}].codes",
                                  example_id=example_id, sent_id=sid)
        if m.mention_id in seen_ids:
            raise ValidationError(f"duplicate mention_id {m.mention_id!r}",
                                  field="entities", example_id=example_id, sent_id=sid)
        seen_ids.add(m.mention_id)
        for (os_, oe, oid) in occupied:
            if start < oe and os_ < end:
                raise ValidationError(
                    f"overlapping entity spans: {oid!r} [{os_},{oe}) and "
                    f"{m.mention_id!r} [{start},{end})",
                    field="entities", example_id=example_id, sent_id=sid)
        occupied.append((start, end, m.mention_id))


def validate_example(example: Example) -> None:
    eid = example.example_id
    if not eid:
        raise ValidationError("empty example_id", field="example_id")
    prev_order = None
    for note in example.source_notes:
        if note.order_index < 0:
            raise ValidationError(f"order_index {note.order_index} < 0",
                                  field=f"source_notes[{note.note_id}].order_index",
                                  example_id=eid)
        if prev_order is not None and note.order_index <= prev_order:
            raise ValidationError("order_index not strictly increasing",
                                  field=f"source_notes[{note.note_id}].order_index",
                                  example_id=eid)
        prev_order = note.order_index
    seen = set()
    for sentence in example.all_sentences():
        if sentence.sent_id in seen:
            raise ValidationError(f"duplicate sent_id {sentence.sent_id!r}",
                                  field="sent_id", example_id=eid,
                                  sent_id=sentence.sent_id)
        seen.add(sentence.sent_id)
        validate_sentence(sentence, example_id=eid)


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------

def _mention_to_dict(m: EntityMention) -> dict:
    return {"mention_id": m.mention_id, "etype": m.etype, "text": m.text,
            "token_span": [m.start, m.end], "codes": sorted(m.codes)}


def _sentence_to_dict(s: Sentence) -> dict:
    return {"sent_id": s.sent_id, "text": s.text, "tokens": list(s.tokens),
            "entities": [_mention_to_dict(m) for m in s.entities]}


def example_to_dict(example: Example) -> dict:
    return {
        "example_id": example.example_id,
        "source_notes": [
            {"note_id": n.note_id, "note_type": n.note_type,
             "order_index": n.order_index,
             "sentences": [_sentence_to_dict(s) for s in n.sentences]}
            for n in example.source_notes
        ],
        "reference": [_sentence_to_dict(s) for s in example.reference],
    }


def _mention_from_dict(d: dict) -> EntityMention:
    span = d["token_span"]
    return EntityMention(mention_id=d["mention_id"], etype=d["etype"], text=d["text"],
                         token_span=(int(span[0]), int(span[1])),
                         codes=frozenset(d.get("codes") or ()))


def _sentence_from_dict(d: dict) -> Sentence:
    return Sentence(sent_id=d["sent_id"], text=d["text"], tokens=tuple(d["tokens"]),
                    entities=tuple(_mention_from_dict(m) for m in d.get("entities") or ()))


sentence_to_dict = _sentence_to_dict
sentence_from_dict = _sentence_from_dict


def example_from_dict(d: dict) -> Example:
    example = Example(
        example_id=d["example_id"],
        source_notes=tuple(
            SourceNote(note_id=n["note_id"], note_type=n["note_type"],
                       order_index=int(n["order_index"]),
                       sentences=tuple(_sentence_from_dict(s) for s in n.get("sentences") or ()))
            for n in d.get("source_notes") or ()
        ),
        reference=tuple(_sentence_from_dict(s) for s in d.get("reference") or ()),
    )
    validate_example(example)
    return example


def serialize_example(example: Example) -> str:
    return json.dumps(example_to_dict(example), ensure_ascii=False, separators=(",", ":"))


def parse_corpus(stream: IO[bytes] | IO[str] | Iterable[str]) -> list[Example]:
    """Read a JSONL corpus, validating every invariant. Order preserved."""
    examples = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc.msg}", line=lineno) from exc
        if not isinstance(obj, dict):
            raise ParseError("corpus line is not a JSON object", line=lineno)
        try:
            examples.append(example_from_dict(obj))
        except KeyError as exc:
            raise ValidationError(f"missing required key {exc.args[0]!r}",
                                  example_id=obj.get("example_id")) from exc
    return examples


def serialize_corpus(examples: Iterable[Example]) -> str:
    return "".join(serialize_example(e) + "\n" for e in examples)


def load_corpus(path) -> list[Example]:
    with open(path, "rb") as fh:
        return parse_corpus(fh)


def write_corpus(examples: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_corpus(examples))


# ---------------------------------------------------------------------------
# Lexicon tagging
# ---------------------------------------------------------------------------

def load_lexicon(path) -> Lexicon:
    """Lexicon JSON: {"phrase": {"etype": ..., "codes": [...]}, ...}."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    entries = {phrase: (spec["etype"], frozenset(spec.get("codes") or ()))
               for phrase, spec in raw.items()}
    return Lexicon(entries=entries)


def tag_entities(sentence: Sentence, lexicon: Lexicon) -> Sentence:
    """Longest-match, left-to-right, case-insensitive phrase tagging over tokens."""
    if sentence.entities:
        raise ValidationError("tag_entities requires an untagged sentence",
                              field="entities", sent_id=sentence.sent_id)
    if not lexicon.entries:
        return sentence
    phrases = {tuple(tokenize(p)): (p, spec) for p, spec in lexicon.entries.items()}
    max_len = max((len(k) for k in phrases), default=0)
    tokens = tuple(t.lower() for t in sentence.tokens)
    mentions = []
    i = 0
    while i < len(tokens):
        for length in range(min(max_len, len(tokens) - i), 0, -1):
            window = tokens[i:i + length]
            hit = phrases.get(window)
            if hit is not None:
                _, (etype, codes) = hit
                mentions.append(EntityMention(
                    mention_id=f"{sentence.sent_id}-m{len(mentions)}",
                    etype=etype,
                    text=" ".join(sentence.tokens[i:i + length]),
                    token_span=(i, i + length),
                    codes=codes,
                ))
                i += length
                break
        else:
            i += 1
    if not mentions:
        return sentence
    return replace(sentence, entities=tuple(mentions))


def strip_entities(sentence: Sentence) -> Sentence:
    return replace(sentence, entities=())


def sentence_from_text(sent_id: str, text: str) -> Sentence:
    return Sentence(sent_id=sent_id, text=text, tokens=tuple(tokenize(text)))


def iter_sentences_scoped(example: Example) -> Iterator[tuple[str, Sentence]]:
    """Yield (scoped key, sentence) for every source and reference sentence."""
    for s in example.source_sentences():
        yield scoped_key(example.example_id, s.sent_id), s
    for s in example.reference:
        yield scoped_key(example.example_id, s.sent_id), s
