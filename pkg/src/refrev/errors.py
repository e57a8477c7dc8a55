"""Exception types shared across the toolkit.

Every error that names a corpus location carries the ids needed to find it
(example_id, sent_id, mention_id, line number, byte offset), so CLI error
messages can point at the offending record without re-parsing.
"""

from __future__ import annotations


class RefrevError(Exception):
    """Base class for all toolkit errors."""


class ParseError(RefrevError):
    """Malformed input that could not be decoded (JSON, binary framing)."""

    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"byte offset {offset}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.offset = offset


class ValidationError(RefrevError):
    """Structurally decodable input that violates a data-model invariant."""

    def __init__(self, message: str, *, field: str | None = None, example_id: str | None = None,
                 sent_id: str | None = None):
        ctx = []
        if example_id is not None:
            ctx.append(f"example_id={example_id}")
        if sent_id is not None:
            ctx.append(f"sent_id={sent_id}")
        if field is not None:
            ctx.append(f"field={field}")
        super().__init__(f"{message} [{', '.join(ctx)}]" if ctx else message)
        self.field = field
        self.example_id = example_id
        self.sent_id = sent_id


class FormatError(RefrevError):
    """Binary embedding file does not match the expected layout."""

    def __init__(self, message: str, *, offset: int | None = None):
        super().__init__(f"{message} (byte offset {offset})" if offset is not None else message)
        self.offset = offset


class MissingEmbeddingError(RefrevError):
    """A sentence required by a computation has no record in the store."""

    def __init__(self, sent_key: str):
        super().__init__(f"no embedding record for sentence {sent_key!r}")
        self.sent_key = sent_key
