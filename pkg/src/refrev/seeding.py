"""Deterministic per-unit RNG derivation.

Worker pools process examples in arbitrary order, so every sampled decision
must derive its generator from stable identifiers rather than from a shared
stream. blake2b (not Python's salted ``hash``) keeps seeds identical across
processes and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Map (global seed, ids...) to a stable 64-bit seed."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(*parts: object) -> np.random.Generator:
    """Generator seeded from stable identifiers; schedule-independent."""
    return np.random.default_rng(derive_seed(*parts))
