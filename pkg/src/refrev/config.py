"""Pipeline configuration: one TOML file, every key overridable by a CLI flag.

The schema below is the single source of truth: it drives TOML parsing,
default construction, and auto-generated argparse options.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .alignment import AlignConfig
from .corruption import MAX_DISTRACTORS
from .errors import ValidationError
from .gate import GateConfig
from .matching import MatchConfig
from .rescore import RescoreConfig

# (section, key, type, default); section None means top-level.
SCHEMA: list[tuple[str | None, str, type, object]] = [
    (None, "seed", int, 0),
    (None, "workers", int, 1),
    ("paths", "corpus", str, ""),
    ("paths", "embeddings", str, ""),
    ("paths", "lexicon", str, ""),
    ("paths", "out_dir", str, "out"),
    ("embedding", "dim", int, 64),
    ("match", "code_threshold", float, 0.4),
    ("match", "embed_threshold", float, 0.75),
    ("match", "agg_threshold", float, 0.4),
    ("align", "max_extractions", int, 5),
    ("align", "avg_improve_min", float, 0.01),
    ("align", "max_improve_min", float, 0.05),
    ("gate", "support_bs_threshold", float, 0.75),
    ("gate", "filter_token_coverage", float, 0.75),
    ("gate", "filter_halluc_rate", float, 0.10),
    ("gate", "bucket_count", int, 10),
    ("corrupt", "samples_per_sentence", int, 5),
    ("corrupt", "m1", bool, True),
    ("corrupt", "m2", bool, True),
    ("corrupt", "deletion", bool, True),
    ("corrupt", "shuffle", bool, False),
    ("corrupt", "max_distractors", int, MAX_DISTRACTORS),
    ("corrupt", "require_entities", bool, False),
    ("corrupt", "method", str, "redress"),
    ("rescore", "density_penalty_weight", float, 0.25),
    ("rescore", "strategy", str, "less_abstractive"),
]


@dataclass
class CorruptConfig:
    samples_per_sentence: int = 5
    m1: bool = True
    m2: bool = True
    deletion: bool = True
    shuffle: bool = False
    max_distractors: int = MAX_DISTRACTORS
    require_entities: bool = False
    method: str = "redress"

    def __post_init__(self):
        if self.samples_per_sentence < 2:
            raise ValidationError("samples_per_sentence must be >= 2")
        if self.method not in ("redress", "swap_random", "swap_related"):
            raise ValidationError(f"unknown corruption method {self.method!r}")


@dataclass
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    corpus_path: str = ""
    embeddings_path: str = ""
    lexicon_path: str = ""
    out_dir: str = "out"
    embedding_dim: int = 64
    match: MatchConfig = field(default_factory=MatchConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    gate: GateConfig = field(default_factory=GateConfig)
    corrupt: CorruptConfig = field(default_factory=CorruptConfig)
    rescore: RescoreConfig = field(default_factory=RescoreConfig)

    @property
    def stopwords(self):
        return self.match.stopwords


def _flatten(raw: dict) -> dict[tuple[str | None, str], object]:
    flat = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                flat[(key, sub)] = v
        else:
            flat[(None, key)] = value
    return flat


def build_config(raw: dict | None = None,
                 overrides: dict[tuple[str | None, str], object] | None = None,
                 ) -> PipelineConfig:
    values: dict[tuple[str | None, str], object] = {
        (section, key): default for section, key, _typ, default in SCHEMA}
    for source in (_flatten(raw or {}), overrides or {}):
        for loc, value in source.items():
            if loc not in values:
                section, key = loc
                name = f"{section}.{key}" if section else key
                raise ValidationError(f"unknown config key {name!r}")
            values[loc] = value

    def get(section, key):
        return values[(section, key)]

    return PipelineConfig(
        seed=int(get(None, "seed")),
        workers=int(get(None, "workers")),
        corpus_path=str(get("paths", "corpus")),
        embeddings_path=str(get("paths", "embeddings")),
        lexicon_path=str(get("paths", "lexicon")),
        out_dir=str(get("paths", "out_dir")),
        embedding_dim=int(get("embedding", "dim")),
        match=MatchConfig(
            code_threshold=float(get("match", "code_threshold")),
            embed_threshold=float(get("match", "embed_threshold")),
            agg_threshold=float(get("match", "agg_threshold"))),
        align=AlignConfig(
            max_extractions=int(get("align", "max_extractions")),
            avg_improve_min=float(get("align", "avg_improve_min")),
            max_improve_min=float(get("align", "max_improve_min"))),
        gate=GateConfig(
            support_bs_threshold=float(get("gate", "support_bs_threshold")),
            filter_token_coverage=float(get("gate", "filter_token_coverage")),
            filter_halluc_rate=float(get("gate", "filter_halluc_rate")),
            bucket_count=int(get("gate", "bucket_count"))),
        corrupt=CorruptConfig(
            samples_per_sentence=int(get("corrupt", "samples_per_sentence")),
            m1=bool(get("corrupt", "m1")),
            m2=bool(get("corrupt", "m2")),
            deletion=bool(get("corrupt", "deletion")),
            shuffle=bool(get("corrupt", "shuffle")),
            max_distractors=int(get("corrupt", "max_distractors")),
            require_entities=bool(get("corrupt", "require_entities")),
            method=str(get("corrupt", "method"))),
        rescore=RescoreConfig(
            density_penalty_weight=float(get("rescore", "density_penalty_weight")),
            strategy=str(get("rescore", "strategy"))),
    )


def load_config(path: str | Path | None = None,
                overrides: dict[tuple[str | None, str], object] | None = None,
                ) -> PipelineConfig:
    raw = {}
    if path:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    return build_config(raw, overrides)
