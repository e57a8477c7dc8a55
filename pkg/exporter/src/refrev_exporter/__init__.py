"""refrev-exporter: transformer token embeddings -> REFREVE1 binary stores."""

__version__ = "0.1.0"

from .export import ExportError, ExportJob, export, read_corpus_sentences
