"""refrev: reference-revision data pipeline for noisy summarization corpora.

Aligns reference sentences to source evidence, classifies supportedness,
synthesizes controllable hallucinations, builds contrastive revision training
sets, re-scores over-generated revision candidates, and evaluates
faithfulness.
"""

__version__ = "0.1.0"

from .alignment import AlignConfig, Alignment, align_example, bertscore
from .contrast import RevisionRecord, build_contrast_sets, build_inference_prompts, decile
from .corpus import (Example, EntityMention, Lexicon, Sentence, SourceNote,
                     load_corpus, parse_corpus, serialize_corpus, tag_entities,
                     tokenize)
from .corruption import (CorruptionPlan, DistractorSet, RedressRecord, apply_plan,
                         build_distractors, diversity, emit_redress, sample_plan,
                         select_most_unsupported, swap_random, swap_related)
from .embeddings import (Embedder, EmbeddingStore, SentenceIndex, build_hashed_store,
                         greedy_align_scores, hashed_embed, knn, load_store,
                         pool_sentence, save_store)
from .gate import (GateConfig, SupportLabel, classify_sentence, diagnostics,
                   filter_no_admission, filter_unsupported, halluc_ent_masks,
                   quality_bucket)
from .matching import (DocFrequencyTable, MatchConfig, MatcherContext, MentionRef,
                       agg_overlap, code_overlap, tfidf_overlap)
from .metrics import compression, corpus_report, faithful_adjusted_recall, hallucination_rate
from .rescore import (Candidate, RescoreConfig, fragment_stats, fully_extractive_revise,
                      rank_corrected, select_revision)
