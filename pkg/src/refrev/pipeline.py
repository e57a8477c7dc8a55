"""File-driven orchestration shared by the CLI subcommands.

Every stage is a pure function of (input files, config, seed): intermediate
randomness derives from stable ids, outputs are canonically ordered, and all
writes are atomic (temp file + rename), so reruns and worker counts never
change bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace as dc_replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .alignment import Alignment, align_example, context_matrix, context_tokens
from .config import PipelineConfig
from .contrast import RevisionRecord, build_contrast_sets, build_inference_prompts
from .corpus import (Example, Sentence, iter_sentences_scoped, load_corpus,
                     load_lexicon, scoped_key, sentence_from_dict, sentence_to_dict,
                     serialize_example, strip_entities, tag_entities)
from .corruption import (CorruptedSentence, CorruptionOptions, EntityFrequencyTable,
                         build_distractors, apply_plan, emit_redress, sample_plan,
                         swap_random, swap_related)
from .embeddings import Embedder, build_sentence_index, load_store, validate_store
from .errors import ValidationError
from .gate import (GateConfig, SupportLabel, classify_example, diagnostics,
                   filter_no_admission, filter_unsupported, halluc_ent_masks,
                   quality_bucket)
from .matching import MatcherContext, build_df_table
from .metrics import corpus_report, report_to_csv
from .rescore import Candidate, fragment_stats, fully_extractive_revise, rank_corrected, select_revision
from .seeding import derive_seed


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------

def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path: Path, rows: Iterable[dict]) -> int:
    lines = [dump_json(r) for r in rows]
    write_atomic(path, "".join(line + "\n" for line in lines))
    return len(lines)


def read_jsonl(path: Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _parallel(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving map over examples."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

class Env:
    """Loaded corpus plus the shared matcher/embedder machinery."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        if not config.corpus_path:
            raise ValidationError("no corpus path configured", field="paths.corpus")
        self.corpus = load_corpus(config.corpus_path)
        if config.embeddings_path:
            with open(config.embeddings_path, "rb") as fh:
                store = load_store(fh)
            validate_store(store, self.corpus)
            self.embedder = Embedder(store=store)
        else:
            self.embedder = Embedder(dim=config.embedding_dim)
        self.ctx = MatcherContext(self.embedder, build_df_table(self.corpus),
                                  config.match)
        self.by_id = {e.example_id: e for e in self.corpus}
        self.out_dir = Path(config.out_dir)

    def sentences_by_key(self) -> dict[str, Sentence]:
        return {key: s for ex in self.corpus for key, s in iter_sentences_scoped(ex)}


# ---------------------------------------------------------------------------
# Reload helpers for intermediate files
# ---------------------------------------------------------------------------

def load_alignments(path: Path) -> dict[str, dict[str, Alignment]]:
    out: dict[str, dict[str, Alignment]] = {}
    for row in read_jsonl(path):
        alignment = Alignment(
            ref_sent_id=row["ref_sent_id"],
            aligned_src_ids=list(row["aligned_src_ids"]),
            per_token_best=np.asarray(row["per_token_best"], dtype=np.float64),
            bs_precision=float(row["bs_precision"]),
            completion_ids=list(row["completion_ids"]))
        out.setdefault(row["example_id"], {})[row["ref_sent_id"]] = alignment
    return out


def load_labels(path: Path) -> dict[str, dict[str, SupportLabel]]:
    out: dict[str, dict[str, SupportLabel]] = {}
    for row in read_jsonl(path):
        label = SupportLabel(ref_sent_id=row["ref_sent_id"],
                             supported=bool(row["supported"]),
                             halluc_mentions=tuple(row["halluc_mentions"]),
                             bs_precision=float(row["bs_precision"]))
        out.setdefault(row["example_id"], {})[row["ref_sent_id"]] = label
    return out


def load_corruptions(path: Path) -> dict[str, dict[str, list[CorruptedSentence]]]:
    grouped: dict[str, dict[str, list[tuple[int, CorruptedSentence]]]] = {}
    for row in read_jsonl(path):
        sentence = sentence_from_dict(row["sentence"])
        cand = CorruptedSentence(
            sentence=sentence,
            origins=tuple((key, int(idx)) for key, idx in row["origins"]))
        grouped.setdefault(row["example_id"], {}).setdefault(
            row["ref_sent_id"], []).append((int(row["sample_index"]), cand))
    out: dict[str, dict[str, list[CorruptedSentence]]] = {}
    for eid, per_ref in grouped.items():
        out[eid] = {rid: [c for _, c in sorted(items, key=lambda t: t[0])]
                    for rid, items in per_ref.items()}
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def run_tag(config: PipelineConfig) -> dict:
    env = Env(config)
    if not config.lexicon_path:
        raise ValidationError("tag requires a lexicon path", field="paths.lexicon")
    lexicon = load_lexicon(config.lexicon_path)

    def tag_one(example: Example) -> Example:
        notes = tuple(
            dc_replace(note, sentences=tuple(
                tag_entities(s, lexicon) if not s.entities else s
                for s in note.sentences))
            for note in example.source_notes)
        reference = tuple(tag_entities(s, lexicon) if not s.entities else s
                          for s in example.reference)
        return dc_replace(example, source_notes=notes, reference=reference)

    tagged = _parallel(tag_one, env.corpus, config.workers)
    path = env.out_dir / "tagged.jsonl"
    write_atomic(path, "".join(serialize_example(e) + "\n" for e in tagged))
    mentions = sum(len(s.entities) for e in tagged for s in e.all_sentences())
    return {"subcommand": "tag", "examples": len(tagged), "mentions": mentions,
            "outputs": {"tagged": str(path)}}


def run_align(config: PipelineConfig) -> dict:
    env = Env(config)

    def align_one(example: Example) -> list[dict]:
        alignments = align_example(example, env.embedder, env.ctx, config.align)
        return [alignments[ref.sent_id].to_dict(example.example_id)
                for ref in example.reference]

    per_example = _parallel(align_one, env.corpus, config.workers)
    rows = [row for rows_ in per_example for row in rows_]
    rows.sort(key=lambda r: (r["example_id"], r["ref_sent_id"]))
    path = env.out_dir / "alignments.jsonl"
    count = write_jsonl(path, rows)
    return {"subcommand": "align", "rows": count, "outputs": {"alignments": str(path)}}


def run_classify(config: PipelineConfig) -> dict:
    env = Env(config)
    alignments = load_alignments(env.out_dir / "alignments.jsonl")

    def classify_one(example: Example) -> tuple[list[dict], list[dict]]:
        labels = classify_example(example, alignments[example.example_id],
                                  env.ctx, config.gate)
        masks = halluc_ent_masks(list(example.reference), labels)
        label_rows = [labels[r.sent_id].to_dict(example.example_id)
                      for r in example.reference]
        mask_rows = [{"example_id": example.example_id, "ref_sent_id": r.sent_id,
                      "mask": masks[r.sent_id]} for r in example.reference]
        return label_rows, mask_rows

    results = _parallel(classify_one, env.corpus, config.workers)
    label_rows = sorted((r for lr, _ in results for r in lr),
                        key=lambda r: (r["example_id"], r["ref_sent_id"]))
    mask_rows = sorted((r for _, mr in results for r in mr),
                       key=lambda r: (r["example_id"], r["ref_sent_id"]))
    labels_path = env.out_dir / "labels.jsonl"
    masks_path = env.out_dir / "masks.jsonl"
    write_jsonl(labels_path, label_rows)
    write_jsonl(masks_path, mask_rows)
    supported = sum(1 for r in label_rows if r["supported"])
    return {"subcommand": "classify", "sentences": len(label_rows),
            "supported": supported,
            "outputs": {"labels": str(labels_path), "masks": str(masks_path)}}


def run_filter(config: PipelineConfig, strategy: str) -> dict:
    env = Env(config)
    if strategy == "no_admission":
        kept = [e for e in env.corpus if filter_no_admission(e)]
    elif strategy == "unsupported":
        labels = load_labels(env.out_dir / "labels.jsonl")
        kept = [e for e in env.corpus
                if filter_unsupported(e, labels[e.example_id], config.gate)]
    elif strategy == "buckets":
        rows = [{"example_id": e.example_id,
                 "bucket": quality_bucket(e, config.gate)}
                for e in sorted(env.corpus, key=lambda e: e.example_id)]
        path = env.out_dir / "buckets.jsonl"
        write_jsonl(path, rows)
        return {"subcommand": "filter", "strategy": strategy, "rows": len(rows),
                "outputs": {"buckets": str(path)}}
    else:
        raise ValidationError(f"unknown filter strategy {strategy!r}")
    path = env.out_dir / "filtered.jsonl"
    write_atomic(path, "".join(serialize_example(e) + "\n" for e in kept))
    return {"subcommand": "filter", "strategy": strategy, "kept": len(kept),
            "dropped": len(env.corpus) - len(kept), "outputs": {"filtered": str(path)}}


def run_corrupt(config: PipelineConfig) -> dict:
    env = Env(config)
    labels = load_labels(env.out_dir / "labels.jsonl")
    sentences = env.sentences_by_key()
    index = build_sentence_index(env.corpus, env.embedder)
    cc = config.corrupt
    options = CorruptionOptions(m1=cc.m1, m2=cc.m2, deletion=cc.deletion,
                                shuffle=cc.shuffle)
    freq = EntityFrequencyTable.build(env.corpus) if cc.method == "swap_random" else None

    def corrupt_one(example: Example) -> tuple[list[dict], list[dict]]:
        eid = example.example_id
        cand_rows, redress_rows = [], []
        for ref in example.reference:
            if not labels[eid][ref.sent_id].supported:
                continue
            if cc.require_entities and not ref.entities:
                continue
            key = scoped_key(eid, ref.sent_id)
            distractors = None
            if cc.method in ("redress", "swap_related"):
                distractors = build_distractors(key, ref, index, sentences,
                                                env.embedder, env.ctx,
                                                cc.max_distractors)
            for i in range(cc.samples_per_sentence):
                if cc.method == "swap_random":
                    cand = swap_random(ref, key, freq,
                                       derive_seed(config.seed, eid, ref.sent_id, i))
                elif cc.method == "swap_related":
                    cand = swap_related(ref, key, distractors,
                                        derive_seed(config.seed, eid, ref.sent_id, i))
                else:
                    plan = sample_plan(ref, key, distractors,
                                       derive_seed(config.seed, eid, ref.sent_id, i,
                                                   "inference"), options)
                    cand = apply_plan(ref, plan)
                    redress_rows.append({
                        "example_id": eid, "ref_sent_id": ref.sent_id,
                        "sample_index": i,
                        **emit_redress(ref, distractors, plan, cand, "inference",
                                       env.ctx).to_dict()})
                    train_opts = CorruptionOptions(m1=False, m2=False,
                                                   deletion=cc.deletion,
                                                   shuffle=cc.shuffle)
                    train_plan = sample_plan(ref, key, distractors,
                                             derive_seed(config.seed, eid,
                                                         ref.sent_id, i, "train"),
                                             train_opts)
                    train_cand = apply_plan(ref, train_plan)
                    redress_rows.append({
                        "example_id": eid, "ref_sent_id": ref.sent_id,
                        "sample_index": i,
                        **emit_redress(ref, distractors, train_plan, train_cand,
                                       "train", env.ctx).to_dict()})
                cand_rows.append({
                    "example_id": eid, "ref_sent_id": ref.sent_id, "sample_index": i,
                    "sentence": sentence_to_dict(cand.sentence),
                    "origins": [[k, j] for k, j in cand.origins]})
        return cand_rows, redress_rows

    results = _parallel(corrupt_one, env.corpus, config.workers)
    cand_rows = sorted((r for cr, _ in results for r in cr),
                       key=lambda r: (r["example_id"], r["ref_sent_id"], r["sample_index"]))
    redress_rows = sorted((r for _, rr in results for r in rr),
                          key=lambda r: (r["example_id"], r["ref_sent_id"],
                                         r["sample_index"], r["mode"]))
    cand_path = env.out_dir / "corruptions.jsonl"
    write_jsonl(cand_path, cand_rows)
    outputs = {"corruptions": str(cand_path)}
    summary = {"subcommand": "corrupt", "method": cc.method,
               "candidates": len(cand_rows)}
    if cc.method == "redress":
        redress_path = env.out_dir / "redress.jsonl"
        write_jsonl(redress_path, redress_rows)
        outputs["redress"] = str(redress_path)
        summary["redress_records"] = len(redress_rows)
    summary["outputs"] = outputs
    return summary


def run_contrast(config: PipelineConfig) -> dict:
    env = Env(config)
    labels = load_labels(env.out_dir / "labels.jsonl")
    alignments = load_alignments(env.out_dir / "alignments.jsonl")
    corruptions = load_corruptions(env.out_dir / "corruptions.jsonl")

    def contrast_one(example: Example) -> list[dict]:
        eid = example.example_id
        records = build_contrast_sets(example, labels[eid], alignments[eid],
                                      corruptions.get(eid, {}), env.embedder,
                                      config.seed)
        return [r.to_dict() for r in records]

    results = _parallel(contrast_one, env.corpus, config.workers)
    rows = [r for rows_ in results for r in rows_]
    rows.sort(key=lambda r: (r["example_id"], r["ref_sent_id"]))
    path = env.out_dir / "contrast.jsonl"
    count = write_jsonl(path, rows)
    return {"subcommand": "build-contrast", "records": count,
            "outputs": {"contrast": str(path)}}


def run_prompts(config: PipelineConfig) -> dict:
    env = Env(config)
    labels = load_labels(env.out_dir / "labels.jsonl")
    alignments = load_alignments(env.out_dir / "alignments.jsonl")

    def prompts_one(example: Example) -> list[dict]:
        records = build_inference_prompts(example, labels[example.example_id],
                                          alignments[example.example_id])
        return [r.to_dict() for r in records]

    results = _parallel(prompts_one, env.corpus, config.workers)
    rows = [r for rows_ in results for r in rows_]
    rows.sort(key=lambda r: (r["example_id"], r["ref_sent_id"], r["source_frac_bin"]))
    path = env.out_dir / "prompts.jsonl"
    count = write_jsonl(path, rows)
    return {"subcommand": "prompts", "prompts": count, "outputs": {"prompts": str(path)}}


def run_rescore(config: PipelineConfig, candidates_path: Path | None = None) -> dict:
    env = Env(config)
    strategy = config.rescore.strategy
    out_rows = []
    if strategy == "fully_extractive":
        labels = load_labels(env.out_dir / "labels.jsonl")
        for example in sorted(env.corpus, key=lambda e: e.example_id):
            flat_ids = [s.sent_id for s in example.source_sentences()]
            for ref in example.reference:
                if labels[example.example_id][ref.sent_id].supported:
                    continue
                chosen = fully_extractive_revise(ref, example, env.embedder)
                out_rows.append({
                    "example_id": example.example_id, "ref_sent_id": ref.sent_id,
                    "chosen_index": flat_ids.index(chosen.sent_id),
                    "chosen_sent_id": chosen.sent_id,
                    "strategy": strategy, "scores": {}})
    else:
        path = candidates_path or (env.out_dir / "candidates.jsonl")
        alignments = load_alignments(env.out_dir / "alignments.jsonl")
        grouped: dict[tuple[str, str], list[dict]] = {}
        for row in read_jsonl(path):
            grouped.setdefault((row["example_id"], row["ref_sent_id"]), []).append(row)
        for (eid, rid), rows in sorted(grouped.items()):
            rows.sort(key=lambda r: r["candidate_index"])
            cands = []
            for r in rows:
                c = Candidate(text=r["text"], tokens=tuple(r["tokens"]),
                              source_frac_bin=int(r.get("source_frac_bin", 0)))
                if "entailment" in r and r["entailment"] is not None:
                    c.scores["entailment"] = float(r["entailment"])
                cands.append(c)
            example = env.by_id[eid]
            alignment = alignments[eid][rid]
            ctx_matrix = context_matrix(example, alignment, env.embedder)
            ctx_toks = context_tokens(example, alignment)
            if ctx_matrix is None:
                raise ValidationError("empty aligned context for rescoring",
                                      example_id=eid, sent_id=rid)
            if strategy == "rank_corrected":
                for c in cands:
                    coverage, density = fragment_stats(c.tokens, ctx_toks)
                    c.scores.setdefault("coverage", coverage)
                    c.scores.setdefault("density", density)
                chosen = rank_corrected(cands)
            else:
                chosen = select_revision(cands, ctx_matrix, ctx_toks,
                                         env.embedder, config.rescore)
            out_rows.append({
                "example_id": eid, "ref_sent_id": rid,
                "chosen_index": int(rows[chosen]["candidate_index"]),
                "strategy": strategy,
                "scores": {k: v for k, v in sorted(cands[chosen].scores.items())}})
    path = env.out_dir / "selections.jsonl"
    count = write_jsonl(path, out_rows)
    return {"subcommand": "rescore", "strategy": strategy, "selections": count,
            "outputs": {"selections": str(path)}}


def run_metrics(config: PipelineConfig, summaries_path: Path | None = None,
                entailment_path: Path | None = None,
                csv_path: Path | None = None) -> dict:
    env = Env(config)
    if summaries_path is not None:
        summaries = {}
        for row in read_jsonl(summaries_path):
            summaries[row["example_id"]] = [sentence_from_dict(s)
                                            for s in row["sentences"]]
    else:
        summaries = {e.example_id: list(e.reference) for e in env.corpus}
    entailment = None
    if entailment_path is not None:
        entailment = {}
        for row in read_jsonl(entailment_path):
            entailment.setdefault(row["example_id"], {})[row["sent_id"]] = \
                float(row["entailment"])
    report = corpus_report(env.corpus, summaries, env.embedder, env.ctx, entailment)
    path = env.out_dir / "metrics.json"
    write_atomic(path, json.dumps(report, ensure_ascii=False, indent=2,
                                  sort_keys=True) + "\n")
    outputs = {"metrics": str(path)}
    if csv_path is not None:
        write_atomic(Path(csv_path), report_to_csv(report))
        outputs["csv"] = str(csv_path)
    return {"subcommand": "metrics", "examples": len(report["per_example"]),
            "outputs": outputs}


def run_diagnostics(config: PipelineConfig) -> dict:
    env = Env(config)
    labels = load_labels(env.out_dir / "labels.jsonl")
    report = diagnostics(env.corpus, labels, config.gate)
    path = env.out_dir / "diagnostics.json"
    write_atomic(path, json.dumps(report, ensure_ascii=False, indent=2,
                                  sort_keys=True) + "\n")
    return {"subcommand": "diagnostics", "examples": report["example_count"],
            "outputs": {"diagnostics": str(path)}}


def run_all(config: PipelineConfig) -> dict:
    steps = [run_align(config), run_classify(config), run_corrupt(config),
             run_contrast(config), run_prompts(config)]
    outputs = {}
    for step in steps:
        outputs.update(step.get("outputs", {}))
    return {"subcommand": "all", "steps": [s["subcommand"] for s in steps],
            "outputs": outputs}
