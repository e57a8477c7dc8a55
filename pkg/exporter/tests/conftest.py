"""Fixtures: a tiny random-weight BERT checkpoint on disk and a small corpus.

The sandbox has no model-hub access, so the checkpoint is constructed
locally and loaded through the same from_pretrained path a hub name uses.
"""

import json

import pytest
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import BertNormalizer
from tokenizers.pre_tokenizers import BertPreTokenizer
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "patient", "admitted", "with", "cough", "and", "fever", "stable", "on",
    "oxygen", "overnight", "chest", "x", "-", "ray", "showed", "clear",
    "lungs", "blood", "cultures", "drawn", "arrival", "the", ".", ",",
    "pneu", "##mon", "##ia", "improving", "care",
]


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny-bert")
    vocab = {w: i for i, w in enumerate(VOCAB)}
    wp = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    wp.normalizer = BertNormalizer(lowercase=True)
    wp.pre_tokenizer = BertPreTokenizer()
    wp.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])])
    PreTrainedTokenizerFast(tokenizer_object=wp, unk_token="[UNK]",
                            pad_token="[PAD]", cls_token="[CLS]",
                            sep_token="[SEP]",
                            mask_token="[MASK]").save_pretrained(path)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=32,
                        num_hidden_layers=4, num_attention_heads=4,
                        intermediate_size=64, max_position_embeddings=64)
    torch.manual_seed(0)
    BertModel(config).save_pretrained(path)
    return path


def _sentence(sent_id, text, tokens):
    return {"sent_id": sent_id, "text": text, "tokens": tokens, "entities": []}


CORPUS_EXAMPLE = {
    "example_id": "ex1",
    "source_notes": [
        {"note_id": "n1", "note_type": "Admission", "order_index": 0,
         "sentences": [
             _sentence("s1", "Patient admitted with cough and fever.",
                       ["patient", "admitted", "with", "cough", "and", "fever"]),
             _sentence("s2", "Chest x-ray showed pneumonia.",
                       ["chest", "x-ray", "showed", "pneumonia"]),
         ]},
        {"note_id": "n2", "note_type": "Progress", "order_index": 1,
         "sentences": [
             _sentence("s3", "Blood cultures drawn on arrival.",
                       ["blood", "cultures", "drawn", "on", "arrival"]),
             _sentence("s4", "Stable on oxygen overnight.",
                       ["stable", "on", "oxygen", "overnight"]),
         ]},
    ],
    "reference": [
        _sentence("r1", "Cough improving with care.",
                  ["cough", "improving", "with", "care"]),
    ],
}


@pytest.fixture()
def corpus_example():
    return json.loads(json.dumps(CORPUS_EXAMPLE))


@pytest.fixture()
def corpus_path(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(json.dumps(CORPUS_EXAMPLE) + "\n", encoding="utf-8")
    return path
