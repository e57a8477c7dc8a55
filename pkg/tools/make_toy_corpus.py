"""Regenerate the bundled toy corpus (data/toy/).

Three small clinical-flavored examples: references mix verbatim copies of
source sentences (supported) with sentences carrying fabricated entities
(unsupported), so every pipeline stage produces non-trivial output. Run from
the repository root:

    python tools/make_toy_corpus.py
"""

import json
from pathlib import Path

from refrev.corpus import (Example, Lexicon, SourceNote, sentence_from_text,
                           serialize_corpus, tag_entities, validate_example)

LEXICON = {
    "pneumonia": ("diagnosis", ["J18.9"]),
    "community acquired pneumonia": ("diagnosis", ["J18.9", "CAP1"]),
    "atrial fibrillation": ("diagnosis", ["I48.91"]),
    "hypertension": ("diagnosis", ["I10"]),
    "cough": ("diagnosis", ["R05"]),
    "hypoxia": ("diagnosis", ["R09.02"]),
    "sepsis": ("diagnosis", ["A41.9"]),
    "fever": ("diagnosis", ["R50.9"]),
    "meningioma": ("diagnosis", ["D32.9"]),
    "ceftriaxone": ("medication", ["RX2193"]),
    "azithromycin": ("medication", ["RX18631"]),
    "metoprolol": ("medication", ["RX6918"]),
    "warfarin": ("medication", ["RX11289"]),
    "vancomycin": ("medication", ["RX11124"]),
    "robitussin": ("medication", ["RX9001"]),
    "codeine": ("medication", ["RX2670"]),
    "chest x-ray": ("test", []),
    "blood cultures": ("test", []),
    "ecg": ("test", []),
    "lactate": ("test", []),
    "bipap": ("treatment", []),
    "supplemental oxygen": ("treatment", []),
    "iv fluids": ("treatment", []),
    "thoracentesis": ("procedure", []),
    "craniotomy": ("procedure", []),
}


def build():
    lexicon = Lexicon(entries={k: (etype, frozenset(codes))
                               for k, (etype, codes) in LEXICON.items()})

    def sent(sid, text):
        return tag_entities(sentence_from_text(sid, text), lexicon)

    ex1 = Example(
        example_id="ex1",
        source_notes=(
            SourceNote("ex1-n1", "Admission", 0, (
                sent("s1", "Patient admitted with cough and hypoxia."),
                sent("s2", "Chest x-ray showed community acquired pneumonia."),
                sent("s3", "Blood cultures were drawn on arrival."),
            )),
            SourceNote("ex1-n2", "Nursing", 1, (
                sent("s4", "Started on ceftriaxone and azithromycin for pneumonia."),
                sent("s5", "Patient placed on bipap overnight for worsening hypoxia."),
                sent("s6", "Cough improving with supportive care and rest."),
            )),
        ),
        reference=(
            sent("r1", "Patient admitted with cough and hypoxia."),
            sent("r2", "Chest x-ray showed community acquired pneumonia."),
            sent("r3", "He was given robitussin with codeine for the cough."),
        ),
    )

    ex2 = Example(
        example_id="ex2",
        source_notes=(
            SourceNote("ex2-n1", "Admission", 0, (
                sent("s1", "Admitted with rapid atrial fibrillation and hypertension."),
                sent("s2", "An ecg confirmed atrial fibrillation with rapid rate."),
                sent("s3", "Home metoprolol dose was increased on arrival."),
            )),
            SourceNote("ex2-n2", "Cardiology", 1, (
                sent("s4", "Started warfarin for stroke prevention after discussion."),
                sent("s5", "Rate control achieved on metoprolol by day two."),
            )),
        ),
        reference=(
            sent("r1", "Admitted with rapid atrial fibrillation and hypertension."),
            sent("r2", "Started warfarin for stroke prevention after discussion."),
            sent("r3", "She underwent craniotomy for a small meningioma."),
        ),
    )

    ex3 = Example(
        example_id="ex3",
        source_notes=(
            SourceNote("ex3-n1", "Nursing", 0, (
                sent("s1", "Febrile overnight with fever and rising lactate."),
                sent("s2", "Blood cultures sent and iv fluids started for sepsis."),
                sent("s3", "Vancomycin begun empirically pending culture results."),
            )),
            SourceNote("ex3-n2", "Progress", 1, (
                sent("s4", "Fever resolved after two days of vancomycin."),
                sent("s5", "Lactate normalized with iv fluids overnight."),
            )),
        ),
        reference=(
            sent("r1", "Blood cultures sent and iv fluids started for sepsis."),
            sent("r2", "Fever resolved after two days of vancomycin."),
            sent("r3", "A bedside thoracentesis drained the effusion."),
        ),
    )

    corpus = [ex1, ex2, ex3]
    for ex in corpus:
        validate_example(ex)
    return corpus


def main():
    root = Path(__file__).resolve().parents[1]
    out = root / "data" / "toy"
    out.mkdir(parents=True, exist_ok=True)
    (out / "corpus.jsonl").write_text(serialize_corpus(build()), encoding="utf-8")
    lex = {k: {"etype": etype, "codes": codes} for k, (etype, codes) in LEXICON.items()}
    (out / "lexicon.json").write_text(
        json.dumps(lex, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    config = """\
seed = 0
workers = 1

[paths]
corpus = "data/toy/corpus.jsonl"
lexicon = "data/toy/lexicon.json"
out_dir = "out/toy"

[embedding]
dim = 64
"""
    (out / "config.toml").write_text(config, encoding="utf-8")
    print(f"wrote {out}/corpus.jsonl, lexicon.json, config.toml")


if __name__ == "__main__":
    main()
