"""Regenerate the committed toy pipeline fixtures and golden outputs.

The dataset is engineered so the built-in trigram backend separates
hallucinated from faithful tokens by a wide margin at delta=2.0: faithful
tokens carry a recorded logprob at the clamp floor (ratio well below the
threshold), hallucinated tokens carry a near-zero recorded logprob (ratio
in the hundreds). Gold spans are the engineered hallucinated token runs.

Usage: python scripts/make_toy_fixtures.py
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from ctxspan.cli import main as cli_main  # noqa: E402
from ctxspan.util import canonical_json  # noqa: E402

OUT_DIR = REPO / "tests" / "data" / "toy"

TOY_DELTA = 2.0
HALLUCINATED_LOGPROB = -0.02   # without-context: the model was confident
FAITHFUL_LOGPROB = -30.0       # without-context: clamps to the floor

DOCS = [
    ("en-doc-1", "en", "Blue Lake reaches a depth of 120 meters and lies inside an old volcanic crater in the national park."),
    ("en-doc-2", "en", "Blue Lake freezes over each winter and hosts a small ice festival on the southern shore every year."),
    ("de-doc-1", "de", "Der Grüne Fluss ist 480 Kilometer lang und mündet bei der alten Hafenstadt in die Nordsee."),
    ("de-doc-2", "de", "Die alte Steinbrücke wurde im Jahr 1821 erbaut und verbindet die beiden Ufer der Stadt."),
    ("fi-doc-1", "fi", "Punainen torni on 45 metriä korkea ja seisoo sataman vieressä vanhassa kaupungissa."),
    ("fi-doc-2", "fi", "Vanha kirjasto avattiin vuonna 1902 ja se sijaitsee kaupungin keskustassa torin laidalla."),
]

# (id, lang, question, output, hallucinated word indices)
RECORDS = [
    ("toy-en-1", "en", "How deep is Blue Lake?",
     "Blue Lake is 300 meters deep.", [3]),
    ("toy-en-2", "en", "When does Blue Lake freeze over?",
     "Blue Lake freezes over each winter.", []),
    ("toy-de-1", "de", "Wie lang ist der Grüne Fluss?",
     "Der Grüne Fluss ist 950 Kilometer lang.", [4]),
    ("toy-de-2", "de", "Wann wurde die alte Steinbrücke erbaut?",
     "Die alte Steinbrücke wurde im Jahr 1999 erbaut.", [6]),
    ("toy-fi-1", "fi", "Kuinka korkea Punainen torni on?",
     "Punainen torni on 90 metriä korkea.", [3]),
    ("toy-fi-2", "fi", "Milloin vanha kirjasto avattiin?",
     "Vanha kirjasto avattiin kesällä 2011.", [3, 4]),
]


def build_record(rec_id, lang, question, output, hallucinated):
    words = output.split()
    tokens = []
    pos = 0
    for i, word in enumerate(words):
        start = output.index(word, pos)
        pos = start + len(word)
        tokens.append({
            "text": word,
            "logprob": HALLUCINATED_LOGPROB if i in hallucinated else FAITHFUL_LOGPROB,
            "start": start,
            "end": start + len(word),
        })
    # gold spans: contiguous hallucinated word runs, first start to last end
    gold = []
    for i in sorted(hallucinated):
        if gold and i - 1 in hallucinated:
            gold[-1][1] = tokens[i]["end"]
        else:
            gold.append([tokens[i]["start"], tokens[i]["end"]])
    return {
        "id": rec_id,
        "lang": lang,
        "question": question,
        "model_id": "toy-fixture",
        "output_text": output,
        "tokens": tokens,
        "hard_labels": gold,
    }


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    corpus_path = OUT_DIR / "corpus.jsonl"
    dataset_path = OUT_DIR / "dataset.jsonl"
    corpus_path.write_text(
        "".join(
            canonical_json({"doc_id": d, "title": "", "text": t, "lang": l}) + "\n"
            for d, l, t in DOCS
        ),
        encoding="utf-8",
    )
    dataset_path.write_text(
        "".join(canonical_json(build_record(*spec)) + "\n" for spec in RECORDS),
        encoding="utf-8",
    )

    work = Path(tempfile.mkdtemp(prefix="toy-golden-"))
    store = work / "store"
    pred = work / "predictions.jsonl"
    report = work / "report.json"
    assert cli_main(["index", "--corpus", str(corpus_path), "--out", str(store)]) == 0
    assert cli_main([
        "detect", "--dataset", str(dataset_path), "--store", str(store),
        "--backend", "toy", "--delta", str(TOY_DELTA), "--out", str(pred),
    ]) == 0
    assert cli_main([
        "eval", "--pred", str(pred), "--gold", str(dataset_path), "--out", str(report),
    ]) == 0

    # diagnostics: how much headroom the engineered threshold has
    flagged_min, clean_max = float("inf"), float("-inf")
    for line in pred.read_text(encoding="utf-8").splitlines():
        rec = json.loads(line)
        gold = {tuple(pair) for pair in next(r for r in map(json.loads, dataset_path.read_text(encoding="utf-8").splitlines()) if r["id"] == rec["id"])["hard_labels"]}
        spans = {tuple(pair) for pair in rec["spans"]}
        assert spans == gold, (rec["id"], spans, gold)
        for value in rec["csr"]:
            if value >= TOY_DELTA:
                flagged_min = min(flagged_min, value)
            else:
                clean_max = max(clean_max, value)
    print(f"CSR margin: clean max {clean_max:.3f} < delta {TOY_DELTA} <= flagged min {flagged_min:.3f}")

    report_data = json.loads(report.read_text(encoding="utf-8"))
    print("report averages:", report_data["per_language"], report_data["average"])
    assert report_data["average"] >= 0.9

    shutil.copy(pred, OUT_DIR / "golden_predictions.jsonl")
    shutil.copy(report, OUT_DIR / "golden_report.json")
    shutil.rmtree(work)
    print("fixtures written to", OUT_DIR)


if __name__ == "__main__":
    main()
