"""End-to-end walkthrough on the bundled five-passage corpus.

Builds a store over the evidence passages, retrieves for the example
question, and runs detection on a record with recorded token probabilities
(no external services needed).

Usage: python scripts/run_case_study.py
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from ctxspan.bm25 import Bm25Params, build_index  # noqa: E402
from ctxspan.corpus import ChunkingConfig, ingest_corpus, load_documents  # noqa: E402
from ctxspan.dataset import AnnotatedResponse, Token  # noqa: E402
from ctxspan.detector import DetectorConfig, detect  # noqa: E402
from ctxspan.evaluation import iou  # noqa: E402
from ctxspan.retrieval import HashEmbedder, RetrievalConfig, retrieve  # noqa: E402
from ctxspan.scoring import RecordedBackend  # noqa: E402
from ctxspan.spans import CharSpanSet  # noqa: E402


def example_record() -> AnnotatedResponse:
    output = "Chance the rapper debuted in 2011."
    words = [("Chance", 0), ("the", 7), ("rapper", 11), ("debuted", 18), ("in", 26),
             ("2011", 29), (".", 33)]
    # recorded probabilities: the tail phrase was confident without evidence
    # (logprob near 0) but surprises the evidence-conditioned model
    sensitive = {"rapper", "debuted", "in", "2011"}
    tokens = tuple(
        Token(text=w, start=s, end=s + len(w),
              logprob=-0.05 if w in sensitive else -8.0,
              logprob_ctx=-6.0 if w in sensitive else -0.8)
        for w, s in words
    )
    return AnnotatedResponse(
        id="case-1",
        lang="en",
        question="When did Chance the Rapper debut?",
        model_id="demo",
        output_text=output,
        tokens=tokens,
        gold_spans=CharSpanSet.from_intervals([[29, 33]], len(output)),
    )


def main():
    work = Path(tempfile.mkdtemp(prefix="case-study-"))
    docs = list(load_documents(REPO / "tests" / "data" / "wiki_chance.jsonl"))
    store, _ = ingest_corpus(docs, ChunkingConfig(target_window=150, stride=150), work / "store")
    index = build_index(store, Bm25Params())

    record = example_record()
    evidence = retrieve(record.question, index, store,
                        RetrievalConfig(first_stage_k=10, final_m=5), HashEmbedder())
    print("question:", record.question)
    print("evidence ranking:")
    for chunk in evidence.chunks:
        print("  ", chunk.chunk_id, "-", chunk.text[:70], "...")

    result = detect(record, evidence, RecordedBackend([record]), DetectorConfig(delta=0.3))
    print("\noutput:", record.output_text)
    for start, end in result.spans:
        print(f"flagged [{start}, {end}): {record.output_text[start:end]!r}")
    print("gold:", record.gold_spans.to_pairs())
    print("IoU vs gold:", round(iou(result.spans, record.gold_spans), 4))


if __name__ == "__main__":
    main()
