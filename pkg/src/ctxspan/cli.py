"""Command-line entry point.

Commands: index, retrieve, detect, detect-diff, eval, sweep, normalize.
Usage problems exit 2; runtime failures exit 1 with a machine-readable error
record on stderr; record-scoped failures (alignment, bad data) are reported
the same way but skipped so batch runs keep going. Artifacts are written
atomically after a command fully succeeds and embed the config hash that
produced them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import bm25, corpus, dataset, detector, diffspans, evaluation, retrieval, scoring, toylm
from .errors import AlignmentError, DataError, PipelineError
from .util import FORMAT_VERSIONS, atomic_write_text, canonical_json, config_hash, read_jsonl

USAGE_EXIT = 2
RUNTIME_EXIT = 1

# Path-valued and execution-only flags never enter the config hash: artifact
# identity must not depend on input locations or worker counts.
_UNHASHED_ARGS = {
    "corpus", "out", "store", "dataset", "pred", "gold", "edited", "raw",
    "toy_train", "parallelism",
}


def _hashable_params(params: dict) -> dict:
    return {key: value for key, value in params.items() if key not in _UNHASHED_ARGS}


def _print_error(err: PipelineError) -> None:
    print(json.dumps({"error": err.as_record()}, ensure_ascii=False), file=sys.stderr)


def _require_paths(parser: argparse.ArgumentParser, paths: list[Path]) -> None:
    for path in paths:
        if not path.exists():
            parser.error(f"path does not exist: {path}")


def _dry_run(command: str, params: dict) -> int:
    run_config = {
        "command": command,
        "params": params,
        "config_hash": config_hash(_hashable_params(params)),
        "format_versions": FORMAT_VERSIONS,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    print(json.dumps(run_config, ensure_ascii=False, sort_keys=True, indent=2))
    return 0


def _make_embedder(args):
    if args.embedder == "hash":
        return retrieval.HashEmbedder(dim=args.embed_dim)
    endpoint = args.embed_url or os.environ.get("CTXSPAN_EMBED_URL", "")
    if not endpoint:
        raise DataError("embedder 'http' needs --embed-url or CTXSPAN_EMBED_URL")
    return retrieval.HttpEmbedClient(endpoint)


def _make_backend(args, records, store):
    if args.backend == "file":
        return scoring.RecordedBackend(records)
    if args.backend == "http":
        endpoint = args.score_url or os.environ.get("CTXSPAN_SCORE_URL", "")
        if not endpoint:
            raise DataError("backend 'http' needs --score-url or CTXSPAN_SCORE_URL")
        return scoring.HttpScoringBackend(endpoint)
    if args.toy_train:
        training_text = Path(args.toy_train).read_text(encoding="utf-8")
    else:
        # default training corpus: the store itself, in persisted order
        training_text = "\n".join(chunk.text for chunk in store)
    return scoring.ToyBackend(toylm.toy_lm_fit(training_text))


def _map_records(records, fn, parallelism: int):
    """Apply fn per record, preserving input order in the result list."""
    if parallelism <= 1:
        return [fn(rec) for rec in records]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, records))


def _add_retrieval_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--k", type=int, default=10, help="first-stage BM25 candidates")
    sub.add_argument("--m", type=int, default=5, help="final evidence chunks")
    sub.add_argument("--embedder", choices=["hash", "http"], default="hash")
    sub.add_argument("--embed-url", default="")
    sub.add_argument("--embed-dim", type=int, default=64)
    sub.add_argument("--query-prefix", default="query: ")
    sub.add_argument("--passage-prefix", default="passage: ")


def _add_backend_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--backend", choices=["file", "http", "toy"], default="toy")
    sub.add_argument("--score-url", default="")
    sub.add_argument("--toy-train", default="", help="training text file for the toy backend")
    sub.add_argument("--parallelism", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxspan")
    parser.add_argument("--dry-run", action="store_true", help="print the resolved run config and exit")
    commands = parser.add_subparsers(dest="command", required=True)

    p_index = commands.add_parser("index", help="chunk a corpus and build the BM25 index")
    p_index.add_argument("--corpus", required=True)
    p_index.add_argument("--out", required=True, help="store directory")
    p_index.add_argument("--window", type=int, default=100)
    p_index.add_argument("--stride", type=int, default=100)
    p_index.add_argument("--max-chars", type=int, default=2000)
    p_index.add_argument("--k1", type=float, default=1.2)
    p_index.add_argument("--b", type=float, default=0.75)

    p_retrieve = commands.add_parser("retrieve", help="fetch evidence chunks for one question")
    p_retrieve.add_argument("--store", required=True)
    p_retrieve.add_argument("--question", required=True)
    _add_retrieval_flags(p_retrieve)

    p_detect = commands.add_parser("detect", help="predict hallucinated spans for a dataset")
    p_detect.add_argument("--dataset", required=True)
    p_detect.add_argument("--store", required=True)
    p_detect.add_argument("--out", required=True)
    p_detect.add_argument("--delta", type=float, default=detector.DEFAULT_DELTA)
    p_detect.add_argument("--epsilon", type=float, default=detector.DEFAULT_EPSILON)
    p_detect.add_argument("--no-merge-whitespace", action="store_true")
    _add_retrieval_flags(p_detect)
    _add_backend_flags(p_detect)

    p_diff = commands.add_parser("detect-diff", help="spans from recorded editor outputs")
    p_diff.add_argument("--dataset", required=True)
    p_diff.add_argument("--edited", required=True)
    p_diff.add_argument("--out", required=True)
    p_diff.add_argument("--merge-gap", type=int, default=1)

    p_eval = commands.add_parser("eval", help="score predictions against gold spans")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--out", default="", help="write the machine-readable report here")
    p_eval.add_argument("--label", default="csr")

    p_sweep = commands.add_parser("sweep", help="mean IoU over a threshold grid")
    p_sweep.add_argument("--dataset", required=True)
    p_sweep.add_argument("--store", required=True)
    p_sweep.add_argument("--out", default="")
    p_sweep.add_argument("--deltas", default="0.1,0.2,0.3,0.4")
    p_sweep.add_argument("--epsilon", type=float, default=detector.DEFAULT_EPSILON)
    p_sweep.add_argument("--no-merge-whitespace", action="store_true")
    _add_retrieval_flags(p_sweep)
    _add_backend_flags(p_sweep)

    p_norm = commands.add_parser("normalize", help="convert raw records to the canonical format")
    p_norm.add_argument("--raw", required=True)
    p_norm.add_argument("--out", required=True)

    return parser


def _retrieval_config(args) -> retrieval.RetrievalConfig:
    return retrieval.RetrievalConfig(
        first_stage_k=args.k,
        final_m=args.m,
        query_prefix=args.query_prefix,
        passage_prefix=args.passage_prefix,
        embed_endpoint=args.embed_url,
    )


def cmd_index(args, params) -> int:
    cfg = corpus.ChunkingConfig(
        target_window=args.window, stride=args.stride, max_chars=args.max_chars
    )
    docs = list(corpus.load_documents(args.corpus))
    store, stats = corpus.ingest_corpus(docs, cfg, args.out)
    index = bm25.build_index(store, bm25.Bm25Params(k1=args.k1, b=args.b))
    index.save(bm25.index_path(store))
    print(canonical_json({"docs": stats.docs, "chunks": stats.chunks, "config_hash": config_hash(_hashable_params(params))}))
    return 0


def cmd_retrieve(args, params) -> int:
    store = corpus.ChunkStore.open(args.store)
    index = bm25.Bm25Index.load(bm25.index_path(store))
    evidence = retrieval.retrieve(
        args.question, index, store, _retrieval_config(args), _make_embedder(args)
    )
    payload = {
        "question": args.question,
        "config_hash": config_hash(_hashable_params(params)),
        "chunks": [
            {"chunk_id": c.chunk_id, "doc_id": c.doc_id, "text": c.text} for c in evidence.chunks
        ],
        "provenance": evidence.provenance,
    }
    print(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2))
    return 0


def _detect_one(record, index, store, rcfg, dcfg, backend, embedder):
    evidence = retrieval.retrieve(record.question, index, store, rcfg, embedder)
    return detector.detect(record, evidence, backend, dcfg)


def cmd_detect(args, params) -> int:
    records = dataset.load_dataset(args.dataset)
    store = corpus.ChunkStore.open(args.store)
    index = bm25.Bm25Index.load(bm25.index_path(store))
    rcfg = _retrieval_config(args)
    dcfg = detector.DetectorConfig(
        delta=args.delta,
        epsilon=args.epsilon,
        merge_across_whitespace=not args.no_merge_whitespace,
    )
    backend = _make_backend(args, records, store)
    embedder = _make_embedder(args)
    run_hash = config_hash(_hashable_params(params))

    def run_one(record):
        try:
            return _detect_one(record, index, store, rcfg, dcfg, backend, embedder)
        except (AlignmentError, DataError) as exc:
            return exc

    lines = []
    for record, result in zip(records, _map_records(records, run_one, args.parallelism)):
        if isinstance(result, PipelineError):
            _print_error(result)
            continue
        lines.append(
            {
                "id": record.id,
                "lang": record.lang,
                "spans": result.spans.to_pairs(),
                "delta": dcfg.delta,
                "csr": list(result.csr.values),
                "text_len": len(record.output_text),
                "config_hash": run_hash,
                "provenance": result.provenance,
            }
        )
    atomic_write_text(args.out, "".join(canonical_json(line) + "\n" for line in lines))
    return 0


def cmd_detect_diff(args, params) -> int:
    records = dataset.load_dataset(args.dataset)
    edits = diffspans.read_recorded_edits(args.edited)
    run_hash = config_hash(_hashable_params(params))
    lines = []
    for record in records:
        if record.id not in edits:
            _print_error(DataError("no recorded edit for record", record_id=record.id))
            continue
        script = diffspans.align_texts(record.output_text, edits[record.id])
        spans = diffspans.extract_spans(script, len(record.output_text), args.merge_gap)
        lines.append(
            {
                "id": record.id,
                "lang": record.lang,
                "spans": spans.to_pairs(),
                "text_len": len(record.output_text),
                "merge_gap": args.merge_gap,
                "config_hash": run_hash,
            }
        )
    atomic_write_text(args.out, "".join(canonical_json(line) + "\n" for line in lines))
    return 0


def cmd_eval(args, params) -> int:
    gold = dataset.load_dataset(args.gold)
    predictions, meta = evaluation.load_predictions(args.pred)
    predictions = evaluation.predictions_against_gold(predictions, gold)
    config = {"config_hash": config_hash(_hashable_params(params)), "predictions": meta}
    report = evaluation.evaluate_dataset(predictions, gold, config=config, label=args.label)
    print(report.to_table())
    if args.out:
        atomic_write_text(args.out, evaluation.report_to_json(report))
    return 0


def cmd_sweep(args, params) -> int:
    records = dataset.load_dataset(args.dataset)
    store = corpus.ChunkStore.open(args.store)
    index = bm25.Bm25Index.load(bm25.index_path(store))
    rcfg = _retrieval_config(args)
    base_cfg = detector.DetectorConfig(
        epsilon=args.epsilon, merge_across_whitespace=not args.no_merge_whitespace
    )
    backend = _make_backend(args, records, store)
    embedder = _make_embedder(args)
    deltas = [float(part) for part in args.deltas.split(",") if part != ""]
    evidence_by_id = {
        rec.id: retrieval.retrieve(rec.question, index, store, rcfg, embedder) for rec in records
    }
    cells = evaluation.threshold_sweep(records, evidence_by_id, backend, deltas, base_cfg)
    csv_text = evaluation.sweep_to_csv(cells, config_hash(_hashable_params(params)))
    if args.out:
        atomic_write_text(args.out, csv_text)
    else:
        print(csv_text, end="")
    return 0


def cmd_normalize(args, params) -> int:
    lines = []
    for raw in read_jsonl(args.raw):
        try:
            lines.append(dataset.normalize_record(raw))
        except DataError as exc:
            _print_error(exc)
    atomic_write_text(args.out, "".join(canonical_json(line) + "\n" for line in lines))
    return 0


_COMMANDS = {
    "index": (cmd_index, ["corpus"]),
    "retrieve": (cmd_retrieve, ["store"]),
    "detect": (cmd_detect, ["dataset", "store"]),
    "detect-diff": (cmd_detect_diff, ["dataset", "edited"]),
    "eval": (cmd_eval, ["pred", "gold"]),
    "sweep": (cmd_sweep, ["dataset", "store"]),
    "normalize": (cmd_normalize, ["raw"]),
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, input_attrs = _COMMANDS[args.command]
    _require_paths(parser, [Path(getattr(args, attr)) for attr in input_attrs])

    params = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("command", "dry_run")
    }
    if args.dry_run:
        return _dry_run(args.command, params)
    try:
        return handler(args, params)
    except PipelineError as exc:
        _print_error(exc)
        return RUNTIME_EXIT
    except Exception as exc:  # keep batch callers scriptable
        print(
            json.dumps({"error": {"code": "internal", "message": str(exc)}}, ensure_ascii=False),
            file=sys.stderr,
        )
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
