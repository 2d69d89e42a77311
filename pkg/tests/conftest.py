from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from ctxspan.corpus import ChunkingConfig, ingest_corpus, load_documents
from ctxspan.bm25 import Bm25Params, build_index, index_path
from ctxspan.dataset import AnnotatedResponse, Token
from ctxspan.spans import CharSpanSet

DATA_DIR = Path(__file__).parent / "data"


def word_record(
    rec_id: str,
    output: str,
    logprobs: list[float] | None = None,
    ctx_logprobs: list[float] | None = None,
    gold: list[tuple[int, int]] = (),
    lang: str = "en",
    question: str = "Q?",
) -> AnnotatedResponse:
    """Build a record whose tokens are the whitespace-delimited words of output."""
    words = output.split()
    starts = []
    pos = 0
    for word in words:
        start = output.index(word, pos)
        starts.append(start)
        pos = start + len(word)
    logprobs = logprobs if logprobs is not None else [-1.0] * len(words)
    ctx_logprobs = ctx_logprobs if ctx_logprobs is not None else [None] * len(words)
    tokens = tuple(
        Token(text=word, start=start, end=start + len(word), logprob=lp, logprob_ctx=clp)
        for word, start, lp, clp in zip(words, starts, logprobs, ctx_logprobs)
    )
    return AnnotatedResponse(
        id=rec_id,
        lang=lang,
        question=question,
        model_id="stub-model",
        output_text=output,
        tokens=tokens,
        gold_spans=CharSpanSet.from_intervals(gold, len(output)),
    )


class StubBackend:
    """Returns canned logprob lists, optionally keyed by record id."""

    def __init__(self, values, backend_id="stub"):
        self.values = values
        self.backend_id = backend_id

    def score(self, req):
        if isinstance(self.values, dict):
            return list(self.values[req.record_id])
        return list(self.values)


class StubEmbedder:
    """Maps exact input texts (after prefixing) to fixed vectors."""

    def __init__(self, vectors: dict[str, list[float]], default: list[float] | None = None):
        self.vectors = vectors
        self.default = default
        self.client_id = "stub-embed"

    def embed(self, texts):
        out = []
        for text in texts:
            if text in self.vectors:
                out.append(list(self.vectors[text]))
            elif self.default is not None:
                out.append(list(self.default))
            else:
                raise KeyError(text)
        return out


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        status, response = self.server.respond(payload)
        body = json.dumps(response).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@contextmanager
def serve_stub(respond):
    """Run a one-endpoint JSON POST server; respond(payload) -> (status, body)."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.respond = respond
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}/"
    finally:
        server.shutdown()
        thread.join(timeout=5)


@pytest.fixture(scope="session")
def wiki_store(tmp_path_factory):
    """Chunk store plus BM25 index over the five case-study passages."""
    store_dir = tmp_path_factory.mktemp("wiki") / "store"
    docs = list(load_documents(DATA_DIR / "wiki_chance.jsonl"))
    store, _ = ingest_corpus(docs, ChunkingConfig(target_window=150, stride=150), store_dir)
    index = build_index(store, Bm25Params())
    index.save(index_path(store))
    return store, index
