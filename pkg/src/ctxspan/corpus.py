"""Document chunking and the on-disk chunk store.

Chunks are word windows addressed by character offsets into the source body,
so downstream span arithmetic stays exact for any whitespace-delimited
language. Offsets count unicode scalar values, never bytes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import NotFoundError, StoreError, ValidationError
from .util import FORMAT_VERSIONS, atomic_write_text, canonical_json, config_hash

_WORD_RE = re.compile(r"\S+")

MANIFEST_NAME = "manifest.json"
CHUNKS_NAME = "chunks.jsonl"


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    title: str
    body: str
    lang: str

    def __post_init__(self):
        if not self.doc_id:
            raise ValidationError("doc_id must be non-empty")
        if not self.body.strip():
            raise ValidationError(f"document {self.doc_id!r} has an empty body")


@dataclass(frozen=True)
class DocumentChunk:
    chunk_id: str
    doc_id: str
    text: str
    start: int
    end: int
    lang: str

    @property
    def char_range(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class ChunkingConfig:
    """Word-window chunking parameters (words = whitespace-delimited runs)."""

    target_window: int = 100
    stride: int = 100
    max_chars: int = 2000

    def __post_init__(self):
        if not (0 < self.stride <= self.target_window):
            raise ValidationError(
                f"stride must satisfy 0 < stride <= target_window, got "
                f"stride={self.stride} target_window={self.target_window}"
            )
        if self.max_chars < 1:
            raise ValidationError(f"max_chars must be >= 1, got {self.max_chars}")

    def as_dict(self) -> dict:
        return {
            "target_window": self.target_window,
            "stride": self.stride,
            "max_chars": self.max_chars,
        }


def _cap_window(words: list[tuple[int, int]], lo_word: int, hi_word: int,
                lo_char: int, hi_char: int, max_chars: int) -> list[tuple[int, int]]:
    """Split one window at word starts so each piece stays within max_chars.

    A piece always keeps at least one word, so a single word longer than the
    cap is emitted whole: boundaries never fall inside a word.
    """
    pieces: list[tuple[int, int]] = []
    piece_lo = lo_char
    piece_first = lo_word
    i = lo_word
    while i < hi_word:
        piece_hi = words[i + 1][0] if i + 1 < hi_word else hi_char
        if piece_hi - piece_lo > max_chars and i > piece_first:
            pieces.append((piece_lo, words[i][0]))
            piece_lo = words[i][0]
            piece_first = i
            continue
        i += 1
    pieces.append((piece_lo, hi_char))
    return pieces


def chunk_document(doc: RawDocument, cfg: ChunkingConfig) -> list[DocumentChunk]:
    """Split a document into word-window chunks with exact character ranges.

    With stride == target_window the chunk ranges tile the whole body, so
    concatenating chunk texts reconstructs it; with overlap, windows share
    words but each range still maps exactly onto the body.
    """
    words = [(m.start(), m.end()) for m in _WORD_RE.finditer(doc.body)]
    if not words:
        raise ValidationError(f"document {doc.doc_id!r} has an empty body")

    n = len(words)
    ranges: list[tuple[int, int]] = []
    start_word = 0
    while True:
        end_word = min(start_word + cfg.target_window, n)
        lo = 0 if start_word == 0 else words[start_word][0]
        hi = len(doc.body) if end_word == n else words[end_word][0]
        ranges.extend(_cap_window(words, start_word, end_word, lo, hi, cfg.max_chars))
        if end_word == n:
            break
        start_word += cfg.stride

    return [
        DocumentChunk(
            chunk_id=f"{doc.doc_id}#{i}",
            doc_id=doc.doc_id,
            text=doc.body[lo:hi],
            start=lo,
            end=hi,
            lang=doc.lang,
        )
        for i, (lo, hi) in enumerate(ranges)
    ]


@dataclass(frozen=True)
class IngestStats:
    docs: int
    chunks: int


class ChunkStore:
    """Persisted chunk collection: chunks.jsonl plus a manifest sidecar.

    Writes happen once at ingest; an open store is immutable and safe to
    read from multiple threads.
    """

    def __init__(self, path: Path, manifest: dict, chunks: list[DocumentChunk]):
        self.path = path
        self.manifest = manifest
        self._chunks = chunks
        self._by_id = {chunk.chunk_id: chunk for chunk in chunks}

    @classmethod
    def open(cls, path: str | Path) -> "ChunkStore":
        path = Path(path)
        manifest_path = path / MANIFEST_NAME
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise StoreError(f"cannot open store at {path}: {exc}") from exc
        chunks = []
        try:
            with (path / CHUNKS_NAME).open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    chunks.append(
                        DocumentChunk(
                            chunk_id=rec["chunk_id"],
                            doc_id=rec["doc_id"],
                            text=rec["text"],
                            start=rec["start"],
                            end=rec["end"],
                            lang=rec["lang"],
                        )
                    )
        except OSError as exc:
            raise StoreError(f"cannot read chunks at {path}: {exc}") from exc
        return cls(path, manifest, chunks)

    def get(self, chunk_id: str) -> DocumentChunk:
        try:
            return self._by_id[chunk_id]
        except KeyError:
            raise NotFoundError(f"unknown chunk id {chunk_id!r}") from None

    def chunking_config(self) -> ChunkingConfig:
        return ChunkingConfig(**self.manifest["chunking"])

    def __iter__(self) -> Iterator[DocumentChunk]:
        return iter(self._chunks)

    def __len__(self) -> int:
        return len(self._chunks)


def get_chunk(store: ChunkStore, chunk_id: str) -> DocumentChunk:
    return store.get(chunk_id)


def ingest_corpus(
    docs: Iterable[RawDocument], cfg: ChunkingConfig, store_path: str | Path
) -> tuple[ChunkStore, IngestStats]:
    """Chunk every document and persist the store. Deterministic and idempotent:
    identical inputs always produce byte-identical store files."""
    store_path = Path(store_path)
    all_chunks: list[DocumentChunk] = []
    seen_docs: set[str] = set()
    langs: set[str] = set()
    doc_count = 0
    for doc in docs:
        if doc.doc_id in seen_docs:
            raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
        seen_docs.add(doc.doc_id)
        langs.add(doc.lang)
        all_chunks.extend(chunk_document(doc, cfg))
        doc_count += 1

    manifest = {
        "format": f"chunk-store/{FORMAT_VERSIONS['chunk-store']}",
        "chunking": cfg.as_dict(),
        "config_hash": config_hash(cfg.as_dict()),
        "langs": sorted(langs),
        "docs": doc_count,
        "chunks": len(all_chunks),
    }
    lines = "".join(
        canonical_json(
            {
                "chunk_id": c.chunk_id,
                "doc_id": c.doc_id,
                "text": c.text,
                "start": c.start,
                "end": c.end,
                "lang": c.lang,
            }
        )
        + "\n"
        for c in all_chunks
    )
    atomic_write_text(store_path / CHUNKS_NAME, lines)
    atomic_write_text(store_path / MANIFEST_NAME, canonical_json(manifest) + "\n")
    store = ChunkStore(store_path, manifest, all_chunks)
    return store, IngestStats(docs=doc_count, chunks=len(all_chunks))


def load_documents(path: str | Path) -> Iterator[RawDocument]:
    """Read a corpus file: jsonl with doc_id, title, text, lang fields."""
    from .util import read_jsonl

    for rec in read_jsonl(path):
        yield RawDocument(
            doc_id=str(rec["doc_id"]),
            title=str(rec.get("title", "")),
            body=str(rec["text"]),
            lang=str(rec.get("lang", "")),
        )
