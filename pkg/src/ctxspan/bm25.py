"""BM25 first-stage search over a chunk store.

Scoring uses the Robertson saturation formula with a non-negative idf,
    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)),
so a chunk sharing no query term scores exactly 0 and is never returned.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import ChunkStore
from .errors import StoreError, ValidationError
from .util import FORMAT_VERSIONS, atomic_write_text, config_hash

INDEX_NAME = "bm25.json"

# Unicode-aware: lowercase, then split on anything that is not a letter,
# digit, or combining mark. No stemming, no per-language analyzers.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValidationError(f"k1 must be >= 0, got {self.k1}")
        if not (0.0 <= self.b <= 1.0):
            raise ValidationError(f"b must be in [0, 1], got {self.b}")

    def as_dict(self) -> dict:
        return {"k1": self.k1, "b": self.b}


@dataclass(frozen=True)
class RankedChunk:
    chunk_id: str
    score: float
    stage: str  # "bm25" or "reranked"


class Bm25Index:
    def __init__(self, chunk_ids: list[str], lengths: list[int],
                 postings: dict[str, list[tuple[int, int]]], params: Bm25Params):
        self.chunk_ids = chunk_ids
        self.lengths = lengths
        self.postings = postings
        self.params = params
        self.n_chunks = len(chunk_ids)
        self.avg_length = sum(lengths) / self.n_chunks

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_chunks - df + 0.5) / (df + 0.5))

    def search(self, query: str, k: int) -> list[RankedChunk]:
        """Top-k chunks by BM25 score, ties broken by ascending chunk_id."""
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        terms = tokenize(query)
        if not terms:
            raise ValidationError(f"query {query!r} tokenizes to nothing")
        k1, b = self.params.k1, self.params.b
        scores: dict[int, float] = {}
        for term in terms:
            postings = self.postings.get(term)
            if not postings:
                continue
            idf = self.idf(term)
            for ord_, tf in postings:
                norm = k1 * (1.0 - b + b * self.lengths[ord_] / self.avg_length)
                contrib = idf * (tf * (k1 + 1.0)) / (tf + norm)
                scores[ord_] = scores.get(ord_, 0.0) + contrib
        ranked = sorted(scores.items(), key=lambda item: (-item[1], self.chunk_ids[item[0]]))
        return [
            RankedChunk(chunk_id=self.chunk_ids[ord_], score=score, stage="bm25")
            for ord_, score in ranked[:k]
        ]

    def to_payload(self) -> dict:
        return {
            "format": f"bm25-index/{FORMAT_VERSIONS['bm25-index']}",
            "params": self.params.as_dict(),
            "config_hash": config_hash(self.params.as_dict()),
            "chunk_ids": self.chunk_ids,
            "lengths": self.lengths,
            "postings": {
                term: [[ord_, tf] for ord_, tf in self.postings[term]]
                for term in sorted(self.postings)
            },
        }

    def save(self, path: str | Path) -> None:
        payload = self.to_payload()
        text = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
        atomic_write_text(path, text + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise StoreError(f"cannot read index at {path}: {exc}") from exc
        return cls(
            chunk_ids=list(payload["chunk_ids"]),
            lengths=list(payload["lengths"]),
            postings={
                term: [(int(o), int(tf)) for o, tf in entries]
                for term, entries in payload["postings"].items()
            },
            params=Bm25Params(**payload["params"]),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Bm25Index):
            return NotImplemented
        return self.to_payload() == other.to_payload()


def build_index(store: ChunkStore, params: Bm25Params = Bm25Params()) -> Bm25Index:
    """Index every chunk: term postings with frequencies plus length stats."""
    if len(store) == 0:
        raise ValidationError(f"store at {store.path} is empty")
    chunk_ids: list[str] = []
    lengths: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for ord_, chunk in enumerate(store):
        terms = tokenize(chunk.text)
        chunk_ids.append(chunk.chunk_id)
        lengths.append(len(terms))
        for term, tf in sorted(Counter(terms).items()):
            postings.setdefault(term, []).append((ord_, tf))
    return Bm25Index(chunk_ids, lengths, postings, params)


def index_path(store: ChunkStore) -> Path:
    return store.path / INDEX_NAME


def bm25_search(index: Bm25Index, query: str, k: int) -> list[RankedChunk]:
    return index.search(query, k)
