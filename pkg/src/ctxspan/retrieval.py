"""Hybrid retrieval: BM25 candidates reranked by embedding cosine similarity.

The embedding model runs out of process behind a small wire protocol
(POST {"texts": [...]} -> {"embeddings": [[...], ...]}); a deterministic
hashed bag-of-words embedder is built in for offline and test runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import requests

from .bm25 import Bm25Index, RankedChunk, bm25_search, tokenize
from .corpus import ChunkStore, DocumentChunk
from .errors import ProtocolError, TransportError, ValidationError


@dataclass(frozen=True)
class RetrievalConfig:
    first_stage_k: int = 10
    final_m: int = 5
    query_prefix: str = "query: "
    passage_prefix: str = "passage: "
    embed_endpoint: str = ""

    def __post_init__(self):
        if not (1 <= self.final_m <= self.first_stage_k):
            raise ValidationError(
                f"need 1 <= final_m <= first_stage_k, got m={self.final_m} k={self.first_stage_k}"
            )

    def as_dict(self) -> dict:
        return {
            "first_stage_k": self.first_stage_k,
            "final_m": self.final_m,
            "query_prefix": self.query_prefix,
            "passage_prefix": self.passage_prefix,
            "embed_endpoint": self.embed_endpoint,
        }


@dataclass(frozen=True)
class EvidenceSet:
    """The final evidence chunks, in rank order, with scoring provenance."""

    chunks: tuple[DocumentChunk, ...]
    provenance: dict = field(compare=False)

    def texts(self) -> list[str]:
        return [chunk.text for chunk in self.chunks]

    def is_empty(self) -> bool:
        return not self.chunks

    def __len__(self) -> int:
        return len(self.chunks)


class HttpEmbedClient:
    """Client for the embedding wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self.client_id = f"http:{endpoint}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        try:
            resp = requests.post(self.endpoint, json={"texts": texts}, timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise TransportError(
                f"embedding service unreachable: {exc}", endpoint=self.endpoint
            ) from exc
        try:
            embeddings = resp.json()["embeddings"]
        except (ValueError, KeyError) as exc:
            raise ProtocolError(f"malformed embedding response: {exc}") from exc
        if len(embeddings) != len(texts):
            raise ProtocolError(
                f"embedding count {len(embeddings)} != text count {len(texts)}"
            )
        return embeddings


class HashEmbedder:
    """Deterministic bag-of-words embedder over a hashed vocabulary.

    Purely local and stable across machines (sha1 buckets, no process
    hash seed), so pipelines relying on it are byte-reproducible.
    """

    def __init__(self, dim: int = 64):
        self.dim = dim
        self.client_id = f"hash:{dim}"

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dim

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = [0.0] * self.dim
            for token in tokenize(text):
                vec[self._bucket(token)] += 1.0
            out.append(vec)
        return out


def cosine_similarity(a: list[float], b: list[float]) -> float:
    va, vb = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    norm = np.linalg.norm(va) * np.linalg.norm(vb)
    if norm == 0.0:
        return 0.0
    return float(va.dot(vb) / norm)


def rerank(
    query: str,
    candidates: list[DocumentChunk],
    cfg: RetrievalConfig,
    embed_client,
) -> list[RankedChunk]:
    """Order candidates by cosine similarity to the query embedding.

    Ties keep first-stage order; returns the top final_m.
    """
    if not candidates:
        raise ValidationError("rerank requires at least one candidate")
    texts = [cfg.query_prefix + query] + [cfg.passage_prefix + c.text for c in candidates]
    vectors = embed_client.embed(texts)
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise ProtocolError(f"embedding dimensions differ across texts: {sorted(dims)}")
    query_vec, passage_vecs = vectors[0], vectors[1:]
    sims = [cosine_similarity(query_vec, vec) for vec in passage_vecs]
    order = sorted(range(len(candidates)), key=lambda i: (-sims[i], i))
    return [
        RankedChunk(chunk_id=candidates[i].chunk_id, score=sims[i], stage="reranked")
        for i in order[: cfg.final_m]
    ]


def retrieve(
    question: str,
    index: Bm25Index,
    store: ChunkStore,
    cfg: RetrievalConfig,
    embed_client,
) -> EvidenceSet:
    """First-stage BM25 search, then rerank; empty hits give an empty set."""
    first_stage = bm25_search(index, question, cfg.first_stage_k)
    provenance: dict = {
        "retrieval": cfg.as_dict(),
        "embedder": getattr(embed_client, "client_id", "unknown"),
        "bm25": [[r.chunk_id, r.score] for r in first_stage],
    }
    if not first_stage:
        provenance["reranked"] = []
        return EvidenceSet(chunks=(), provenance=provenance)
    candidates = [store.get(r.chunk_id) for r in first_stage]
    final = rerank(question, candidates, cfg, embed_client)
    provenance["reranked"] = [[r.chunk_id, r.score] for r in final]
    chunks = tuple(store.get(r.chunk_id) for r in final)
    return EvidenceSet(chunks=chunks, provenance=provenance)
