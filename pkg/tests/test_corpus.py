from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ctxspan.corpus import (
    ChunkingConfig,
    RawDocument,
    chunk_document,
    get_chunk,
    ingest_corpus,
    load_documents,
)
from ctxspan.errors import NotFoundError, ValidationError


def doc(body: str, doc_id: str = "d1", lang: str = "en") -> RawDocument:
    return RawDocument(doc_id=doc_id, title="", body=body, lang=lang)


def test_small_body_single_chunk():
    body = "one two three four five"
    chunks = chunk_document(doc(body), ChunkingConfig(target_window=100))
    assert len(chunks) == 1
    assert chunks[0].text == body
    assert chunks[0].char_range == (0, len(body))


def test_250_words_three_contiguous_chunks():
    body = " ".join(f"w{i:03d}" for i in range(250))
    chunks = chunk_document(doc(body), ChunkingConfig(target_window=100, stride=100))
    assert [len(c.text.split()) for c in chunks] == [100, 100, 50]
    assert all(chunks[i].end == chunks[i + 1].start for i in range(len(chunks) - 1))
    assert "".join(c.text for c in chunks) == body


def test_empty_body_rejected():
    with pytest.raises(ValidationError):
        RawDocument(doc_id="d1", title="", body="   \n ", lang="en")


def test_chunk_text_matches_char_range():
    body = "  leading and trailing spaces matter here  "
    for chunk in chunk_document(doc(body), ChunkingConfig(target_window=3, stride=3)):
        assert chunk.text == body[chunk.start : chunk.end]


def test_chunk_ids_are_doc_scoped_ordinals():
    body = " ".join(str(i) for i in range(7))
    chunks = chunk_document(doc(body, doc_id="x"), ChunkingConfig(target_window=3, stride=3))
    assert [c.chunk_id for c in chunks] == ["x#0", "x#1", "x#2"]


def test_overlapping_windows_share_words():
    body = " ".join(f"w{i}" for i in range(10))
    chunks = chunk_document(doc(body), ChunkingConfig(target_window=4, stride=2))
    assert chunks[0].text.split()[2:4] == chunks[1].text.split()[0:2]


def test_max_chars_splits_at_word_boundaries():
    body = " ".join(["abcdefghij"] * 30)  # 10-char words
    chunks = chunk_document(doc(body), ChunkingConfig(target_window=30, stride=30, max_chars=25))
    assert len(chunks) > 1
    for chunk in chunks:
        assert len(chunk.text) <= 25
        assert chunk.text == body[chunk.start : chunk.end]
    assert "".join(c.text for c in chunks) == body


def test_single_word_over_cap_kept_whole():
    body = "tiny " + "x" * 50 + " tail"
    chunks = chunk_document(doc(body), ChunkingConfig(target_window=10, stride=10, max_chars=20))
    assert "".join(c.text for c in chunks) == body
    assert any("x" * 50 in c.text for c in chunks)


@given(
    n_words=st.integers(min_value=1, max_value=120),
    window=st.integers(min_value=1, max_value=40),
)
def test_coverage_when_stride_equals_window(n_words, window):
    body = " ".join(f"w{i}" for i in range(n_words)) + "  "
    cfg = ChunkingConfig(target_window=window, stride=window, max_chars=10_000)
    chunks = chunk_document(doc(body), cfg)
    assert "".join(c.text for c in chunks) == body
    covered = sorted(i for c in chunks for i in range(c.start, c.end))
    assert covered == list(range(len(body)))


def test_config_invariants():
    with pytest.raises(ValidationError):
        ChunkingConfig(target_window=10, stride=11)
    with pytest.raises(ValidationError):
        ChunkingConfig(target_window=10, stride=0)
    with pytest.raises(ValidationError):
        ChunkingConfig(max_chars=0)


def test_ingest_stats_and_roundtrip(tmp_path):
    docs = [doc("alpha beta", "d1"), doc("gamma", "d2")]
    cfg = ChunkingConfig()
    store, stats = ingest_corpus(docs, cfg, tmp_path / "store")
    assert (stats.docs, stats.chunks) == (2, 2)

    reopened = type(store).open(store.path)
    expected = [c for d in docs for c in chunk_document(d, cfg)]
    assert list(reopened) == expected
    assert reopened.manifest["langs"] == ["en"]
    assert reopened.chunking_config() == cfg


def test_ingest_is_deterministic(tmp_path):
    docs = [doc("alpha beta gamma", "d1"), doc("delta", "d2")]
    cfg = ChunkingConfig(target_window=2, stride=2)
    store_a, _ = ingest_corpus(docs, cfg, tmp_path / "a")
    store_b, _ = ingest_corpus(docs, cfg, tmp_path / "b")
    for name in ("chunks.jsonl", "manifest.json"):
        assert (store_a.path / name).read_bytes() == (store_b.path / name).read_bytes()


def test_duplicate_doc_id_names_offender(tmp_path):
    docs = [doc("a", "w1"), doc("b", "w1")]
    with pytest.raises(ValidationError, match="w1"):
        ingest_corpus(docs, ChunkingConfig(), tmp_path / "store")


def test_get_chunk(tmp_path):
    store, _ = ingest_corpus([doc("alpha beta", "d1")], ChunkingConfig(), tmp_path / "store")
    assert get_chunk(store, "d1#0").text == "alpha beta"
    with pytest.raises(NotFoundError):
        get_chunk(store, "x#99")

    other, _ = ingest_corpus([doc("other", "o1")], ChunkingConfig(), tmp_path / "other")
    with pytest.raises(NotFoundError):
        get_chunk(other, "d1#0")


def test_load_documents(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(
        '{"doc_id": "a", "title": "T", "text": "hello world", "lang": "en"}\n',
        encoding="utf-8",
    )
    docs = list(load_documents(path))
    assert docs == [RawDocument(doc_id="a", title="T", body="hello world", lang="en")]


def test_ingest_io_failure_carries_path_context(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")
    target = blocker / "store"
    from ctxspan.errors import StoreError

    with pytest.raises(StoreError, match="store"):
        ingest_corpus([doc("alpha beta", "d1")], ChunkingConfig(), target)
