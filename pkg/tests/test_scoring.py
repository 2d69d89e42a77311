from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from conftest import StubBackend, serve_stub, word_record
from ctxspan.errors import AlignmentError, DataError, ProtocolError, TransportError, ValidationError
from ctxspan.retrieval import EvidenceSet
from ctxspan.corpus import DocumentChunk
from ctxspan.scoring import (
    LOGPROB_MAX,
    LOGPROB_MIN,
    PROMPT_TEMPLATE,
    WITH_CONTEXT,
    WITHOUT_CONTEXT,
    HttpScoringBackend,
    LogProbSeries,
    RecordedBackend,
    ScoringRequest,
    ToyBackend,
    clamp_logprob,
    load_reference_logprobs,
    render_prompt,
    score_continuation,
)
from ctxspan.toylm import toy_lm_fit, toy_lm_score


def evidence_of(*texts: str) -> EvidenceSet:
    chunks = tuple(
        DocumentChunk(chunk_id=f"e{i}#0", doc_id=f"e{i}", text=t, start=0, end=len(t), lang="en")
        for i, t in enumerate(texts)
    )
    return EvidenceSet(chunks=chunks, provenance={})


def test_render_prompt_empty_evidence():
    prompt = render_prompt(evidence_of(), "Q?")
    assert prompt == PROMPT_TEMPLATE.format(reference_passages="", question="Q?")
    assert "### Question\nQ?" in prompt
    assert prompt.endswith("### Answer")


def test_render_prompt_numbers_passages():
    prompt = render_prompt(evidence_of("abc"), "Q?")
    assert "### References\n1. abc\n" in prompt
    two = render_prompt(evidence_of("abc", "def"), "Q?")
    assert "1. abc\n2. def" in two


def test_render_prompt_deterministic():
    ev = evidence_of("abc")
    assert render_prompt(ev, "Q?") == render_prompt(ev, "Q?")


def test_render_prompt_requires_question():
    with pytest.raises(ValidationError):
        render_prompt(evidence_of(), "")


def test_clamp_bounds():
    assert clamp_logprob(0.0) == LOGPROB_MAX
    assert clamp_logprob(-1e9) == LOGPROB_MIN
    assert clamp_logprob(-0.5) == -0.5
    assert LOGPROB_MIN == math.log(1e-12)
    assert LOGPROB_MAX == math.log1p(-1e-12)


def test_series_validation():
    with pytest.raises(ValidationError):
        LogProbSeries((-1.0,), "sideways")
    with pytest.raises(ValidationError):
        LogProbSeries((float("-inf"),), WITH_CONTEXT)


def test_request_requires_tokens():
    with pytest.raises(ValidationError):
        ScoringRequest(prompt="p", continuation_tokens=())


def test_score_continuation_toy_matches_hand_formula():
    # trained on "aaab": P(a | context "a") = (2 + 1) / (3 + 3)
    backend = ToyBackend(toy_lm_fit("aaab"))
    series = score_continuation(backend, ScoringRequest(prompt="a", continuation_tokens=("a",)))
    assert series.conditioning == WITH_CONTEXT
    assert series.values[0] == pytest.approx(math.log(0.5), abs=1e-12)


def test_score_continuation_echoes_recording():
    record = word_record("r1", "x y z", ctx_logprobs=[-0.5, -1.5, -2.5])
    backend = RecordedBackend([record])
    series = score_continuation(
        backend,
        ScoringRequest(prompt="p", continuation_tokens=("x", "y", "z"), record_id="r1"),
    )
    assert series.values == (-0.5, -1.5, -2.5)
    assert series.backend_id == "file"


def test_score_continuation_short_series_is_alignment_error():
    backend = StubBackend([-1.0, -1.0, -1.0])
    with pytest.raises(AlignmentError):
        score_continuation(
            backend, ScoringRequest(prompt="p", continuation_tokens=("a", "b", "c", "d"))
        )


def test_score_continuation_rejects_bad_probabilities():
    for bad in ([0.5], [float("nan")], [float("-inf")], [None]):
        with pytest.raises(ProtocolError):
            score_continuation(
                StubBackend(bad), ScoringRequest(prompt="p", continuation_tokens=("a",))
            )


def test_score_continuation_clamps_p_equal_one():
    series = score_continuation(
        StubBackend([0.0]), ScoringRequest(prompt="p", continuation_tokens=("a",))
    )
    assert series.values[0] == LOGPROB_MAX


def test_load_reference_logprobs_passthrough():
    record = word_record("r1", "a b", logprobs=[-0.1, -2.3])
    series = load_reference_logprobs(record)
    assert series.values == (-0.1, -2.3)
    assert series.conditioning == WITHOUT_CONTEXT


def test_load_reference_logprobs_clamps_certainty():
    record = word_record("r1", "a b", logprobs=[0.0, -1.0])
    series = load_reference_logprobs(record)
    assert series.values[0] == LOGPROB_MAX


def test_load_reference_logprobs_missing_value():
    record = word_record("r1", "a b", logprobs=[-0.1, None])
    with pytest.raises(DataError, match="token 1"):
        load_reference_logprobs(record)


def test_recorded_backend_unknown_record():
    backend = RecordedBackend([word_record("r1", "a", ctx_logprobs=[-1.0])])
    with pytest.raises(DataError):
        backend.score(ScoringRequest(prompt="p", continuation_tokens=("a",), record_id="nope"))


def test_toy_model_laplace_example():
    model = toy_lm_fit("aaab")
    assert model.char_prob("aa", "a") == pytest.approx(0.4, abs=1e-12)
    assert model.vocab_size == 3


def test_toy_model_unseen_chars_stay_finite():
    model = toy_lm_fit("aaab")
    values = toy_lm_score(model, "", ["zq!"])
    assert len(values) == 1
    assert math.isfinite(values[0])
    assert values[0] < 0


def test_toy_model_deterministic():
    model = toy_lm_fit("the quick brown fox")
    a = toy_lm_score(model, "the ", ["qu", "ick"])
    b = toy_lm_score(model, "the ", ["qu", "ick"])
    assert a == b


def test_toy_model_validation():
    with pytest.raises(ValidationError):
        toy_lm_fit("ab")
    with pytest.raises(ValidationError):
        toy_lm_score(toy_lm_fit("abc"), "a", [])


@given(st.text(min_size=3, max_size=40), st.text(min_size=0, max_size=2))
def test_toy_model_distributions_normalize(training, context):
    model = toy_lm_fit(training)
    symbols = model.alphabet + [model.unknown]
    total = sum(model.char_prob(context, ch) for ch in symbols)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_http_scoring_backend_roundtrip():
    def respond(payload):
        assert payload["prompt"] == "p"
        return 200, {"logprobs": [-0.5 for _ in payload["continuation_tokens"]]}

    with serve_stub(respond) as url:
        series = score_continuation(
            HttpScoringBackend(url),
            ScoringRequest(prompt="p", continuation_tokens=("a", "b")),
        )
    assert series.values == (-0.5, -0.5)


def test_http_scoring_backend_transport_error():
    backend = HttpScoringBackend("http://127.0.0.1:9/", timeout=0.2)
    with pytest.raises(TransportError) as err:
        backend.score(ScoringRequest(prompt="p", continuation_tokens=("a",)))
    assert err.value.endpoint == "http://127.0.0.1:9/"


def test_http_scoring_backend_malformed_response():
    with serve_stub(lambda payload: (200, {"oops": 1})) as url:
        with pytest.raises(ProtocolError):
            HttpScoringBackend(url).score(
                ScoringRequest(prompt="p", continuation_tokens=("a",))
            )
