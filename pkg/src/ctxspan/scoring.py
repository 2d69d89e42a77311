"""Per-token log-probabilities under two conditionings.

The with-context series comes from a scoring backend (recorded file, remote
endpoint, or the built-in toy model) that force-scores the dataset's exact
token sequence; the without-context series is read from the dataset record.
All probabilities are clamped into the open interval (0, 1) before use so
every stored value is finite and strictly negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import requests

from .dataset import AnnotatedResponse
from .errors import (
    AlignmentError,
    DataError,
    ProtocolError,
    TransportError,
    ValidationError,
)
from .retrieval import EvidenceSet
from .toylm import ToyModel, toy_lm_score

WITH_CONTEXT = "with_context"
WITHOUT_CONTEXT = "without_context"

LOGPROB_MIN = math.log(1e-12)
LOGPROB_MAX = math.log1p(-1e-12)

PROMPT_TEMPLATE = (
    "You are an assistant for answering questions.\n"
    "Refer to the references below and answer the following question.\n"
    "\n"
    "### References\n"
    "{reference_passages}\n"
    "\n"
    "### Question\n"
    "{question}\n"
    "\n"
    "### Answer"
)


def clamp_logprob(value: float) -> float:
    return min(max(value, LOGPROB_MIN), LOGPROB_MAX)


@dataclass(frozen=True)
class LogProbSeries:
    values: tuple[float, ...]
    conditioning: str
    backend_id: str = field(compare=False, default="unknown")

    def __post_init__(self):
        if self.conditioning not in (WITH_CONTEXT, WITHOUT_CONTEXT):
            raise ValidationError(f"unknown conditioning {self.conditioning!r}")
        for i, v in enumerate(self.values):
            if not math.isfinite(v):
                raise ValidationError(f"logprob {i} is not finite: {v!r}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ScoringRequest:
    prompt: str
    continuation_tokens: tuple[str, ...]
    record_id: str = ""  # lets recorded backends correlate the request

    def __post_init__(self):
        if not self.continuation_tokens:
            raise ValidationError("continuation_tokens must be non-empty")


def render_references(evidence: EvidenceSet) -> str:
    return "\n".join(f"{i}. {text}" for i, text in enumerate(evidence.texts(), 1))


def render_prompt(evidence: EvidenceSet, question: str) -> str:
    """Fill the scoring prompt template; no whitespace normalization."""
    if not question:
        raise ValidationError("question must be non-empty")
    return PROMPT_TEMPLATE.format(
        reference_passages=render_references(evidence), question=question
    )


def score_continuation(backend, req: ScoringRequest) -> LogProbSeries:
    """Force-score the continuation tokens; returns the with-context series.

    The backend must return exactly one natural-log probability per token
    (same segmentation as the dataset), each in (0, 1]; anything else is a
    contract violation, not something to repair silently.
    """
    raw = backend.score(req)
    if len(raw) != len(req.continuation_tokens):
        raise AlignmentError(
            f"backend returned {len(raw)} logprobs for "
            f"{len(req.continuation_tokens)} tokens",
            record_id=req.record_id or None,
        )
    for i, value in enumerate(raw):
        if value is None or not math.isfinite(float(value)) or float(value) > 0.0:
            raise ProtocolError(
                f"logprob {i} = {value!r} implies a probability outside (0, 1]",
                record_id=req.record_id or None,
            )
    return LogProbSeries(
        values=tuple(clamp_logprob(float(v)) for v in raw),
        conditioning=WITH_CONTEXT,
        backend_id=backend.backend_id,
    )


def load_reference_logprobs(record: AnnotatedResponse) -> LogProbSeries:
    """The without-context series recorded in the dataset itself."""
    values = []
    for i, tok in enumerate(record.tokens):
        if tok.logprob is None or (isinstance(tok.logprob, float) and math.isnan(tok.logprob)):
            raise DataError(f"token {i} has no recorded logprob", record_id=record.id)
        values.append(clamp_logprob(float(tok.logprob)))
    return LogProbSeries(
        values=tuple(values), conditioning=WITHOUT_CONTEXT, backend_id="dataset"
    )


class RecordedBackend:
    """Serves with-context logprobs recorded in the dataset (logprob_ctx)."""

    def __init__(self, records: list[AnnotatedResponse]):
        self._by_id = {rec.id: rec for rec in records}
        self.backend_id = "file"

    def score(self, req: ScoringRequest) -> list[float]:
        rec = self._by_id.get(req.record_id)
        if rec is None:
            raise DataError(
                f"no recorded logprobs for record {req.record_id!r}",
                record_id=req.record_id or None,
            )
        values = []
        for i, tok in enumerate(rec.tokens):
            if tok.logprob_ctx is None:
                raise DataError(
                    f"token {i} has no recorded with-context logprob", record_id=rec.id
                )
            values.append(float(tok.logprob_ctx))
        return values


class HttpScoringBackend:
    """Client for the remote scoring wire protocol.

    Request: {"prompt": ..., "continuation_tokens": [...]}; response:
    {"logprobs": [...]} with natural-log values.
    """

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self.backend_id = f"http:{endpoint}"

    def score(self, req: ScoringRequest) -> list[float]:
        payload = {"prompt": req.prompt, "continuation_tokens": list(req.continuation_tokens)}
        try:
            resp = requests.post(self.endpoint, json=payload, timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise TransportError(
                f"scoring service unreachable: {exc}",
                endpoint=self.endpoint,
                record_id=req.record_id or None,
            ) from exc
        try:
            return [float(v) for v in resp.json()["logprobs"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed scoring response: {exc}") from exc


class ToyBackend:
    """Scores continuations with the built-in character-trigram model."""

    def __init__(self, model: ToyModel, backend_id: str = "toy"):
        self.model = model
        self.backend_id = backend_id

    def score(self, req: ScoringRequest) -> list[float]:
        return toy_lm_score(self.model, req.prompt, list(req.continuation_tokens))
