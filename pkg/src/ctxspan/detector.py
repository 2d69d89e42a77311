"""Context-sensitivity scoring and span assembly.

Each token's sensitivity is the ratio of its with-evidence log-probability
to its without-evidence log-probability (a small epsilon keeps the division
total); tokens at or above the threshold are flagged and maximal flagged
runs become predicted character spans.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dataset import AnnotatedResponse, Token
from .errors import AlignmentError, ValidationError
from .retrieval import EvidenceSet
from .scoring import (
    WITH_CONTEXT,
    WITHOUT_CONTEXT,
    LogProbSeries,
    ScoringRequest,
    load_reference_logprobs,
    render_prompt,
    score_continuation,
)
from .spans import CharSpanSet

DEFAULT_DELTA = 0.3
DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class DetectorConfig:
    delta: float = DEFAULT_DELTA
    epsilon: float = DEFAULT_EPSILON
    merge_across_whitespace: bool = True

    def __post_init__(self):
        if self.delta < 0:
            raise ValidationError(f"delta must be >= 0, got {self.delta}")
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "merge_across_whitespace": self.merge_across_whitespace,
        }


@dataclass(frozen=True)
class CsrSeries:
    values: tuple[float, ...]
    epsilon: float = DEFAULT_EPSILON
    provenance: dict = field(compare=False, default_factory=dict)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DetectResult:
    record_id: str
    spans: CharSpanSet
    csr: CsrSeries
    provenance: dict = field(compare=False, default_factory=dict)


def compute_csr(
    with_ctx: LogProbSeries, without_ctx: LogProbSeries, epsilon: float = DEFAULT_EPSILON
) -> CsrSeries:
    """Per-token ratio log p(token | evidence, ...) / (log p(token | ...) + epsilon)."""
    if with_ctx.conditioning != WITH_CONTEXT or without_ctx.conditioning != WITHOUT_CONTEXT:
        raise ValidationError(
            f"conditioning mismatch: got {with_ctx.conditioning!r} / {without_ctx.conditioning!r}"
        )
    if epsilon < 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
    if len(with_ctx) != len(without_ctx):
        raise AlignmentError(
            f"series lengths differ: {len(with_ctx)} with-context vs "
            f"{len(without_ctx)} without-context"
        )
    values = tuple(
        num / (den + epsilon) for num, den in zip(with_ctx.values, without_ctx.values)
    )
    return CsrSeries(
        values=values,
        epsilon=epsilon,
        provenance={"with": with_ctx.backend_id, "without": without_ctx.backend_id},
    )


def classify_tokens(csr: CsrSeries, delta: float) -> list[bool]:
    """A token is flagged when its ratio is greater than or equal to delta."""
    return [value >= delta for value in csr.values]


def assemble_spans(
    flags: list[bool], tokens: list[Token] | tuple[Token, ...], cfg: DetectorConfig
) -> CharSpanSet:
    """Turn flagged tokens into character spans.

    Each maximal run of flagged tokens spans from its first token's start to
    its last token's end. With merge_across_whitespace, runs separated only
    by unflagged all-whitespace tokens fuse into one span.
    """
    if len(flags) != len(tokens):
        raise AlignmentError(f"{len(flags)} flags for {len(tokens)} tokens")
    text_len = max((tok.end for tok in tokens), default=0)

    runs: list[tuple[int, int]] = []  # token-index ranges, half-open
    i = 0
    while i < len(flags):
        if flags[i]:
            j = i
            while j + 1 < len(flags) and flags[j + 1]:
                j += 1
            runs.append((i, j + 1))
            i = j + 1
        else:
            i += 1

    if cfg.merge_across_whitespace:
        merged_runs: list[tuple[int, int]] = []
        for run in runs:
            if merged_runs and all(
                tokens[k].text.strip() == "" for k in range(merged_runs[-1][1], run[0])
            ):
                merged_runs[-1] = (merged_runs[-1][0], run[1])
            else:
                merged_runs.append(run)
        runs = merged_runs

    intervals = [(tokens[a].start, tokens[b - 1].end) for a, b in runs]
    return CharSpanSet.from_intervals(intervals, text_len)


def detect(
    record: AnnotatedResponse,
    evidence: EvidenceSet,
    backend,
    cfg: DetectorConfig = DetectorConfig(),
) -> DetectResult:
    """End-to-end detection for one record: score, ratio, threshold, spans."""
    prompt = render_prompt(evidence, record.question)
    with_ctx = score_continuation(
        backend,
        ScoringRequest(
            prompt=prompt,
            continuation_tokens=tuple(record.token_texts()),
            record_id=record.id,
        ),
    )
    without_ctx = load_reference_logprobs(record)
    csr = compute_csr(with_ctx, without_ctx, cfg.epsilon)
    flags = classify_tokens(csr, cfg.delta)
    spans = assemble_spans(flags, record.tokens, cfg)
    spans = CharSpanSet(spans.spans, len(record.output_text))
    provenance = {
        "backends": dict(csr.provenance),
        "evidence": "none" if evidence.is_empty() else [c.chunk_id for c in evidence.chunks],
        "detector": cfg.as_dict(),
    }
    return DetectResult(record_id=record.id, spans=spans, csr=csr, provenance=provenance)
