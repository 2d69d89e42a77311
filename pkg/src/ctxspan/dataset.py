"""Dataset records: one answer per record, with per-token logprobs and gold spans.

Canonical line format (jsonl):

    {"id": ..., "lang": ..., "question": ..., "model_id": ...,
     "output_text": ...,
     "tokens": [{"text": ..., "logprob": ..., "start": ..., "end": ...,
                 "logprob_ctx": ...?}, ...],
     "hard_labels": [[start, end], ...]}

`normalize_record` converts looser raw inputs into this shape, reconstructing
token offsets by greedy left-to-right matching when they are absent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import DataError
from .spans import CharSpanSet
from .util import read_jsonl, write_jsonl

# Common leading-space markers emitted by subword tokenizers.
SPACE_SENTINELS = ("▁", "Ġ")  # "▁" and "Ġ"

_QUESTION_KEYS = ("question", "model_input", "input")
_OUTPUT_KEYS = ("output_text", "model_output_text", "output")
_LABEL_KEYS = ("hard_labels", "gold_spans", "labels")


@dataclass(frozen=True)
class Token:
    """One output token with half-open character offsets into the output text."""

    text: str
    start: int
    end: int
    logprob: float | None = None
    logprob_ctx: float | None = None


@dataclass(frozen=True)
class AnnotatedResponse:
    id: str
    lang: str
    question: str
    model_id: str
    output_text: str
    tokens: tuple[Token, ...]
    gold_spans: CharSpanSet = field(compare=False)

    def token_texts(self) -> list[str]:
        return [tok.text for tok in self.tokens]


def desentinel(token_text: str) -> str:
    """Map a leading-space sentinel to a literal space."""
    if token_text and token_text[0] in SPACE_SENTINELS:
        return " " + token_text[1:]
    return token_text


def reconstruct_offsets(output_text: str, token_texts: list[str]) -> list[tuple[int, int]]:
    """Greedy left-to-right match of token texts against the output string.

    A failure to match is a data error: offsets are never guessed.
    Returns (start, end) per token; the matched slice may drop a leading
    space that the sentinel implied but the output does not contain.
    """
    offsets: list[tuple[int, int]] = []
    pos = 0
    for idx, raw in enumerate(token_texts):
        text = desentinel(raw)
        if not text:
            raise DataError(f"token {idx}: empty token text")
        if output_text.startswith(text, pos):
            offsets.append((pos, pos + len(text)))
            pos += len(text)
            continue
        # Skip whitespace the tokenizer did not emit, then retry without
        # the token's own leading whitespace.
        skip = pos
        while skip < len(output_text) and output_text[skip].isspace():
            skip += 1
        stripped = text.lstrip()
        if stripped and output_text.startswith(stripped, skip):
            offsets.append((skip, skip + len(stripped)))
            pos = skip + len(stripped)
            continue
        raise DataError(
            f"token {idx}: text {raw!r} does not match output at offset {pos}"
        )
    return offsets


def validate_tokens(tokens: Iterable[Token], output_text: str, record_id: str = "?") -> None:
    """Enforce the token invariants: sorted, disjoint, slice-exact, covering."""
    uncovered = {i for i, ch in enumerate(output_text) if not ch.isspace()}
    prev_end = 0
    for idx, tok in enumerate(tokens):
        if not (0 <= tok.start < tok.end <= len(output_text)):
            raise DataError(
                f"token {idx}: offsets ({tok.start}, {tok.end}) out of bounds",
                record_id=record_id,
            )
        if tok.start < prev_end:
            raise DataError(f"token {idx}: offsets overlap or are unsorted", record_id=record_id)
        if tok.text != output_text[tok.start : tok.end]:
            raise DataError(
                f"token {idx}: text {tok.text!r} differs from output slice",
                record_id=record_id,
            )
        uncovered.difference_update(range(tok.start, tok.end))
        prev_end = tok.end
    if uncovered:
        raise DataError(
            f"tokens leave non-whitespace characters uncovered at {sorted(uncovered)[:5]}...",
            record_id=record_id,
        )


def normalize_record(raw: dict) -> dict:
    """Convert a raw record to the canonical shape (pure, no I/O)."""
    rec_id = str(raw.get("id", ""))
    if not rec_id:
        raise DataError("record is missing an id")

    def pick(keys: tuple[str, ...]) -> object:
        for key in keys:
            if key in raw:
                return raw[key]
        raise DataError(f"record is missing any of {keys}", record_id=rec_id)

    output_text = str(pick(_OUTPUT_KEYS))
    question = str(pick(_QUESTION_KEYS))
    lang = str(raw.get("lang", "")).strip()
    if not lang:
        raise DataError("record is missing lang", record_id=rec_id)
    model_id = str(raw.get("model_id", "unknown"))

    raw_tokens = raw.get("tokens")
    if raw_tokens is None and "output_tokens" in raw:
        texts = list(raw["output_tokens"])
        logprobs = raw.get("output_logprobs", [None] * len(texts))
        if len(logprobs) != len(texts):
            raise DataError("output_tokens/output_logprobs length mismatch", record_id=rec_id)
        raw_tokens = [{"text": t, "logprob": lp} for t, lp in zip(texts, logprobs)]
    if not raw_tokens:
        raise DataError("record has no tokens", record_id=rec_id)

    have_offsets = all("start" in t and "end" in t for t in raw_tokens)
    if have_offsets:
        offsets = [(int(t["start"]), int(t["end"])) for t in raw_tokens]
    else:
        offsets = reconstruct_offsets(output_text, [str(t["text"]) for t in raw_tokens])

    tokens = []
    for tok, (start, end) in zip(raw_tokens, offsets):
        entry = {
            "text": output_text[start:end],
            "logprob": tok.get("logprob"),
            "start": start,
            "end": end,
        }
        if "logprob_ctx" in tok:
            entry["logprob_ctx"] = tok["logprob_ctx"]
        tokens.append(entry)

    labels = []
    for key in _LABEL_KEYS:
        if key in raw:
            labels = raw[key]
            break
    spans = CharSpanSet.from_intervals(labels, len(output_text))

    return {
        "id": rec_id,
        "lang": lang,
        "question": question,
        "model_id": model_id,
        "output_text": output_text,
        "tokens": tokens,
        "hard_labels": spans.to_pairs(),
    }


def record_from_dict(data: dict) -> AnnotatedResponse:
    rec_id = str(data.get("id", "?"))
    try:
        output_text = data["output_text"]
        tokens = tuple(
            Token(
                text=t["text"],
                start=int(t["start"]),
                end=int(t["end"]),
                logprob=t.get("logprob"),
                logprob_ctx=t.get("logprob_ctx"),
            )
            for t in data["tokens"]
        )
        record = AnnotatedResponse(
            id=rec_id,
            lang=data["lang"],
            question=data["question"],
            model_id=data.get("model_id", "unknown"),
            output_text=output_text,
            tokens=tokens,
            gold_spans=CharSpanSet.from_intervals(data.get("hard_labels", []), len(output_text)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed record: {exc}", record_id=rec_id) from exc
    validate_tokens(record.tokens, record.output_text, record_id=rec_id)
    return record


def record_to_dict(record: AnnotatedResponse) -> dict:
    tokens = []
    for tok in record.tokens:
        entry = {"text": tok.text, "logprob": tok.logprob, "start": tok.start, "end": tok.end}
        if tok.logprob_ctx is not None:
            entry["logprob_ctx"] = tok.logprob_ctx
        tokens.append(entry)
    return {
        "id": record.id,
        "lang": record.lang,
        "question": record.question,
        "model_id": record.model_id,
        "output_text": record.output_text,
        "tokens": tokens,
        "hard_labels": record.gold_spans.to_pairs(),
    }


def load_dataset(path: str | Path) -> list[AnnotatedResponse]:
    records = [record_from_dict(data) for data in read_jsonl(path)]
    seen: set[str] = set()
    for rec in records:
        if rec.id in seen:
            raise DataError(f"duplicate record id {rec.id!r} in {path}", record_id=rec.id)
        seen.add(rec.id)
    return records


def save_dataset(path: str | Path, records: Iterable[AnnotatedResponse]) -> None:
    write_jsonl(path, (record_to_dict(rec) for rec in records))
