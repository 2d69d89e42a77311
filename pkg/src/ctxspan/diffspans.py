"""Edit-script alignment between an original answer and an externally edited one.

The editor model runs out of process: this module renders its prompt, accepts
its reply (live over HTTP or recorded in a file), and converts the character
diff into predicted spans over the original text.
"""

from __future__ import annotations

from dataclasses import dataclass

import requests

from .errors import ProtocolError, TransportError, ValidationError
from .retrieval import EvidenceSet
from .scoring import render_references
from .spans import CharSpanSet
from .util import read_jsonl

EDITOR_PROMPT_TEMPLATE = (
    "Read the following references:\n"
    "{reference_passages}\n"
    "Please identify all the errors in the following text using the information "
    "in the references provided and suggest edits if necessary:\n"
    "[Text] {output}\n"
    "[Edited] "
)

KEEP = "keep"
DELETE = "delete"
INSERT = "insert"


@dataclass(frozen=True)
class EditScript:
    """Ordered character-run operations transforming original into edited.

    Ops are ("keep", start, end), ("delete", start, end) with original-text
    offsets, or ("insert", text).
    """

    ops: tuple[tuple, ...]

    def delete_runs(self) -> list[tuple[int, int]]:
        return [(op[1], op[2]) for op in self.ops if op[0] == DELETE]

    def cost(self) -> int:
        """Total characters deleted plus inserted."""
        total = 0
        for op in self.ops:
            if op[0] == DELETE:
                total += op[2] - op[1]
            elif op[0] == INSERT:
                total += len(op[1])
        return total


def build_editor_prompt(evidence: EvidenceSet, output_text: str) -> str:
    if not output_text:
        raise ValidationError("output_text must be non-empty")
    return EDITOR_PROMPT_TEMPLATE.format(
        reference_passages=render_references(evidence), output=output_text
    )


def _common_prefix(a: str, b: str) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


def _common_suffix(a: str, b: str, lo: int) -> int:
    n = min(len(a), len(b)) - lo
    i = 0
    while i < n and a[len(a) - 1 - i] == b[len(b) - 1 - i]:
        i += 1
    return i


def align_texts(original: str, edited: str) -> EditScript:
    """Minimal character-level edit script (insert/delete unit cost).

    Deterministic tie-breaking: matching characters are always kept, and at
    equal cost a delete is emitted before an insert. Quadratic in the changed
    region only; the common prefix and suffix are peeled off first.
    """
    pre = _common_prefix(original, edited)
    suf = _common_suffix(original, edited, pre)
    a = original[pre : len(original) - suf]
    b = edited[pre : len(edited) - suf]

    ops: list[tuple] = []
    if pre:
        ops.append((KEEP, 0, pre))
    ops.extend(_align_middle(a, b, offset=pre))
    if suf:
        ops.append((KEEP, len(original) - suf, len(original)))
    return EditScript(ops=tuple(_merge_ops(ops)))


def _align_middle(a: str, b: str, offset: int) -> list[tuple]:
    n, m = len(a), len(b)
    if n == 0 and m == 0:
        return []
    if n == 0:
        return [(INSERT, b)]
    if m == 0:
        return [(DELETE, offset, offset + n)]

    # cost[i][j]: minimal ops to turn a[i:] into b[j:]
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        cost[n][j] = m - j
    for i in range(n - 1, -1, -1):
        row, below = cost[i], cost[i + 1]
        row[m] = n - i
        ai = a[i]
        for j in range(m - 1, -1, -1):
            if ai == b[j]:
                row[j] = below[j + 1]
            else:
                down, right = below[j], row[j + 1]
                row[j] = (down if down <= right else right) + 1

    ops: list[tuple] = []
    i = j = 0
    while i < n or j < m:
        if i < n and j < m and a[i] == b[j]:
            ops.append((KEEP, offset + i, offset + i + 1))
            i += 1
            j += 1
        elif i < n and (j == m or cost[i][j] == 1 + cost[i + 1][j]):
            ops.append((DELETE, offset + i, offset + i + 1))
            i += 1
        else:
            ops.append((INSERT, b[j]))
            j += 1
    return ops


def _merge_ops(ops: list[tuple]) -> list[tuple]:
    merged: list[tuple] = []
    for op in ops:
        if merged and merged[-1][0] == op[0]:
            if op[0] == INSERT:
                merged[-1] = (INSERT, merged[-1][1] + op[1])
                continue
            if merged[-1][2] == op[1]:
                merged[-1] = (op[0], merged[-1][1], op[2])
                continue
        merged.append(op)
    return merged


def apply_script(script: EditScript, original: str) -> str:
    out = []
    pos = 0
    for op in script.ops:
        kind = op[0]
        if kind == INSERT:
            out.append(op[1])
            continue
        start, end = op[1], op[2]
        if start != pos or end > len(original):
            raise ValidationError(f"edit op {op!r} does not fit original at {pos}")
        if kind == KEEP:
            out.append(original[start:end])
        pos = end
    if pos != len(original):
        raise ValidationError(f"edit script covers {pos} of {len(original)} characters")
    return "".join(out)


def extract_spans(script: EditScript, original_len: int, merge_gap: int = 1) -> CharSpanSet:
    """Spans of the original text touched by the script.

    Delete runs map directly; an insertion anchors to the single adjacent
    original character so pure insertions stay representable. Intervals
    closer than merge_gap characters are merged.
    """
    if merge_gap < 0:
        raise ValidationError(f"merge_gap must be >= 0, got {merge_gap}")
    intervals: list[tuple[int, int]] = []
    pos = 0
    for op in script.ops:
        kind = op[0]
        if kind == INSERT:
            if pos > 0:
                intervals.append((pos - 1, pos))
            elif original_len > 0:
                intervals.append((0, 1))
            continue
        start, end = op[1], op[2]
        if not (0 <= start <= end <= original_len):
            raise ValidationError(f"edit op {op!r} out of bounds for length {original_len}")
        if kind == DELETE:
            intervals.append((start, end))
        pos = end

    intervals.sort()
    merged: list[tuple[int, int]] = []
    for start, end in intervals:
        # overlaps always fuse; separate intervals fuse when the gap is
        # strictly smaller than merge_gap
        if merged and (start < merged[-1][1] or start - merged[-1][1] < merge_gap):
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return CharSpanSet(tuple(merged), original_len)


class HttpEditorClient:
    """Client for the editor wire protocol: {"prompt"} in, {"text"} out."""

    def __init__(self, endpoint: str, timeout: float = 120.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def edit(self, prompt: str) -> str:
        try:
            resp = requests.post(self.endpoint, json={"prompt": prompt}, timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise TransportError(
                f"editor service unreachable: {exc}", endpoint=self.endpoint
            ) from exc
        try:
            return str(resp.json()["text"])
        except (ValueError, KeyError) as exc:
            raise ProtocolError(f"malformed editor response: {exc}") from exc


def read_recorded_edits(path) -> dict[str, str]:
    """Load a recorded-editor file: jsonl of {"id": ..., "edited": ...}."""
    edits: dict[str, str] = {}
    for rec in read_jsonl(path):
        edits[str(rec["id"])] = str(rec["edited"])
    return edits
