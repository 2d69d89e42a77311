"""Character-span sets: sorted, disjoint, half-open intervals over an output string.

Both predicted and gold hallucination annotations are values of this type,
so span algebra lives here rather than in any single pipeline stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import ValidationError


@dataclass(frozen=True)
class CharSpanSet:
    """Sorted, pairwise-disjoint half-open [start, end) intervals."""

    spans: tuple[tuple[int, int], ...]
    text_len: int

    def __post_init__(self):
        if self.text_len < 0:
            raise ValidationError(f"negative text_len {self.text_len}")
        prev_end = -1
        for start, end in self.spans:
            if not (0 <= start < end <= self.text_len):
                raise ValidationError(
                    f"span ({start}, {end}) out of bounds for text_len {self.text_len}"
                )
            if start < prev_end:
                raise ValidationError(f"span ({start}, {end}) overlaps or is unsorted")
            prev_end = end

    @classmethod
    def empty(cls, text_len: int) -> "CharSpanSet":
        return cls((), text_len)

    @classmethod
    def from_intervals(cls, pairs: Iterable[Sequence[int]], text_len: int) -> "CharSpanSet":
        """Canonicalize arbitrary intervals: sort and merge overlaps.

        Touching intervals are kept separate; they are already disjoint and
        merging them would change the representation produced by callers
        that care about boundaries (e.g. edit-script extraction).
        """
        cleaned = []
        for pair in pairs:
            if len(pair) != 2:
                raise ValidationError(f"interval {pair!r} is not a [start, end) pair")
            start, end = int(pair[0]), int(pair[1])
            if not (0 <= start < end <= text_len):
                raise ValidationError(
                    f"interval ({start}, {end}) out of bounds for text_len {text_len}"
                )
            cleaned.append((start, end))
        cleaned.sort()
        merged: list[tuple[int, int]] = []
        for start, end in cleaned:
            if merged and start < merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], end))
            else:
                merged.append((start, end))
        return cls(tuple(merged), text_len)

    def char_indices(self) -> set[int]:
        """The set of character indices covered by the intervals."""
        covered: set[int] = set()
        for start, end in self.spans:
            covered.update(range(start, end))
        return covered

    def to_pairs(self) -> list[list[int]]:
        return [[start, end] for start, end in self.spans]

    def is_empty(self) -> bool:
        return not self.spans

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.spans)

    def __len__(self) -> int:
        return len(self.spans)
