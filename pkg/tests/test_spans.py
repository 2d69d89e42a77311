from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ctxspan.errors import ValidationError
from ctxspan.spans import CharSpanSet


def test_constructor_enforces_invariants():
    CharSpanSet(((0, 2), (2, 4)), 4)  # touching is fine
    with pytest.raises(ValidationError):
        CharSpanSet(((0, 0),), 4)  # empty interval
    with pytest.raises(ValidationError):
        CharSpanSet(((0, 5),), 4)  # out of bounds
    with pytest.raises(ValidationError):
        CharSpanSet(((2, 4), (0, 1)), 4)  # unsorted
    with pytest.raises(ValidationError):
        CharSpanSet(((0, 3), (2, 4)), 4)  # overlap


def test_from_intervals_sorts_and_merges_overlaps():
    spans = CharSpanSet.from_intervals([[5, 8], [0, 3], [2, 4]], 10)
    assert spans.to_pairs() == [[0, 4], [5, 8]]
    # touching intervals stay separate
    assert CharSpanSet.from_intervals([[0, 2], [2, 4]], 4).to_pairs() == [[0, 2], [2, 4]]


def test_char_indices():
    assert CharSpanSet.from_intervals([[1, 3], [5, 6]], 8).char_indices() == {1, 2, 5}
    assert CharSpanSet.empty(8).char_indices() == set()


@given(
    st.lists(st.tuples(st.integers(0, 30), st.integers(1, 8)), max_size=6),
)
def test_from_intervals_always_canonical(pairs):
    spans = CharSpanSet.from_intervals([[s, s + w] for s, w in pairs], 40)
    flat = spans.to_pairs()
    assert flat == sorted(flat)
    for (_, end), (start, _) in zip(flat, flat[1:]):
        assert start >= end
    # canonicalization preserves the covered set
    expected = set()
    for s, w in pairs:
        expected.update(range(s, s + w))
    assert spans.char_indices() == expected
