"""Deterministic character-trigram language model with add-one smoothing.

Desk-scale stand-in for a remote scorer: the full pipeline can run with no
external model while remaining exactly reproducible. Conditioning uses the
last two characters of the preceding text (fewer at the start), and every
character outside the training alphabet maps to a single unknown symbol.
"""

from __future__ import annotations

import math
from collections import Counter

from .errors import ValidationError

class ToyModel:
    def __init__(self, training_text: str):
        if len(training_text) < 3:
            raise ValidationError("training_text must have at least 3 characters")
        self.alphabet = sorted(set(training_text))
        self.vocab_size = len(self.alphabet) + 1  # plus the unknown symbol
        self._known = set(self.alphabet)
        self.unknown = next(ch for ch in map(chr, range(0x110000)) if ch not in self._known)
        # ngram_counts[n][ctx][ch] and context_totals[n][ctx] for n = 0, 1, 2
        self.ngram_counts: list[dict[str, Counter]] = [{}, {}, {}]
        self.context_totals: list[Counter] = [Counter(), Counter(), Counter()]
        for n in range(3):
            counts = self.ngram_counts[n]
            totals = self.context_totals[n]
            for i in range(n, len(training_text)):
                ctx = training_text[i - n : i]
                ch = training_text[i]
                counts.setdefault(ctx, Counter())[ch] += 1
                totals[ctx] += 1

    def _map(self, ch: str) -> str:
        return ch if ch in self._known else self.unknown

    def char_logprob(self, context: str, ch: str) -> float:
        """ln P(ch | last two chars of context), add-one smoothed."""
        ctx = "".join(self._map(c) for c in context[-2:])
        n = len(ctx)
        counts = self.ngram_counts[n].get(ctx)
        total = self.context_totals[n].get(ctx, 0)
        hits = counts.get(self._map(ch), 0) if counts else 0
        return math.log((hits + 1) / (total + self.vocab_size))

    def char_prob(self, context: str, ch: str) -> float:
        return math.exp(self.char_logprob(context, ch))


def toy_lm_fit(training_text: str) -> ToyModel:
    return ToyModel(training_text)


def toy_lm_score(model: ToyModel, prefix: str, tokens: list[str]) -> list[float]:
    """ln-probability per token: the sum of its characters' conditional logprobs.

    Token i is conditioned on prefix plus all earlier tokens, so the result
    is a forced-continuation score of the exact token sequence.
    """
    if not tokens:
        raise ValidationError("tokens must be non-empty")
    values = []
    context = prefix
    for token in tokens:
        logprob = 0.0
        for ch in token:
            logprob += model.char_logprob(context, ch)
            context += ch
        values.append(logprob)
    return values
