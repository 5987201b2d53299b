"""Sequence similarity used by the consistency gate and the label linker.

The default scorer is cosine similarity over character-trigram counts:
deterministic, language-agnostic, and adequate at desk scale. Neural
encoders can be swapped in behind the same protocol.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Protocol


class SimilarityScorer(Protocol):
    def score(self, a: str, b: str) -> float:
        """Symmetric, in [0, 1], and score(a, a) == 1."""
        ...


def _trigrams(s: str) -> Counter:
    s = s.casefold()
    return Counter(s[i : i + 3] for i in range(len(s) - 2))


class TrigramCosineScorer:
    def score(self, a: str, b: str) -> float:
        ga, gb = _trigrams(a), _trigrams(b)
        if not ga or not gb:
            # too short for trigrams; only exact agreement counts
            return 1.0 if a.casefold() == b.casefold() else 0.0
        dot = sum(count * gb[gram] for gram, count in ga.items())
        if dot == 0:
            return 0.0
        norm = math.sqrt(sum(c * c for c in ga.values()) * sum(c * c for c in gb.values()))
        return dot / norm
