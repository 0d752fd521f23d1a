"""Approximate string similarity used for keyword selection.

All scores are real-valued percentages in [0, 100]. Inputs to the ratio
functions are expected to be preprocessed (see :func:`preprocess`); the
functions themselves do no normalization.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class NormalizedText:
    """A string together with its normalized form and token split."""

    original: str
    normalized: str
    tokens: tuple[str, ...]


@lru_cache(maxsize=65536)
def preprocess(text: str) -> NormalizedText:
    """Lowercase, map every non-alphanumeric char to a space, collapse runs.

    Idempotent on its own ``normalized`` output. Non-ASCII alphanumerics
    pass through unchanged; no further Unicode folding is applied.
    """
    lowered = text.lower()
    # Lowercasing can introduce combining marks (non-alphanumeric); they
    # must be spaced out like any other punctuation, so lowercase first.
    spaced = "".join(ch if ch.isalnum() else " " for ch in lowered)
    tokens = tuple(spaced.split())
    return NormalizedText(original=text, normalized=" ".join(tokens), tokens=tokens)


def indel_distance(a: str, b: str) -> int:
    """Minimum number of insertions plus deletions turning ``a`` into ``b``."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        append = cur.append
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                append(prev[j - 1])
            else:
                left = cur[j - 1]
                up = prev[j]
                append((left if left < up else up) + 1)
        prev = cur
    return prev[-1]


def simple_ratio(a: str, b: str) -> float:
    """Indel-normalized similarity; 100 iff the strings are identical."""
    total = len(a) + len(b)
    if total == 0:
        return 100.0
    return 100.0 * (1.0 - indel_distance(a, b) / total)


def partial_ratio(needle: str, haystack: str) -> float:
    """Best :func:`simple_ratio` of the needle against any same-length window.

    The shorter argument plays the needle. Scans every start offset, so a
    needle occurring verbatim in the haystack always scores 100. Cost is
    O(len(haystack) * len(needle)^2); needles here are short keywords.
    """
    if len(needle) > len(haystack):
        needle, haystack = haystack, needle
    if not needle:
        return 100.0
    size = len(needle)
    best = 0.0
    for start in range(len(haystack) - size + 1):
        score = simple_ratio(needle, haystack[start : start + size])
        if score > best:
            best = score
            if best == 100.0:
                break
    return best


def token_set_ratio(a: str, b: str) -> float:
    """Similarity of the unique-token intersection against both differences.

    Compares the sorted common tokens t0 with t0 plus each side's leftover
    tokens, and the two combined strings with each other; returns the max.
    """
    tokens_a = set(a.split())
    tokens_b = set(b.split())
    common = sorted(tokens_a & tokens_b)
    t0 = " ".join(common)
    d1 = " ".join(common + sorted(tokens_a - tokens_b))
    d2 = " ".join(common + sorted(tokens_b - tokens_a))
    return max(simple_ratio(t0, d1), simple_ratio(t0, d2), simple_ratio(d1, d2))
