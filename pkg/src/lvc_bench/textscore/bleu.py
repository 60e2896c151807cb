"""Sentence-level BLEU-4 with additive epsilon smoothing."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

MAX_N = 4
SMOOTHING_EPS = 1e-9


def ngrams(tokens: Sequence[str], n: int):
    return tokens if n == 1 else zip(*(tokens[i:] for i in range(n)))


def ngram_counts(tokens: Sequence[str], n: int) -> dict:
    counts: dict = {}
    for g in ngrams(tokens, n):
        counts[g] = counts.get(g, 0) + 1
    return counts


def closest_ref_length(cand_len: int, ref_lens: Sequence[int]) -> int:
    # ties go to the shorter reference
    return min(ref_lens, key=lambda r: (abs(r - cand_len), r))


@lru_cache(maxsize=1 << 16)
def _all_counts(tokens: tuple) -> tuple[dict, ...]:
    """n-gram count tables for n = 1..4 (shared; never mutate)."""
    return tuple(ngram_counts(tokens, n) for n in range(1, MAX_N + 1))


def bleu4(candidate: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """BLEU-4 of one candidate against one or more references.

    Clipped n-gram precisions for n = 1..4 (each n-gram count clipped at its
    maximum count in any single reference), smoothed as
    ``(matches + eps) / (total + eps)``, combined by geometric mean and scaled
    by the brevity penalty against the closest reference length. Orders longer
    than the candidate contribute ``eps / eps = 1``.
    """
    if not references:
        raise ValueError("bleu4 needs at least one reference")
    c = len(candidate)
    if c == 0:
        return 0.0
    cand = _all_counts(tuple(candidate))
    refs = [_all_counts(tuple(ref)) for ref in references]
    log_sum = 0.0
    matches = 1
    for n in range(min(c, MAX_N)):
        # no k-gram match means no longer match either
        if matches:
            budget = refs[0][n] if len(refs) == 1 else _merge(refs, n)
            matches = 0
            for gram, k in cand[n].items():
                r = budget.get(gram)
                if r:
                    matches += k if k < r else r
        log_sum += math.log((matches + SMOOTHING_EPS) / (c - n + SMOOTHING_EPS))
    r = len(references[0]) if len(references) == 1 else closest_ref_length(c, [len(ref) for ref in references])
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return min(1.0, bp * math.exp(log_sum / MAX_N))


def _merge(tables, n: int) -> dict:
    budget: dict = {}
    for t in tables:
        for gram, k in t[n].items():
            if k > budget.get(gram, 0):
                budget[gram] = k
    return budget
