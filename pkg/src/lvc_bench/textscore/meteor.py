"""METEOR without synonym/paraphrase stages: exact match, then Porter stems.

Parameters are the METEOR 1.0 defaults: ``alpha = 0.9``, penalty weight 0.5,
penalty exponent 3.
"""

from __future__ import annotations

from typing import Sequence

from .porter import stem

ALPHA = 0.9
GAMMA = 0.5
PENALTY_EXP = 3.0


def _align_stage(cand_keys, ref_keys, cand_free, ref_free, pairs):
    # Pair the k-th free candidate occurrence of a key with the k-th free
    # reference occurrence of the same key; order-preserving within a key.
    ref_slots: dict[str, list[int]] = {}
    for j in sorted(ref_free):
        ref_slots.setdefault(ref_keys[j], []).append(j)
    for i in sorted(cand_free):
        slots = ref_slots.get(cand_keys[i])
        if slots:
            j = slots.pop(0)
            pairs.append((i, j))
            cand_free.discard(i)
            ref_free.discard(j)


def align(candidate: Sequence[str], reference: Sequence[str]) -> list[tuple[int, int]]:
    """Unigram alignment as ``(candidate_index, reference_index)`` pairs."""
    pairs: list[tuple[int, int]] = []
    cand_free = set(range(len(candidate)))
    ref_free = set(range(len(reference)))
    _align_stage(candidate, reference, cand_free, ref_free, pairs)
    _align_stage(
        [stem(t) for t in candidate], [stem(t) for t in reference],
        cand_free, ref_free, pairs,
    )
    return sorted(pairs)


def count_chunks(pairs: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in sorted(pairs):
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def _single(candidate: Sequence[str], reference: Sequence[str]) -> float:
    if not candidate or not reference:
        return 0.0
    pairs = align(candidate, reference)
    m = len(pairs)
    if m == 0:
        return 0.0
    prec = m / len(candidate)
    rec = m / len(reference)
    f_mean = prec * rec / (ALPHA * prec + (1 - ALPHA) * rec)
    penalty = GAMMA * (count_chunks(pairs) / m) ** PENALTY_EXP
    return f_mean * (1.0 - penalty)


def meteor_lite(candidate: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    if not references:
        raise ValueError("meteor_lite needs at least one reference")
    return max(_single(candidate, ref) for ref in references)
