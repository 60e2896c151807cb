"""ROUGE-L sentence F-measure."""

from __future__ import annotations

from typing import Sequence

BETA = 1.2


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length (bit-parallel, Hyyro 2004)."""
    if not a or not b:
        return 0
    masks: dict[str, int] = {}
    for i, y in enumerate(b):
        masks[y] = masks.get(y, 0) | (1 << i)
    full = (1 << len(b)) - 1
    v = full
    for x in a:
        u = v & masks.get(x, 0)
        v = ((v + u) | (v - u)) & full
    return len(b) - bin(v).count("1")


def rouge_l(candidate: Sequence[str], references: Sequence[Sequence[str]], beta: float = BETA) -> float:
    """Best LCS-based F-measure of ``candidate`` over the references."""
    if not references:
        raise ValueError("rouge_l needs at least one reference")
    best = 0.0
    if not candidate:
        return best
    b2 = beta * beta
    for ref in references:
        lcs = lcs_length(candidate, ref)
        if lcs == 0:
            continue
        prec = lcs / len(candidate)
        rec = lcs / len(ref)
        best = max(best, (1 + b2) * prec * rec / (rec + b2 * prec))
    return best
