"""Sentence similarity scorers: BLEU-4, ROUGE-L and METEOR-lite."""

from __future__ import annotations

import enum
from functools import lru_cache
from typing import Sequence

from .bleu import SMOOTHING_EPS, bleu4
from .meteor import meteor_lite
from .porter import stem
from .rouge import rouge_l
from .tokenize import TOKENIZER_ID, normalize, tokenize

TokenSeq = Sequence[str]


class ScorerKind(str, enum.Enum):
    BLEU4 = "BLEU4"
    ROUGE_L = "ROUGE_L"
    METEOR_LITE = "METEOR_LITE"

    @classmethod
    def parse(cls, name: str) -> "ScorerKind":
        key = name.strip().upper().replace("-", "_")
        aliases = {"BLEU": "BLEU4", "BLEU_4": "BLEU4", "ROUGE": "ROUGE_L",
                   "ROUGEL": "ROUGE_L", "METEOR": "METEOR_LITE"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown scorer {name!r}; choose from "
                             f"{', '.join(k.value for k in cls)}") from None


_SCORERS = {
    ScorerKind.BLEU4: bleu4,
    ScorerKind.ROUGE_L: rouge_l,
    ScorerKind.METEOR_LITE: meteor_lite,
}


def score(kind: ScorerKind, candidate: TokenSeq, references: Sequence[TokenSeq]) -> float:
    return _SCORERS[ScorerKind(kind)](candidate, references)


@lru_cache(maxsize=262144)
def tokens(text: str) -> tuple[str, ...]:
    """Cached, immutable :func:`tokenize`."""
    return tuple(tokenize(text))


def score_sentences(kind: ScorerKind, candidate: str, references: Sequence[str]) -> float:
    return score(kind, tokens(candidate), [tokens(r) for r in references])


def scorer_metadata() -> dict:
    """Settings that change absolute scores; stamped into every report."""
    return {
        "tokenizer": TOKENIZER_ID,
        "bleu_smoothing_eps": SMOOTHING_EPS,
        "rouge_l_beta": 1.2,
        "meteor": "exact+porter-stem, alpha=0.9, gamma=0.5, beta=3, no synonyms",
    }


__all__ = [
    "ScorerKind", "TokenSeq", "bleu4", "meteor_lite", "normalize", "rouge_l",
    "score", "score_sentences", "scorer_metadata", "stem", "tokenize", "tokens",
]
