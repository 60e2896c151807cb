"""Fixed-rule word tokenizer shared by every scorer."""

from __future__ import annotations

PUNCTUATION = ".,!?;:\"'()[]"

_STRIP = str.maketrans("", "", PUNCTUATION)

#: Recorded in report metadata; absolute scores depend on it.
TOKENIZER_ID = "lowercase+strip:" + PUNCTUATION + "+whitespace-split"


def tokenize(text: str) -> list[str]:
    """Lowercase, delete punctuation characters, split on whitespace.

    >>> tokenize("It's 5 o'clock.")
    ['its', '5', 'oclock']
    """
    return text.lower().translate(_STRIP).split()


def normalize(text: str) -> str:
    """Canonical sentence form used for vote counting."""
    return " ".join(tokenize(text))
