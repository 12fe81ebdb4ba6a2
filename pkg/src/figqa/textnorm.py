"""Single source of truth for text normalization.

The dataset reports and the BLEU scorer must agree on tokenization, so
both import from here.
"""

from __future__ import annotations

import string

_PUNCT = string.punctuation


def tokenize(text: str) -> list[str]:
    """Case-folded whitespace tokens with surrounding punctuation stripped."""
    tokens = []
    for raw in text.casefold().split():
        tok = raw.strip(_PUNCT)
        if tok:
            tokens.append(tok)
    return tokens


def normalize_question(text: str) -> str:
    """Dedup key: case-folded, whitespace-collapsed question text."""
    return " ".join(text.casefold().split())
