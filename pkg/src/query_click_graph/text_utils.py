"""Text normalization helpers for query strings and URLs."""

from __future__ import annotations

import string
from typing import AbstractSet, Dict, List

ASCII_PUNCTUATION = string.punctuation

_ZERO_WIDTH = {0x200B: " ", 0x200C: "", 0x200D: "", 0xFEFF: ""}


def punctuation_table(punctuation: str = ASCII_PUNCTUATION) -> Dict[int, str]:
    """Translation table mapping every punctuation character to a space."""
    table = {ord(char): " " for char in punctuation}
    table.update(_ZERO_WIDTH)
    return table


_DEFAULT_TABLE = punctuation_table()


def normalize_query(
    text: str,
    stopwords: AbstractSet[str] = frozenset(),
    table: Dict[int, str] = _DEFAULT_TABLE,
) -> str:
    """Lowercase, blank out punctuation, drop stop words, collapse whitespace.

    Punctuation becomes a space rather than vanishing, so ``"ask.com"`` turns
    into ``"ask com"``. The result is a fixed point of this function.
    """
    tokens = (text or "").lower().translate(table).split()
    if stopwords:
        tokens = [token for token in tokens if token not in stopwords]
    return " ".join(tokens)


def normalize_url(url: str) -> str:
    return (url or "").strip().lower()


def token_count(query: str) -> int:
    """Whitespace token count, the query length used by L@n."""
    return len(query.split())


def load_word_list(lines: List[str]) -> frozenset[str]:
    """Build a stop-word set from one-word-per-line text, ignoring comments."""
    words = set()
    for line in lines:
        entry = line.strip().lower()
        if not entry or entry.startswith("#"):
            continue
        words.add(entry)
    return frozenset(words)
