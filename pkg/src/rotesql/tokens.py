"""Token counting for prompt cost accounting.

Exact counts come from a single-file BPE tokenizer definition (vocabulary +
merges, the common tokenizer.json layout). When no file is configured, a
whitespace-and-punctuation heuristic stands in and is labeled approximate so
cost reports cannot silently pass off estimates as measurements.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from rotesql.errors import TokenizerLoadError

_HEURISTIC_PIECE = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class HeuristicCounter:
    """Fallback counter: one token per word or punctuation mark."""

    label: str = "approximate"

    def count(self, text: str) -> int:
        return len(_HEURISTIC_PIECE.findall(text))


class BpeCounter:
    """Exact counter backed by a tokenizer definition file."""

    label = "exact"

    def __init__(self, tokenizer_file: str) -> None:
        try:
            from tokenizers import Tokenizer
        except ImportError as exc:  # pragma: no cover - environment guard
            raise TokenizerLoadError(f"tokenizers library unavailable: {exc}")
        try:
            self._tokenizer = Tokenizer.from_file(tokenizer_file)
        except Exception as exc:
            raise TokenizerLoadError(
                f"cannot load tokenizer file {tokenizer_file!r}: {exc}"
            ) from exc
        self.source_file = tokenizer_file

    def count(self, text: str) -> int:
        if not text:
            return 0
        return len(self._tokenizer.encode(text, add_special_tokens=False).ids)


def load_counter(tokenizer_file: str | None):
    """File path -> exact counter; None -> labeled heuristic."""
    if tokenizer_file is None:
        return HeuristicCounter()
    return BpeCounter(tokenizer_file)


def count_tokens(text: str, counter) -> int:
    """Count tokens under the supplied counter; '' is always 0."""
    if not text:
        return 0
    return counter.count(text)
