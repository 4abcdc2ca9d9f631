"""Exception taxonomy shared across the package.

Every error raised by library code derives from RotesqlError so CLI code can
map failures onto exit codes in one place: usage errors exit 1 (click owns
those), data/config errors exit 2, provider errors exit 3.
"""

from __future__ import annotations


class RotesqlError(Exception):
    """Base class for all package errors."""


class ConfigError(RotesqlError):
    """Workspace config is missing, malformed, or points at absent files."""


class CatalogError(RotesqlError):
    """Database could not be opened or profiled."""


class SqlLexError(RotesqlError):
    """Raw SQL text could not be tokenized (e.g. unterminated string)."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at offset {position}")
        self.position = position


class SkeletonExtractionError(RotesqlError):
    """Statement could not be abstracted into a skeleton template."""


class TokenizerLoadError(RotesqlError):
    """Tokenizer vocabulary file is missing or malformed."""


class DatasetError(RotesqlError):
    """Training-set assembly violated a contract (mixed targets, bad rows)."""


class EvalError(RotesqlError):
    """Evaluation input is unusable (missing database, empty gold set)."""


class RoutingError(RotesqlError):
    """No expert/endpoint is registered for the requested database id."""


class ProviderError(RotesqlError):
    """Generation backend failed after exhausting retries."""
