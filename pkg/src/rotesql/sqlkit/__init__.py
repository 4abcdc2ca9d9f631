"""SQL tooling: tokenizing, skeleton abstraction, matching, execution."""

from rotesql.sqlkit.execute import (
    ERROR_MISSING_IDENTIFIER,
    ERROR_OTHER,
    ERROR_SYNTAX,
    ERROR_TIMEOUT,
    ExecutionOutcome,
    validate_executable,
)
from rotesql.sqlkit.match import string_match, structural_key, structural_match
from rotesql.sqlkit.skeleton import (
    SqlSkeleton,
    applicable,
    dedup_skeletons,
    extract_skeleton,
)

__all__ = [
    "ERROR_MISSING_IDENTIFIER",
    "ERROR_OTHER",
    "ERROR_SYNTAX",
    "ERROR_TIMEOUT",
    "ExecutionOutcome",
    "SqlSkeleton",
    "applicable",
    "dedup_skeletons",
    "extract_skeleton",
    "string_match",
    "structural_key",
    "structural_match",
    "validate_executable",
]
