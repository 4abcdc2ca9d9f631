"""Per-database text-to-SQL data synthesis, prompt costing, and evaluation.

The package covers the loop around training a fleet of small per-database
SQL experts: profile a database into a catalog, extract SQL skeletons from
a seed corpus, synthesize execution-validated question-SQL pairs, assemble
expert training sets (with ablation variants), route questions to experts,
and score predictions by execution accuracy. Prompt rendering supports
three competing serializations whose token and FLOPS costs can be compared
directly.
"""

from rotesql.errors import (
    CatalogError,
    ConfigError,
    DatasetError,
    EvalError,
    ProviderError,
    RotesqlError,
    RoutingError,
    SkeletonExtractionError,
    SqlLexError,
    TokenizerLoadError,
)

__version__ = "0.1.0"

__all__ = [
    "CatalogError",
    "ConfigError",
    "DatasetError",
    "EvalError",
    "ProviderError",
    "RotesqlError",
    "RoutingError",
    "SkeletonExtractionError",
    "SqlLexError",
    "TokenizerLoadError",
    "__version__",
]
