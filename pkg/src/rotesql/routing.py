"""Database-ID routing: pick the expert that answers a question.

Routing is a pure lookup. A route table maps each database id to an expert
reference (an endpoint URL or a local manifest path); the wildcard entry
"*" stands for the single merged expert produced by the single_model
ablation and catches every id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from rotesql.errors import RoutingError

MERGED_KEY = "*"


@dataclass(frozen=True)
class ExpertRoute:
    routes: dict[str, str] = field(default_factory=dict)

    def known_ids(self) -> list[str]:
        return sorted(k for k in self.routes if k != MERGED_KEY)


def route(question: str, db_id: str, routes: ExpertRoute) -> str:
    """Deterministic expert lookup; unknown ids list the registered ones."""
    target = routes.routes.get(db_id)
    if target is None:
        target = routes.routes.get(MERGED_KEY)
    if target is None:
        known = ", ".join(routes.known_ids()) or "none"
        raise RoutingError(f"no expert for db_id {db_id!r} (known: {known})")
    return target


def load_routes(path: str) -> ExpertRoute:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise RoutingError(f"cannot load routes from {path}: {exc}")
    if not isinstance(raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
    ):
        raise RoutingError(f"routes file {path} must map db_id to expert reference")
    return ExpertRoute(routes=raw)
