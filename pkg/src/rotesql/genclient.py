"""Generation client: turn skeletons into validated NLQ-SQL pairs.

Two stages run against a chat-completion backend: SQL generation (fill a
skeleton's placeholders with real tables, columns, and values) and NLQ
generation (describe a validated SQL as a question). Skeleton extraction
itself is deterministic and lives in sqlkit. Candidates that fail read-only
execution are filtered; accepted pairs feed a FIFO few-shot pool so later
prompts carry real exemplars.

The HTTP provider speaks the common messages-based chat API with the key
taken from an environment variable. The mock provider is deterministic under
a seed and constructs fills directly from the catalog, so the whole pipeline
runs offline in tests.
"""

from __future__ import annotations

import json
import math
import os
import random
import re
import threading
import time
from collections import deque
from dataclasses import dataclass

from rotesql.catalog import DatabaseCatalog
from rotesql.errors import ProviderError, RotesqlError
from rotesql.sqlkit.execute import validate_executable
from rotesql.sqlkit.skeleton import SqlSkeleton, applicable, extract_skeleton

STAGE_SQL = "sql"
STAGE_NLQ = "nlq"
DEFAULT_POOL_CAP = 8

SQL_STAGE_INSTRUCTION = (
    "You write SQLite queries. Fill every placeholder in the given SQL"
    " template (table_name, col_name, value, and their numbered variants)"
    " with tables, columns, and literal values that exist in the database"
    " described below. Keep the template's structure. If the database does"
    " not have enough tables for the template, reply with the single word"
    " SKIP. Answer with one SQL statement in a fenced code block."
)
NLQ_STAGE_INSTRUCTION = (
    "You write natural-language questions. Given a SQL query and the"
    " database it runs on, write one clear question a person would ask"
    " whose answer is exactly what the query returns. Reply with the"
    " question text only."
)


@dataclass
class ProviderConfig:
    """Connection and sampling settings for the generation backend."""

    provider: str = "mock"  # "mock" or "http"
    endpoint: str = ""
    model: str = "mock-model"
    api_key_env: str = "ROTESQL_API_KEY"
    temperature_skeleton: float = 0.9
    temperature_sql: float = 1.0
    temperature_nlq: float = 0.0
    max_retries: int = 3
    request_timeout: float = 60.0
    max_concurrency: int = 4
    seed: int = 0
    mock_invalid_every: int = 0  # corrupt every k-th mock SQL; 0 disables
    exec_timeout: float = 30.0

    def __post_init__(self) -> None:
        for name in ("temperature_skeleton", "temperature_sql", "temperature_nlq"):
            value = getattr(self, name)
            if not 0.0 <= value <= 2.0:
                raise RotesqlError(f"{name} must be within [0, 2], got {value}")

    def temperature_for(self, stage: str) -> float:
        return {
            "skeleton": self.temperature_skeleton,
            STAGE_SQL: self.temperature_sql,
            STAGE_NLQ: self.temperature_nlq,
        }[stage]


@dataclass
class StageRequest:
    """One backend call: chat messages plus structured context for the mock."""

    stage: str
    messages: list[dict]
    temperature: float
    catalog: DatabaseCatalog | None = None
    skeleton: SqlSkeleton | None = None
    sql: str | None = None


@dataclass(frozen=True)
class ExecutionStatus:
    validated: bool
    row_count: int = 0


@dataclass(frozen=True)
class SynthPair:
    db_id: str
    nlq: str
    sql: str
    skeleton_id: str
    model: str
    temperature: float
    attempt: int
    execution_status: ExecutionStatus

    def to_json(self) -> dict:
        return {
            "db_id": self.db_id,
            "nlq": self.nlq,
            "sql": self.sql,
            "skeleton_id": self.skeleton_id,
            "model": self.model,
            "temperature": self.temperature,
            "attempt": self.attempt,
            "validated": self.execution_status.validated,
            "row_count": self.execution_status.row_count,
        }

    @classmethod
    def from_json(cls, record: dict) -> "SynthPair":
        return cls(
            db_id=record["db_id"],
            nlq=record["nlq"],
            sql=record["sql"],
            skeleton_id=record["skeleton_id"],
            model=record.get("model", ""),
            temperature=record.get("temperature", 0.0),
            attempt=record.get("attempt", 1),
            execution_status=ExecutionStatus(
                validated=record.get("validated", True),
                row_count=record.get("row_count", 0),
            ),
        )


class FewShotPool:
    """Per-stage FIFO of accepted exemplars, oldest evicted at capacity."""

    def __init__(self, cap: int = DEFAULT_POOL_CAP) -> None:
        if cap <= 0:
            raise RotesqlError("few-shot pool capacity must be positive")
        self.cap = cap
        self._stages: dict[str, deque] = {}
        self._lock = threading.Lock()

    def add(self, stage: str, exemplar: tuple[str, str]) -> None:
        with self._lock:
            bucket = self._stages.setdefault(stage, deque(maxlen=self.cap))
            bucket.append(exemplar)

    def exemplars(self, stage: str) -> list[tuple[str, str]]:
        with self._lock:
            return list(self._stages.get(stage, ()))

    def size(self, stage: str) -> int:
        with self._lock:
            return len(self._stages.get(stage, ()))


def accumulate_exemplars(pool: FewShotPool, accepted: list[SynthPair]) -> FewShotPool:
    """FIFO-extend the pool from validated pairs only."""
    for pair in accepted:
        if not pair.execution_status.validated:
            raise RotesqlError(
                "few-shot exemplars must come from execution-validated pairs"
            )
        template = extract_skeleton(pair.sql).template
        pool.add(STAGE_SQL, (template, pair.sql))
        pool.add(STAGE_NLQ, (pair.sql, pair.nlq))
    return pool


def catalog_block(catalog: DatabaseCatalog, samples_per_column: int = 2) -> str:
    """Schema serialization shared by generation prompts."""
    from rotesql.promptkit import render_full_schema

    record = render_full_schema(catalog, question="-", samples_per_column=samples_per_column)
    # Strip the trailing question scaffold; generation prompts add their own.
    lines = record.text.splitlines()
    return "\n".join(
        line for line in lines if line not in ("question: -", "SQL:")
    )


_FENCED = re.compile(r"```[a-zA-Z]*\s*\n?(.*?)```", re.DOTALL)


def extract_candidate(text: str) -> str | None:
    """First fenced code block, else first SELECT/WITH line, else None."""
    m = _FENCED.search(text)
    if m:
        candidate = m.group(1).strip()
        return candidate or None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.lower().startswith(("select", "with")):
            return stripped
    return None


class HttpProvider:
    """Chat-completion client with bounded retries and concurrency."""

    def __init__(self, config: ProviderConfig) -> None:
        import httpx

        if not config.endpoint:
            raise ProviderError("http provider requires an endpoint URL")
        self._config = config
        self._client = httpx.Client(timeout=config.request_timeout)
        self._semaphore = threading.BoundedSemaphore(config.max_concurrency)

    def complete(self, request: StageRequest) -> str:
        import httpx

        config = self._config
        payload = {
            "model": config.model,
            "messages": request.messages,
            "temperature": request.temperature,
        }
        headers = {}
        api_key = os.environ.get(config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(config.max_retries + 1):
            if attempt:
                time.sleep(min(2.0 ** attempt, 8.0))
            try:
                with self._semaphore:
                    response = self._client.post(
                        config.endpoint, json=payload, headers=headers
                    )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = ProviderError(
                    f"provider returned HTTP {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise ProviderError(
                    f"provider returned HTTP {response.status_code}: "
                    f"{response.text[:200]}"
                )
            body = response.json()
            try:
                return body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"malformed provider response: {exc}")
        raise ProviderError(f"provider failed after retries: {last_error}")

    def close(self) -> None:
        self._client.close()


_PLACEHOLDER_WORD = re.compile(r"\b(table_name|col_name|value)(_\d+)?\b")
_NUMERIC_TYPES = ("int", "real", "floa", "doub", "num", "dec", "bool")
_AGG_NUMERIC = re.compile(r"\b(avg|sum|total)\(\s*(col_name(?:_\d+)?)")


class MockProvider:
    """Deterministic offline backend that fills skeletons from the catalog.

    Each call draws from an RNG seeded by (seed, call ordinal, stage), so a
    fixed seed replays the exact same outputs. Column choices cycle through
    a shuffled eligible list, so asking for a handful of candidates covers
    distinct columns instead of repeating one. With invalid_every=k, every
    k-th SQL call emits a query against a nonexistent column to exercise the
    execution filter.
    """

    def __init__(self, seed: int = 0, invalid_every: int = 0) -> None:
        self._seed = seed
        self._invalid_every = invalid_every
        self._calls = 0
        self._lock = threading.Lock()
        # (db, template, tables, pool kind) -> rotation cursor, so repeated
        # candidates for one skeleton walk the columns instead of repeating.
        self._cursors: dict[tuple, int] = {}

    def complete(self, request: StageRequest) -> str:
        with self._lock:
            self._calls += 1
            ordinal = self._calls
        rng = random.Random(f"{self._seed}:{ordinal}:{request.stage}")
        if request.stage == STAGE_SQL:
            return self._fill_skeleton(request, rng, ordinal)
        if request.stage == STAGE_NLQ:
            return self._describe_sql(request)
        raise ProviderError(f"mock provider has no stage {request.stage!r}")

    # -- SQL stage -----------------------------------------------------

    def _fill_skeleton(self, request: StageRequest, rng, ordinal: int) -> str:
        catalog = request.catalog
        skeleton = request.skeleton
        if catalog is None or skeleton is None:
            raise ProviderError("mock SQL stage needs catalog and skeleton context")
        usable = [t for t in catalog.tables if t.columns]
        if skeleton.required_tables > len(usable):
            return "SKIP"
        corrupt = bool(
            self._invalid_every and ordinal % self._invalid_every == 0
        )
        template = skeleton.template
        placeholders = self._placeholders_in(template)
        table_count = min(max(skeleton.required_tables, 1), len(usable))
        tables = sorted(
            rng.sample(usable, table_count), key=lambda t: t.name
        )
        qualify = len(tables) > 1
        numeric_slots = {m.group(2) for m in _AGG_NUMERIC.finditer(template)}

        assignment: dict[str, str] = {}
        chosen_columns: dict[str, tuple[str, str]] = {}
        table_order = [
            p for p in placeholders if p.startswith("table_name")
        ]
        for idx, name in enumerate(table_order):
            assignment[name] = tables[idx % len(tables)].name

        all_columns = [(t.name, c) for t in tables for c in t.columns]
        numeric_columns = [
            (tn, c)
            for tn, c in all_columns
            if any(marker in c.declared_type.lower() for marker in _NUMERIC_TYPES)
        ]
        key_base = (
            catalog.db_id,
            template,
            tuple(t.name for t in tables),
        )

        col_order = [p for p in placeholders if p.startswith("col_name")]
        used_cols: set[tuple[str, str]] = set()
        for name in col_order:
            if not all_columns:
                return "SKIP"
            numeric_wanted = name in numeric_slots and numeric_columns
            pool = numeric_columns if numeric_wanted else all_columns
            pool_key = key_base + ("numeric" if numeric_wanted else "all",)
            with self._lock:
                cursor = self._cursors.get(pool_key, 0)
                pick = None
                for offset in range(len(pool)):
                    candidate = pool[(cursor + offset) % len(pool)]
                    if candidate not in used_cols:
                        pick = candidate
                        cursor += offset + 1
                        break
                if pick is None:
                    pick = pool[cursor % len(pool)]
                    cursor += 1
                self._cursors[pool_key] = cursor
            used_cols.add(pick)
            chosen_columns[name] = (pick[0], pick[1].name)
            rendered = f"{pick[0]}.{pick[1].name}" if qualify else pick[1].name
            if corrupt:
                rendered = pick[1].name + "_zz"
                corrupt = False  # one broken identifier is enough
            assignment[name] = rendered

        value_order = [p for p in placeholders if p.startswith("value")]
        last_col = next(iter(chosen_columns.values()), None)
        for name in value_order:
            source = chosen_columns.get(self._nearest_col(name, template)) or last_col
            assignment[name] = self._literal_for(source, tables, rng)

        filled = _PLACEHOLDER_WORD.sub(
            lambda m: assignment.get(m.group(0), m.group(0)), template
        )
        return f"```sql\n{filled}\n```"

    @staticmethod
    def _placeholders_in(template: str) -> list[str]:
        seen: list[str] = []
        for m in _PLACEHOLDER_WORD.finditer(template):
            if m.group(0) not in seen:
                seen.append(m.group(0))
        return seen

    @staticmethod
    def _nearest_col(value_name: str, template: str) -> str:
        """The column placeholder mentioned last before this value slot."""
        at = template.find(value_name)
        best = ""
        for m in re.finditer(r"\bcol_name(?:_\d+)?\b", template[:at]):
            best = m.group(0)
        return best

    def _literal_for(self, source, tables, rng) -> str:
        if source is not None:
            table_name, col_name = source
            for t in tables:
                if t.name != table_name:
                    continue
                for c in t.columns:
                    if c.name != col_name or not c.samples:
                        continue
                    raw = rng.choice(c.samples).value
                    return self._quote(raw, c.declared_type)
        return "1"

    @staticmethod
    def _quote(raw: str, declared_type: str) -> str:
        low = declared_type.lower()
        if any(marker in low for marker in _NUMERIC_TYPES):
            return raw
        escaped = raw.replace("'", "''")
        return f"'{escaped}'"

    # -- NLQ stage -----------------------------------------------------

    _AGG_WORDS = {
        "avg": "average",
        "sum": "total",
        "min": "smallest",
        "max": "largest",
        "count": "number of",
    }

    def _describe_sql(self, request: StageRequest) -> str:
        sql = request.sql or ""
        simple_agg = re.fullmatch(
            r"\s*select\s+(avg|sum|min|max)\(\s*([\w.]+)\s*\)\s+from\s+(\w+)\s*;?\s*",
            sql,
            re.IGNORECASE,
        )
        if simple_agg:
            fn, col, table = simple_agg.groups()
            col = col.split(".")[-1]
            plural = table if table.endswith("s") else table + "s"
            return f"What is the {self._AGG_WORDS[fn.lower()]} {col} of the {plural}?"
        count_all = re.fullmatch(
            r"\s*select\s+count\(\s*\*\s*\)\s+from\s+(\w+)\s*;?\s*",
            sql,
            re.IGNORECASE,
        )
        if count_all:
            return f"How many entries are there in {count_all.group(1)}?"
        idents, literal = self._mentionables(sql)
        subject = " and ".join(idents[:2]) if idents else "everything"
        origin = idents[-1] if idents else "the database"
        clause = f" matching {literal}" if literal else ""
        return f"Show the {subject} recorded in {origin}{clause}."

    @staticmethod
    def _mentionables(sql: str) -> tuple[list[str], str | None]:
        from rotesql.sqlkit import lexer

        try:
            toks = lexer.tokenize(sql)
        except Exception:
            return [], None
        idents: list[str] = []
        literal: str | None = None
        for t in toks:
            if t.kind == lexer.WORD and t.lower not in lexer.KEYWORDS:
                name = t.text.split(".")[-1]
                if name not in idents:
                    idents.append(name)
            elif t.kind in (lexer.STRING, lexer.NUMBER) and literal is None:
                literal = t.text.strip("'")
        return idents, literal


def build_provider(config: ProviderConfig):
    if config.provider == "mock":
        return MockProvider(seed=config.seed, invalid_every=config.mock_invalid_every)
    if config.provider == "http":
        return HttpProvider(config)
    raise RotesqlError(f"unknown provider kind {config.provider!r}")


def _sql_messages(
    skeleton: SqlSkeleton, catalog: DatabaseCatalog, pool: FewShotPool
) -> list[dict]:
    messages = [{"role": "system", "content": SQL_STAGE_INSTRUCTION}]
    for template, sql in pool.exemplars(STAGE_SQL):
        messages.append({"role": "user", "content": f"template: {template}"})
        messages.append({"role": "assistant", "content": f"```sql\n{sql}\n```"})
    messages.append(
        {
            "role": "user",
            "content": (
                f"{catalog_block(catalog)}\n\ntemplate: {skeleton.template}"
            ),
        }
    )
    return messages


def _nlq_messages(
    sql: str, catalog: DatabaseCatalog, pool: FewShotPool
) -> list[dict]:
    messages = [{"role": "system", "content": NLQ_STAGE_INSTRUCTION}]
    for exemplar_sql, nlq in pool.exemplars(STAGE_NLQ):
        messages.append({"role": "user", "content": f"SQL: {exemplar_sql}"})
        messages.append({"role": "assistant", "content": nlq})
    messages.append(
        {
            "role": "user",
            "content": f"{catalog_block(catalog)}\n\nSQL: {sql}",
        }
    )
    return messages


def generate_sql(
    skeleton: SqlSkeleton,
    catalog: DatabaseCatalog,
    pool: FewShotPool,
    n: int,
    config: ProviderConfig,
    provider=None,
) -> list[str]:
    """Up to n raw SQL candidates for one skeleton; caller filters them."""
    if n <= 0:
        return []
    provider = provider or build_provider(config)
    candidates: list[str] = []
    for _ in range(n):
        request = StageRequest(
            stage=STAGE_SQL,
            messages=_sql_messages(skeleton, catalog, pool),
            temperature=config.temperature_for(STAGE_SQL),
            catalog=catalog,
            skeleton=skeleton,
        )
        text = provider.complete(request)
        candidate = extract_candidate(text)
        if candidate:
            candidates.append(candidate)
    return candidates


def generate_nlq(
    sql: str,
    catalog: DatabaseCatalog,
    pool: FewShotPool,
    config: ProviderConfig,
    provider=None,
) -> str:
    """One non-empty question describing a validated SQL."""
    provider = provider or build_provider(config)
    for _ in range(config.max_retries + 1):
        request = StageRequest(
            stage=STAGE_NLQ,
            messages=_nlq_messages(sql, catalog, pool),
            temperature=config.temperature_for(STAGE_NLQ),
            catalog=catalog,
            sql=sql,
        )
        text = provider.complete(request).strip()
        if text:
            return text
    raise ProviderError("NLQ generation returned empty output after retries")


@dataclass
class SynthesisRun:
    pairs: list[SynthPair]
    manifest: dict


def run_synthesis(
    catalog: DatabaseCatalog,
    skeletons: list[SqlSkeleton],
    budget: int,
    config: ProviderConfig,
    db_path: str | None = None,
    provider=None,
    pool: FewShotPool | None = None,
) -> SynthesisRun:
    """Round-robin skeleton filling until the budget of validated pairs is met.

    Every emitted pair re-executes cleanly on the target database. Provider
    exhaustion or rejection streaks end the run with a manifest shortfall
    note instead of an exception.
    """
    if budget < 0:
        raise RotesqlError("budget must be non-negative")
    db_path = db_path or catalog.source_path
    provider = provider or build_provider(config)
    pool = pool or FewShotPool()

    entries = []
    for idx, sk in enumerate(skeletons):
        entries.append(
            {
                "skeleton_id": f"sk{idx:03d}",
                "template": sk.template,
                "applicable": applicable(sk, catalog),
                "attempts": 0,
                "accepted": 0,
                "rejected": 0,
                "reject_reasons": {},
                "skeleton": sk,
            }
        )
    active = [e for e in entries if e["applicable"]]
    quota = math.ceil(budget / len(active)) if active and budget else 0
    attempt_cap = quota * 4 if quota else 0

    pairs: list[SynthPair] = []
    progressed = True
    while len(pairs) < budget and active and progressed:
        progressed = False
        for entry in active:
            if len(pairs) >= budget:
                break
            if entry["accepted"] >= quota or entry["attempts"] >= attempt_cap:
                continue
            progressed = True
            entry["attempts"] += 1
            candidates = generate_sql(
                entry["skeleton"], catalog, pool, 1, config, provider=provider
            )
            if not candidates:
                entry["rejected"] += 1
                reasons = entry["reject_reasons"]
                reasons["no_candidate"] = reasons.get("no_candidate", 0) + 1
                continue
            sql = candidates[0]
            outcome = validate_executable(sql, db_path, timeout=config.exec_timeout)
            if not outcome.ok:
                entry["rejected"] += 1
                reasons = entry["reject_reasons"]
                reasons[outcome.error_class] = reasons.get(outcome.error_class, 0) + 1
                continue
            nlq = generate_nlq(sql, catalog, pool, config, provider=provider)
            pair = SynthPair(
                db_id=catalog.db_id,
                nlq=nlq,
                sql=sql,
                skeleton_id=entry["skeleton_id"],
                model=config.model,
                temperature=config.temperature_for(STAGE_SQL),
                attempt=entry["attempts"],
                execution_status=ExecutionStatus(
                    validated=True, row_count=outcome.row_count
                ),
            )
            pairs.append(pair)
            accumulate_exemplars(pool, [pair])
            entry["accepted"] += 1

    manifest = {
        "db_id": catalog.db_id,
        "budget": budget,
        "produced": len(pairs),
        "shortfall": budget - len(pairs),
        "seed": config.seed,
        "provider": config.provider,
        "model": config.model,
        "temperatures": {
            "skeleton": config.temperature_skeleton,
            "sql": config.temperature_sql,
            "nlq": config.temperature_nlq,
        },
        "per_skeleton": [
            {k: v for k, v in entry.items() if k != "skeleton"}
            for entry in entries
        ],
    }
    return SynthesisRun(pairs=pairs, manifest=manifest)


def write_pairs(pairs: list[SynthPair], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_json(), sort_keys=True) + "\n")


def read_pairs(path: str) -> list[SynthPair]:
    pairs: list[SynthPair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                pairs.append(SynthPair.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise RotesqlError(f"{path}:{lineno}: bad pair record: {exc}")
    return pairs
