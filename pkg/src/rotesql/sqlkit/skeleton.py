"""SQL skeleton extraction: abstract identifiers and literals to placeholders.

A skeleton replaces table names with ``table_name``, column names with
``col_name``, and literals with ``value`` (numbered ``_2``, ``_3``, ... per
distinct original, in first-occurrence order). Keywords, function names,
operators, ``*`` and punctuation survive; alias definitions and alias/table
qualifiers are dropped outright, so ``select T1.name from city as T1``
becomes ``select col_name from table_name``.

Tokens already spelled like a placeholder pass through unchanged and reserve
their number. That makes extraction idempotent, which is load-bearing: a real
column that happens to be named exactly ``value`` or ``col_name`` therefore
survives abstraction. No shipped fixture uses such names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from rotesql.errors import SkeletonExtractionError, SqlLexError
from rotesql.sqlkit import lexer
from rotesql.sqlkit.lexer import KEYWORDS, Token

PLACEHOLDER_RE = re.compile(r"^(table_name|col_name|value)(_[2-9]\d*|_1\d+)?$")

_STATEMENT_HEADS = frozenset(
    ("select", "with", "insert", "update", "delete", "values", "create",
     "drop", "alter", "pragma", "explain", "replace")
)
# Keywords that read as prose before an opening paren; any other word glues
# to its paren as a call: avg(x), cast(x as int), but "in (", "over (".
_SPACED_BEFORE_PAREN = frozenset(
    ("select", "from", "where", "and", "or", "not", "in", "on", "as", "when",
     "then", "else", "exists", "between", "by", "having", "union",
     "intersect", "except", "all", "distinct", "values", "set", "limit",
     "offset", "join", "is", "like", "glob", "regexp", "match", "escape",
     "collate", "case", "end", "using", "with", "recursive", "over",
     "partition", "filter", "window", "range", "rows", "groups", "references",
     "isnull", "notnull", "null", "true", "false")
)
_CLAUSE_KEYWORDS = frozenset(
    ("select", "where", "group", "having", "order", "limit", "offset", "on",
     "using", "set", "union", "intersect", "except", "window", "values",
     "when", "returning")
)


@dataclass(frozen=True)
class SqlSkeleton:
    """Abstracted SQL template plus the table count it needs to instantiate."""

    template: str
    required_tables: int
    source_count: int = 1


def _is_bare_name(tok: Token) -> bool:
    if tok.kind == lexer.QIDENT:
        return True
    return tok.kind == lexer.WORD and tok.lower not in KEYWORDS


def _assign_roles(toks: list[Token]) -> dict[int, str]:
    """Mark token indexes as table references or alias definitions.

    One flat walk with a paren-scope stack; subqueries inherit nothing and
    restore the outer FROM state on close. Good enough for the SELECT-heavy
    dialect the seed corpora use.
    """
    roles: dict[int, str] = {}
    stack: list[dict] = [
        {"expect_table": False, "in_from": False, "in_with": False,
         "expect_cte": False, "clause": "", "derived": False}
    ]
    n = len(toks)
    i = 0
    while i < n:
        t = toks[i]
        top = stack[-1]
        if t.kind == lexer.PUNCT:
            if t.text == "(":
                derived = top["expect_table"]
                top["expect_table"] = False
                stack.append(
                    {"expect_table": False, "in_from": False,
                     "in_with": False, "expect_cte": False, "clause": "",
                     "derived": derived}
                )
            elif t.text == ")":
                frame = stack.pop() if len(stack) > 1 else stack[0]
                top = stack[-1]
                if frame["derived"]:
                    j = i + 1
                    if j < n and toks[j].is_keyword("as"):
                        j += 1
                    if j < n and _is_bare_name(toks[j]):
                        roles[j] = "alias_def"
            elif t.text == ",":
                if top["in_from"]:
                    top["expect_table"] = True
                elif top["in_with"]:
                    top["expect_cte"] = True
        elif t.kind == lexer.WORD and t.lower in KEYWORDS:
            kw = t.lower
            if kw in ("from", "join"):
                top["expect_table"] = True
                if kw == "from":
                    top["in_from"] = True
            elif kw in ("into", "update", "table"):
                top["expect_table"] = True
            elif kw == "with":
                top["in_with"] = True
                top["expect_cte"] = True
            elif kw == "as":
                j = i + 1
                if j < n and _is_bare_name(toks[j]):
                    roles[j] = "alias_def"
            elif kw in _CLAUSE_KEYWORDS:
                top["in_from"] = False
                top["expect_table"] = False
                top["clause"] = kw
                if kw == "select":
                    top["in_with"] = False
        elif _is_bare_name(t):
            if roles.get(i) == "alias_def":
                pass
            elif top["expect_table"] or top["expect_cte"]:
                roles[i] = "table"
                top["expect_table"] = False
                top["expect_cte"] = False
                j = i + 1
                if (
                    j < n
                    and _is_bare_name(toks[j])
                    and roles.get(j) != "alias_def"
                    and not (j + 1 < n and toks[j + 1].text == "(")
                ):
                    roles[j] = "alias_def"
            elif top["clause"] == "select" and roles.get(i) is None:
                # bare column alias: `select count(*) n from t`
                prev = toks[i - 1] if i > 0 else None
                nxt = toks[i + 1] if i + 1 < n else None
                prev_ok = prev is not None and (
                    _is_bare_name(prev)
                    or prev.kind in (lexer.NUMBER, lexer.STRING, lexer.QIDENT)
                    or prev.text in (")", "*")
                    or PLACEHOLDER_RE.match(prev.text) is not None
                )
                nxt_ok = nxt is None or nxt.text == "," or nxt.is_keyword("from")
                if prev_ok and nxt_ok:
                    roles[i] = "alias_def"
        i += 1
    return roles


class _Namer:
    """Hands out family placeholders, honoring names reserved by passthrough."""

    def __init__(self, base: str) -> None:
        self.base = base
        self.used: set[str] = set()
        self.by_original: dict[str, str] = {}

    def reserve(self, name: str) -> None:
        self.used.add(name)

    def name_for(self, original: str) -> str:
        got = self.by_original.get(original)
        if got is not None:
            return got
        k = 1
        while True:
            candidate = self.base if k == 1 else f"{self.base}_{k}"
            if candidate not in self.used:
                break
            k += 1
        self.used.add(candidate)
        self.by_original[original] = candidate
        return candidate


def extract_skeleton(sql: str) -> SqlSkeleton:
    """Abstract one SQL statement into its skeleton.

    Raises SkeletonExtractionError when the text cannot be tokenized, is
    empty, holds multiple statements, has unbalanced parentheses, or does not
    start like a statement.
    """
    try:
        toks = lexer.tokenize(sql)
    except SqlLexError as exc:
        raise SkeletonExtractionError(f"cannot tokenize: {exc}") from exc
    while toks and toks[-1].text == ";":
        toks = toks[:-1]
    if not toks:
        raise SkeletonExtractionError("empty statement")
    if any(t.kind == lexer.PUNCT and t.text == ";" for t in toks):
        raise SkeletonExtractionError("multiple statements in one input")
    depth = 0
    for t in toks:
        if t.text == "(" and t.kind == lexer.PUNCT:
            depth += 1
        elif t.text == ")" and t.kind == lexer.PUNCT:
            depth -= 1
            if depth < 0:
                raise SkeletonExtractionError("unbalanced parentheses")
    if depth != 0:
        raise SkeletonExtractionError("unbalanced parentheses")
    head = toks[0]
    if not (head.kind == lexer.WORD and head.lower in _STATEMENT_HEADS):
        raise SkeletonExtractionError(
            f"statement must start with a SQL verb, got {head.text!r}"
        )

    roles = _assign_roles(toks)
    tables = _Namer("table_name")
    cols = _Namer("col_name")
    values = _Namer("value")
    by_base = {"table_name": tables, "col_name": cols, "value": values}
    for t in toks:
        if t.kind in (lexer.WORD, lexer.QIDENT):
            m = PLACEHOLDER_RE.match(t.text)
            if m:
                by_base[m.group(1)].reserve(t.text)

    out: list[str] = []
    func_parens: set[int] = set()
    attach_next_paren = False
    n = len(toks)
    i = 0
    while i < n:
        t = toks[i]
        if roles.get(i) == "alias_def":
            if out and out[-1] == "as":
                out.pop()
            i += 1
            continue
        want_attach = attach_next_paren
        attach_next_paren = False
        if t.kind in (lexer.STRING, lexer.NUMBER, lexer.BLOB):
            out.append(values.name_for(t.text))
        elif t.kind == lexer.PARAM:
            out.append(t.text)
        elif t.kind in (lexer.WORD, lexer.QIDENT):
            text = t.text
            is_kw = t.kind == lexer.WORD and t.lower in KEYWORDS
            nxt = toks[i + 1] if i + 1 < n else None
            if PLACEHOLDER_RE.match(text):
                out.append(text)
            elif is_kw:
                out.append(t.lower)
                if t.lower not in _SPACED_BEFORE_PAREN:
                    attach_next_paren = True
            elif roles.get(i) == "table":
                out.append(tables.name_for(text.lower()))
            elif nxt is not None and nxt.kind == lexer.PUNCT and nxt.text == ".":
                i += 2  # alias or table qualifier: drop `x.`
                continue
            elif nxt is not None and nxt.kind == lexer.PUNCT and nxt.text == "(":
                out.append(t.lower)
                attach_next_paren = True
            else:
                out.append(cols.name_for(text.lower()))
        elif t.kind == lexer.OP:
            nxt = toks[i + 1] if i + 1 < n else None
            prev = toks[i - 1] if i > 0 else None
            signed = (
                t.text in "+-"
                and nxt is not None
                and nxt.kind == lexer.NUMBER
                and (
                    prev is None
                    or prev.kind == lexer.OP
                    or (prev.kind == lexer.PUNCT and prev.text in "(,")
                    or (prev.kind == lexer.WORD and prev.lower in KEYWORDS)
                )
            )
            if signed:
                out.append(values.name_for(t.text + nxt.text))
                i += 2
                continue
            out.append(t.text)
        else:  # punctuation
            if t.text == "(" and want_attach:
                func_parens.add(len(out))
            out.append(t.text)
        i += 1

    template = lexer.render(out, func_parens)
    return SqlSkeleton(template=template, required_tables=len(tables.used))


def dedup_skeletons(skeletons: list[SqlSkeleton]) -> list[SqlSkeleton]:
    """Collapse duplicate templates, accumulating source_count, order kept."""
    merged: dict[str, SqlSkeleton] = {}
    for sk in skeletons:
        prior = merged.get(sk.template)
        if prior is None:
            merged[sk.template] = sk
        else:
            merged[sk.template] = replace(
                prior, source_count=prior.source_count + sk.source_count
            )
    return list(merged.values())


def applicable(skeleton: SqlSkeleton, catalog) -> bool:
    """True iff the catalog has enough tables to instantiate the skeleton."""
    return len(catalog.tables) >= skeleton.required_tables
