"""SQL match predicates used by the overlap checker.

structural_match approximates Spider-style exact match: queries are reduced
to a canonical clause structure (identifiers case-folded, aliases resolved
and dropped, literals collapsed to a sentinel, order-insensitive clauses
compared as multisets) and the canonical forms are compared for equality.
string_match is the coarser convention used for BIRD-style corpora: token
stream equality with keywords case-folded and whitespace collapsed.

Known approximations, chosen over importing a benchmark's full evaluator:
qualifiers are dropped rather than schema-linked, OR-chains and arithmetic
stay order-sensitive, and subqueries inside expressions are compared as
token sequences.
"""

from __future__ import annotations

import warnings
from collections import Counter

from rotesql.errors import SqlLexError
from rotesql.sqlkit import lexer
from rotesql.sqlkit.lexer import KEYWORDS, Token
from rotesql.sqlkit.skeleton import _assign_roles

_LITERAL = "?"
_JOIN_KINDS = frozenset(("left", "right", "full", "cross", "natural", "outer", "inner"))
_CLAUSE_STARTS = {
    "select": "select",
    "from": "from",
    "where": "where",
    "group": "group",
    "having": "having",
    "order": "order",
    "limit": "limit",
    "offset": "limit",
    "with": "with",
}
_SET_OPS = ("union", "intersect", "except")


def _norm_stream(toks: list[Token]) -> list[tuple[str, str]]:
    """Flatten tokens to (text, tag) with tag in {kw, ident, table, lit, op, punct}."""
    roles = _assign_roles(toks)
    alias_to_table: dict[str, str] = {}
    n = len(toks)
    for i, t in enumerate(toks):
        if roles.get(i) != "table":
            continue
        j = i + 1
        if j < n and toks[j].is_keyword("as"):
            j += 1
        if j < n and roles.get(j) == "alias_def":
            alias_to_table[toks[j].text.lower()] = t.text.lower()

    out: list[tuple[str, str]] = []
    i = 0
    while i < n:
        t = toks[i]
        if roles.get(i) == "alias_def":
            if out and out[-1] == ("as", "kw"):
                out.pop()
            i += 1
            continue
        if t.kind in (lexer.STRING, lexer.NUMBER, lexer.BLOB, lexer.PARAM):
            out.append((_LITERAL, "lit"))
        elif t.kind in (lexer.WORD, lexer.QIDENT):
            if t.kind == lexer.WORD and t.lower in KEYWORDS:
                out.append((t.lower, "kw"))
            elif roles.get(i) == "table":
                out.append((alias_to_table.get(t.lower, t.lower), "table"))
            elif i + 1 < n and toks[i + 1].text == "." and toks[i + 1].kind == lexer.PUNCT:
                i += 2  # qualifier: schema linking is out of scope, drop it
                continue
            else:
                out.append((t.lower, "ident"))
        elif t.kind == lexer.OP:
            nxt = toks[i + 1] if i + 1 < n else None
            prev = toks[i - 1] if i > 0 else None
            if (
                t.text in "+-"
                and nxt is not None
                and nxt.kind == lexer.NUMBER
                and (
                    prev is None
                    or prev.kind == lexer.OP
                    or (prev.kind == lexer.PUNCT and prev.text in "(,")
                    or (prev.kind == lexer.WORD and prev.lower in KEYWORDS)
                )
            ):
                out.append((_LITERAL, "lit"))
                i += 2
                continue
            text = {"!=": "<>", "==": "="}.get(t.text, t.text)
            out.append((text, "op"))
        else:
            if t.text == ";":
                i += 1
                continue
            out.append((t.text, "punct"))
        i += 1
    return out


def _split_depth0(
    stream: list[tuple[str, str]], is_boundary
) -> list[tuple[str | None, list[tuple[str, str]]]]:
    """Split at depth-0 boundary tokens; boundary text attaches to the right part."""
    parts: list[tuple[str | None, list[tuple[str, str]]]] = []
    current: list[tuple[str, str]] = []
    marker: str | None = None
    depth = 0
    i = 0
    while i < len(stream):
        text, tag = stream[i]
        if tag == "punct" and text == "(":
            depth += 1
        elif tag == "punct" and text == ")":
            depth -= 1
        if depth == 0 and is_boundary(text, tag):
            parts.append((marker, current))
            marker = text
            current = []
            if text in _SET_OPS and i + 1 < len(stream) and stream[i + 1][0] == "all":
                marker = text + " all"
                i += 1
            i += 1
            continue
        current.append(stream[i])
        i += 1
    parts.append((marker, current))
    return parts


def _texts(item: list[tuple[str, str]]) -> tuple[str, ...]:
    return tuple(text for text, _ in item)


def _split_commas(stream: list[tuple[str, str]]) -> list[list[tuple[str, str]]]:
    items: list[list[tuple[str, str]]] = [[]]
    depth = 0
    for text, tag in stream:
        if tag == "punct":
            if text == "(":
                depth += 1
            elif text == ")":
                depth -= 1
            elif text == "," and depth == 0:
                items.append([])
                continue
        items[-1].append((text, tag))
    return [it for it in items if it]


def _split_and(stream: list[tuple[str, str]]) -> list[list[tuple[str, str]]]:
    """Split a predicate on depth-0 AND, leaving BETWEEN ... AND intact."""
    items: list[list[tuple[str, str]]] = [[]]
    depth = 0
    pending_between = 0
    for text, tag in stream:
        if tag == "punct":
            if text == "(":
                depth += 1
            elif text == ")":
                depth -= 1
        if tag == "kw" and depth == 0:
            if text == "between":
                pending_between += 1
            elif text == "and":
                if pending_between:
                    pending_between -= 1
                else:
                    items.append([])
                    continue
        items[-1].append((text, tag))
    return [it for it in items if it]


def _canon_condition(item: list[tuple[str, str]]) -> tuple:
    """Sort the operand order of a lone commutative comparison."""
    depth = 0
    op_at = -1
    op_text = ""
    for idx, (text, tag) in enumerate(item):
        if tag == "punct":
            depth += text == "("
            depth -= text == ")"
        elif tag == "op" and depth == 0 and text in ("=", "<>"):
            if op_at >= 0:
                return _texts(item)
            op_at, op_text = idx, text
    if op_at < 0:
        return _texts(item)
    left, right = _texts(item[:op_at]), _texts(item[op_at + 1 :])
    lo, hi = sorted((left, right))
    return (op_text, lo, hi)


def _multiset(entries) -> tuple:
    return tuple(sorted(Counter(entries).items()))


def _from_key(stream: list[tuple[str, str]]) -> tuple:
    tables: list[str] = []
    join_kinds: list[str] = []
    conditions: list[tuple] = []
    parts = _split_depth0(
        stream, lambda text, tag: tag == "kw" and text in ("join", "on", "using")
    )
    pending_kind: list[str] = []
    for marker, body in parts:
        body_list = list(body)
        if marker == "on":
            for cond in _split_and(body_list):
                conditions.append(_canon_condition(cond))
            continue
        if marker == "using":
            conditions.append(("using",) + _texts(body_list))
            continue
        for text, tag in body_list:
            if tag == "table":
                tables.append(text)
            elif tag == "kw" and text in _JOIN_KINDS and text != "inner":
                pending_kind.append(text)
        if marker == "join":
            join_kinds.append("+".join(sorted(pending_kind)) or "join")
            pending_kind = []
    return (
        _multiset(tables),
        _multiset(join_kinds),
        _multiset(conditions),
    )


def _core_key(stream: list[tuple[str, str]]) -> tuple:
    clauses = _split_depth0(
        stream,
        lambda text, tag: tag == "kw" and text in _CLAUSE_STARTS,
    )
    key: dict[str, tuple] = {}
    for marker, body in clauses:
        body_list = list(body)
        if marker is None:
            if body_list:
                key["_head"] = _texts(body_list)
            continue
        name = _CLAUSE_STARTS.get(marker, marker)
        if name == "select":
            distinct = False
            if body_list and body_list[0] == ("distinct", "kw"):
                distinct = True
                body_list = body_list[1:]
            elif body_list and body_list[0] == ("all", "kw"):
                body_list = body_list[1:]
            items = _multiset(_texts(it) for it in _split_commas(body_list))
            key["select"] = (distinct, items)
        elif name == "from":
            key["from"] = _from_key(body_list)
        elif name in ("where", "having"):
            key[name] = _multiset(
                _canon_condition(c) for c in _split_and(body_list)
            )
        elif name == "group":
            items = [it for it in _split_commas(body_list)]
            items = [it[1:] if it and it[0] == ("by", "kw") else it for it in items]
            key["group"] = _multiset(_texts(it) for it in items)
        elif name == "order":
            items = _split_commas(body_list)
            items = [it[1:] if it and it[0] == ("by", "kw") else it for it in items]
            ordered = []
            for it in items:
                texts = list(_texts(it))
                if texts and texts[-1] == "asc":
                    texts = texts[:-1]
                ordered.append(tuple(texts))
            key["order"] = tuple(ordered)
        elif name == "limit":
            prior = key.get("limit", ())
            key["limit"] = prior + (marker,) + _texts(body_list)
        else:
            prior = key.get(name, ())
            key[name] = prior + _texts(body_list)
    return tuple(sorted(key.items()))


def structural_key(sql: str) -> tuple:
    """Canonical clause structure; raises SqlLexError on untokenizable text."""
    stream = _norm_stream(lexer.tokenize(sql))
    if not stream:
        raise SqlLexError("empty statement", 0)
    parts = _split_depth0(
        stream, lambda text, tag: tag == "kw" and text in _SET_OPS
    )
    return tuple((marker, _core_key(list(body))) for marker, body in parts)


def structural_match(a: str, b: str) -> bool:
    """Spider-style exact match: canonical structures equal, literals ignored."""
    try:
        ka = structural_key(a)
        kb = structural_key(b)
    except SqlLexError as exc:
        warnings.warn(f"structural_match: unparseable SQL ({exc})", stacklevel=2)
        return False
    return ka == kb


def string_canon(sql: str) -> str:
    try:
        toks = lexer.tokenize(sql)
    except SqlLexError:
        return " ".join(sql.split()).rstrip("; ")
    texts = []
    for t in toks:
        if t.kind == lexer.WORD and t.lower in KEYWORDS:
            texts.append(t.lower)
        elif t.kind == lexer.QIDENT:
            texts.append(t.text)
        else:
            texts.append(t.text)
    while texts and texts[-1] == ";":
        texts.pop()
    return " ".join(texts)


def string_match(a: str, b: str) -> bool:
    """Whitespace-collapsed equality with keywords case-folded."""
    return string_canon(a) == string_canon(b)
