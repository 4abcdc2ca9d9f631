"""Tokenizer for the SQLite dialect.

A small hand-rolled scanner: general-purpose SQL parsers either are not
available in this environment or normalize away the token-level detail the
skeleton extractor and structural matcher need (exact lexemes, quote styles,
comment spans). Tokens carry their original text plus a coarse kind; all
higher layers (skeletonizer, matchers, mock generator) share this stream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from rotesql.errors import SqlLexError

# Reserved words plus common type names. Type names must be treated as
# keywords so CAST(x AS INTEGER) keeps INTEGER instead of reading it as an
# alias definition.
KEYWORDS = frozenset(
    """
    abort action add after all alter always analyze and as asc attach
    autoincrement before begin between by cascade case cast check collate
    column commit conflict constraint create cross current current_date
    current_time current_timestamp database default deferrable deferred
    delete desc detach distinct do drop each else end escape except exclude
    exclusive exists explain fail filter first following for foreign from
    full generated glob group groups having if ignore immediate in index
    indexed initially inner insert instead intersect into is isnull join key
    last left like limit match materialized natural no not nothing notnull
    null nulls of offset on or order others outer over partition plan pragma
    preceding primary query raise range recursive references regexp reindex
    release rename replace restrict returning right rollback row rows
    savepoint select set table temp temporary then ties to transaction
    trigger unbounded union unique update using vacuum values view virtual
    when where window with without
    true false
    int integer tinyint smallint mediumint bigint unsigned int2 int8
    character varchar nchar nvarchar text clob blob real double float
    numeric decimal boolean date datetime time timestamp
    """.split()
)

# Token kinds. WORD covers keywords and bare identifiers; the consumer decides
# which via KEYWORDS.
WORD = "word"
QIDENT = "qident"  # quoted identifier; text holds the unquoted name
STRING = "string"
NUMBER = "number"
BLOB = "blob"
PARAM = "param"
OP = "op"
PUNCT = "punct"

_WORD_START = re.compile("[A-Za-z_\\u0080-\\uffff]")
_WORD_BODY = re.compile("[A-Za-z0-9_$\\u0080-\\uffff]")
_MULTI_OPS = ("||", "<=", ">=", "<>", "!=", "==", "<<", ">>")
_SINGLE_OPS = set("=<>+-*/%&|~")
_PUNCT = set("(),.;")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int

    def is_keyword(self, *names: str) -> bool:
        if self.kind != WORD:
            return False
        low = self.text.lower()
        if low not in KEYWORDS:
            return False
        return not names or low in names

    @property
    def lower(self) -> str:
        return self.text.lower()


def _scan_number(sql: str, i: int) -> int:
    n = len(sql)
    if sql[i] == "0" and i + 1 < n and sql[i + 1] in "xX":
        j = i + 2
        while j < n and sql[j] in "0123456789abcdefABCDEF":
            j += 1
        return j
    j = i
    while j < n and sql[j].isdigit():
        j += 1
    if j < n and sql[j] == ".":
        j += 1
        while j < n and sql[j].isdigit():
            j += 1
    if j < n and sql[j] in "eE":
        k = j + 1
        if k < n and sql[k] in "+-":
            k += 1
        if k < n and sql[k].isdigit():
            j = k
            while j < n and sql[j].isdigit():
                j += 1
    return j


def tokenize(sql: str) -> list[Token]:
    """Split SQL text into tokens, dropping whitespace and comments.

    Raises SqlLexError on unterminated strings, quoted identifiers, or block
    comments, and on bytes that are not part of the dialect.
    """
    tokens: list[Token] = []
    i = 0
    n = len(sql)
    while i < n:
        c = sql[i]
        if c.isspace():
            i += 1
            continue
        if c == "-" and sql.startswith("--", i):
            nl = sql.find("\n", i)
            i = n if nl == -1 else nl + 1
            continue
        if c == "/" and sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            if end == -1:
                raise SqlLexError("unterminated block comment", i)
            i = end + 2
            continue
        if c == "'" or (c in "xX" and i + 1 < n and sql[i + 1] == "'"):
            start = i
            kind = STRING
            if c != "'":
                kind = BLOB
                i += 1
            j = i + 1
            while True:
                j = sql.find("'", j)
                if j == -1:
                    raise SqlLexError("unterminated string literal", start)
                if j + 1 < n and sql[j + 1] == "'":
                    j += 2  # doubled quote escape
                    continue
                break
            tokens.append(Token(kind, sql[start : j + 1], start))
            i = j + 1
            continue
        if c in ('"', "`", "["):
            close = {"\"": "\"", "`": "`", "[": "]"}[c]
            start = i
            j = i + 1
            while True:
                j = sql.find(close, j)
                if j == -1:
                    raise SqlLexError("unterminated quoted identifier", start)
                if c != "[" and j + 1 < n and sql[j + 1] == close:
                    j += 2
                    continue
                break
            inner = sql[start + 1 : j]
            if c != "[":
                inner = inner.replace(close + close, close)
            tokens.append(Token(QIDENT, inner, start))
            i = j + 1
            continue
        if c.isdigit():
            j = _scan_number(sql, i)
            tokens.append(Token(NUMBER, sql[i:j], i))
            i = j
            continue
        if c == "." and i + 1 < n and sql[i + 1].isdigit():
            prev = tokens[-1] if tokens else None
            # A dot-digit run is a number unless it directly follows
            # something a field access hangs off (a non-keyword name or a
            # closing paren); "select .5" lexes as a number, "t.5" does not.
            hangs_off = prev is not None and (
                (prev.kind == WORD and prev.lower not in KEYWORDS)
                or prev.kind == QIDENT
                or prev.text == ")"
            )
            if not hangs_off:
                j = _scan_number(sql, i + 1)
                tokens.append(Token(NUMBER, sql[i:j], i))
                i = j
                continue
        if _WORD_START.match(c):
            j = i + 1
            while j < n and _WORD_BODY.match(sql[j]):
                j += 1
            tokens.append(Token(WORD, sql[i:j], i))
            i = j
            continue
        if c == "?":
            j = i + 1
            while j < n and sql[j].isdigit():
                j += 1
            tokens.append(Token(PARAM, sql[i:j], i))
            i = j
            continue
        if c in ":@$" and i + 1 < n and _WORD_START.match(sql[i + 1]):
            j = i + 1
            while j < n and _WORD_BODY.match(sql[j]):
                j += 1
            tokens.append(Token(PARAM, sql[i:j], i))
            i = j
            continue
        two = sql[i : i + 2]
        if two in _MULTI_OPS:
            tokens.append(Token(OP, two, i))
            i += 2
            continue
        if c in _PUNCT:
            tokens.append(Token(PUNCT, c, i))
            i += 1
            continue
        if c in _SINGLE_OPS:
            tokens.append(Token(OP, c, i))
            i += 1
            continue
        raise SqlLexError(f"unexpected character {c!r}", i)
    return tokens


def render(tokens: list[str], function_parens: set[int] | None = None) -> str:
    """Join token texts back into readable SQL.

    ``function_parens`` holds indexes (into ``tokens``) of "(" tokens that
    open a call and therefore attach to the preceding name without a space,
    e.g. avg(col) versus in (select ...).
    """
    attached = function_parens or set()
    out: list[str] = []
    for idx, text in enumerate(tokens):
        if not out:
            out.append(text)
            continue
        prev = out[-1]
        no_space = (
            text in (",", ")", ".", ";")
            or prev.endswith((".", "("))
            or (text == "(" and idx in attached)
        )
        if no_space:
            out[-1] = prev + text
        else:
            out.append(text)
    return " ".join(out)
