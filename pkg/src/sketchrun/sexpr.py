"""Tiny S-expression reader shared by the PDDL, feature, and sketch parsers.

Atoms are lowercased strings carrying their source position so parse errors
can point at the offending token.
"""
from __future__ import annotations

from typing import Union


class ParseError(Exception):
    """Malformed input text. ``line``/``col`` are 1-based when known."""

    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.msg = msg
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(msg + where)


class Symbol(str):
    """A string atom that remembers where it was read."""

    line: int | None
    col: int | None

    def __new__(cls, text: str, line: int | None = None, col: int | None = None):
        obj = super().__new__(cls, text)
        obj.line = line
        obj.col = col
        return obj


class SList(list):
    """A parenthesised list; behaves like ``list`` but keeps its opening position."""

    def __init__(self, items=(), line: int | None = None, col: int | None = None):
        list.__init__(self, items)
        self.line = line
        self.col = col


SExpr = Union[Symbol, SList]


def tokenize(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c.isspace():
            i += 1
            col += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c, line, col
            i += 1
            col += 1
        else:
            start, scol = i, col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            yield text[start:i], line, scol


def parse_all(text: str) -> list[SExpr]:
    """Read every top-level expression in ``text``."""
    stack: list[SList] = []
    out: list[SExpr] = []
    for tok, line, col in tokenize(text):
        if tok == "(":
            stack.append(SList(line=line, col=col))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            sym = Symbol(tok.lower(), line, col)
            (stack[-1] if stack else out).append(sym)
    if stack:
        raise ParseError("unclosed '('", stack[-1].line, stack[-1].col)
    return out


def parse_one(text: str) -> SExpr:
    exprs = parse_all(text)
    if len(exprs) != 1:
        raise ParseError(f"expected exactly one expression, found {len(exprs)}")
    return exprs[0]


def pos(expr) -> tuple[int | None, int | None]:
    return getattr(expr, "line", None), getattr(expr, "col", None)


def fail(msg: str, expr=None) -> ParseError:
    return ParseError(msg, *pos(expr))


def keyword_sections(items, start: int = 0) -> dict[str, SExpr]:
    """Collect ``:key value`` pairs from ``items[start:]``."""
    out: dict[str, SExpr] = {}
    i = start
    while i < len(items):
        key = items[i]
        if not isinstance(key, Symbol) or not key.startswith(":"):
            raise fail(f"expected a :keyword, got {key!r}", key)
        if i + 1 >= len(items):
            raise fail(f"missing value for {key}", key)
        if key in out:
            raise fail(f"duplicate section {key}", key)
        out[str(key)] = items[i + 1]
        i += 2
    return out


def to_text(expr) -> str:
    if isinstance(expr, list):
        return "(" + " ".join(to_text(e) for e in expr) + ")"
    return str(expr)
