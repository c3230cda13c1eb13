"""Parser for the textual vector-field grammar.

A field is a list of component expressions separated by ``;``::

    p ; -q - p
    x2 ; -sin(x1) + 0.5*x1^3

Expressions use ``+ - *``, non-negative integer powers ``^``, the functions
``sin cos exp``, numeric literals and the constant ``pi``.  ``sqrt(...)`` is
accepted only around constant subexpressions, where it folds to a number.
Variable names default to ``x1..xn``; callers may pass their own list.
Whitespace (including newlines) is insignificant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from . import expr as E

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*^();,|])
    """,
    re.VERBOSE,
)

_FUNCS = {"sin": E.sin, "cos": E.cos, "exp": E.exp}


class ParseError(ValueError):
    """Syntax or name error, carrying a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, s, line, pos - line_start + 1))
        for i, ch in enumerate(s):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, names: dict[str, int]):
        self.toks = _tokenize(text)
        self.i = 0
        self.names = names

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        t = tok or self.tok
        raise ParseError(msg, t.line, t.col)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")

    def expression(self) -> E.Expr:
        if self.tok.kind == "end" or (self.tok.kind == "op" and self.tok.text in ";|)"):
            self.error("empty expression")
        e = self.term()
        while True:
            if self.accept("+"):
                e = E.add(e, self.term())
            elif self.accept("-"):
                e = E.sub(e, self.term())
            else:
                return e

    def term(self) -> E.Expr:
        e = self.unary()
        while self.accept("*"):
            e = E.mul(e, self.unary())
        return e

    def unary(self) -> E.Expr:
        if self.accept("-"):
            return E.neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> E.Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text in ("^", "**"):
            self.i += 1
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                self.error("exponent must be a non-negative integer literal")
            self.i += 1
            return E.power(base, int(t.text))
        return base

    def atom(self) -> E.Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return E.const(float(t.text))
        if t.kind == "name":
            self.i += 1
            if t.text in _FUNCS or t.text == "sqrt":
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                if t.text == "sqrt":
                    if not arg.is_const or arg.value < 0:
                        self.error("sqrt is only allowed on non-negative constants", t)
                    return E.const(math.sqrt(arg.value))
                return _FUNCS[t.text](arg)
            if t.text == "pi":
                return E.const(math.pi)
            if t.text not in self.names:
                self.error(f"unknown variable {t.text!r}", t)
            return E.var(self.names[t.text])
        if self.accept("("):
            e = self.expression()
            self.expect(")")
            return e
        self.error(f"unexpected {t.text or 'end of input'!r}")


def default_names(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)]


def _name_map(names: Sequence[str]) -> dict[str, int]:
    out = {}
    for i, s in enumerate(names):
        if s in out:
            raise ValueError(f"duplicate variable name {s!r}")
        out[s] = i
    return out


def parse_expression(text: str, names: Sequence[str]) -> E.Expr:
    p = _Parser(text, _name_map(names))
    e = p.expression()
    if p.tok.kind != "end":
        p.error(f"unexpected {p.tok.text!r}")
    return e


def parse_components(text: str, names: Sequence[str] | None = None, n: int | None = None) -> list[E.Expr]:
    """Parse ``a ; b ; c`` into component expressions.

    With neither ``names`` nor ``n`` given, the dimension is the number of
    components and variables are ``x1..xn``.
    """
    if names is None:
        if n is None:
            n = _count_components(text)
        names = default_names(n)
    p = _Parser(text, _name_map(names))
    comps = [p.expression()]
    while p.accept(";"):
        comps.append(p.expression())
    if p.tok.kind != "end":
        p.error(f"unexpected {p.tok.text!r}")
    return comps


def _count_components(text: str) -> int:
    depth, count = 0, 1
    for t in _tokenize(text):
        if t.kind == "op":
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1
            elif t.text == ";" and depth == 0:
                count += 1
    return count
