"""Recursive-descent parser for the real-valued input language.

A file holds one or more functions of the form::

    def rigidBody1(x1: Real, x2: Real, x3: Real): Real = {
      require(-15.0 <= x1 && x1 <= 15 && -15.0 <= x2 && x2 <= 15.0)
      val t = x1 * x2
      -t - x2
    } ensuring(res => res +/- 1.75e-13)

Unary minus binds tighter than ``*`` and ``/``, which bind tighter than
``+`` and ``-``; binary operators associate to the left.  A minus sign written
directly in front of a numeric literal is part of the literal.  As in Scala,
an infix operator at the start of a new line ends the current statement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import ParseError
from .expr import (
    BINARY_BY_SYMBOL, Const, Expr, FunctionSpec, Let, Neg, Sqrt, Var, free_vars,
)
from .numerics import Interval, rational

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\+/-|=>|<=|>=|&&|[-+*/(){}:,=<>;])
    """,
    re.VERBOSE | re.DOTALL,
)

KEYWORDS = {"def", "val", "require", "ensuring", "Real", "sqrt"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int
    newline_before: bool = False


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    newline = False
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl" or (kind == "comment" and "\n" in text):
            newline = True
            line += text.count("\n")
            line_start = m.start() + text.rfind("\n") + 1
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, m.start() - line_start + 1, newline))
            newline = False
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, newline))
    return tokens


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0
        self.depth = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset=1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, message, tok: Optional[Token] = None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind != "eof"

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.pos += 1
        return tok

    def ident(self) -> Token:
        tok = self.tok
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(f"expected identifier, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return tok

    # -- functions -----------------------------------------------------------

    def program(self) -> list[FunctionSpec]:
        functions = []
        seen = set()
        while self.tok.kind != "eof":
            start = self.tok
            f = self.function()
            if f.name in seen:
                raise self.error(f"duplicate definition of function {f.name!r}", start)
            seen.add(f.name)
            functions.append(f)
        return functions

    def function(self) -> FunctionSpec:
        self.expect("def")
        name = self.ident().text
        self.expect("(")
        params = []
        while not self.at(")"):
            tok = self.ident()
            if tok.text in params:
                raise self.error(f"duplicate definition of parameter {tok.text!r}", tok)
            params.append(tok.text)
            self.expect(":")
            self.expect("Real")
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        self.expect(":")
        self.expect("Real")
        self.expect("=")
        open_tok = self.expect("{")
        bounds: dict[str, list] = {p: [None, None] for p in params}
        if self.at("require"):
            self.require(bounds)
        body = self.block_body(set(params), open_tok)
        self.expect("}")
        target = None
        if self.at("ensuring"):
            target = self.ensuring()
        ranges = {}
        for p in params:
            lo, hi = bounds[p]
            if lo is None or hi is None:
                raise self.error(f"input variable {p!r} of {name!r} has no bounded range", open_tok)
            if lo > hi:
                raise self.error(f"empty range for {p!r}: [{lo}, {hi}]", open_tok)
            ranges[p] = Interval(lo, hi)
        return FunctionSpec(name, tuple(params), ranges, body, target)

    def block_body(self, scope: set[str], open_tok: Token) -> Expr:
        bindings = []
        scope = set(scope)
        while self.at("val"):
            self.pos += 1
            tok = self.ident()
            if tok.text in scope:
                raise self.error(f"duplicate definition of {tok.text!r}", tok)
            if self.at(":"):
                self.pos += 1
                self.expect("Real")
            self.expect("=")
            bound = self.expression()
            self.check_scope(bound, scope, tok)
            scope.add(tok.text)
            bindings.append((tok.text, bound))
            if self.at(";"):
                self.pos += 1
        result_tok = self.tok
        result = self.expression()
        self.check_scope(result, scope, result_tok)
        if self.at(";"):
            self.pos += 1
        for name, bound in reversed(bindings):
            result = Let(name, bound, result)
        return result

    def check_scope(self, e: Expr, scope: set[str], tok: Token):
        unknown = sorted(free_vars(e) - scope)
        if unknown:
            raise self.error(f"unknown identifier {unknown[0]!r}", tok)

    def require(self, bounds):
        self.expect("require")
        self.expect("(")
        self.depth += 1
        self.condition(bounds)
        while self.at("&&"):
            self.pos += 1
            self.condition(bounds)
        self.depth -= 1
        self.expect(")")

    def condition(self, bounds):
        """``a <= b [<= c]`` where each side is a parameter or a constant."""
        terms = [self.bound_term()]
        ops = []
        while self.tok.text in ("<=", "<", ">=", ">"):
            ops.append(self.tok.text)
            self.pos += 1
            terms.append(self.bound_term())
        if not ops:
            raise self.error("expected a comparison in require clause")
        for (lhs, rhs), op in zip(zip(terms, terms[1:]), ops):
            if op in (">=", ">"):
                lhs, rhs = rhs, lhs
            self.record_bound(bounds, lhs, rhs)

    def record_bound(self, bounds, lhs, rhs):
        (ltok, lval), (rtok, rval) = lhs, rhs
        if isinstance(lval, str) and isinstance(rval, str):
            raise self.error("comparisons between two variables are not supported", ltok)
        if isinstance(rval, str):
            name, tok, slot, value = rval, rtok, 0, lval
        elif isinstance(lval, str):
            name, tok, slot, value = lval, ltok, 1, rval
        else:
            return
        if name not in bounds:
            raise self.error(f"range given for {name!r}, which is not a parameter", tok)
        old = bounds[name][slot]
        if old is None:
            bounds[name][slot] = value
        else:
            bounds[name][slot] = max(old, value) if slot == 0 else min(old, value)

    def bound_term(self):
        tok = self.tok
        if tok.kind == "ident" and tok.text not in KEYWORDS and self.peek().text != "(":
            self.pos += 1
            return tok, tok.text
        e = self.additive()
        if free_vars(e):
            raise self.error("range bounds must be constants", tok)
        from .simulate import exact_eval

        return tok, exact_eval(e, {})

    def ensuring(self):
        self.expect("ensuring")
        self.expect("(")
        res = self.ident().text
        self.expect("=>")
        tok = self.ident()
        if tok.text != res:
            raise self.error(f"unknown identifier {tok.text!r}", tok)
        self.expect("+/-")
        value = self.literal_value()
        self.expect(")")
        if value <= 0:
            raise self.error("target error must be positive")
        return value

    def literal_value(self):
        negative = False
        if self.at("-"):
            negative = True
            self.pos += 1
        tok = self.tok
        if tok.kind != "number":
            raise self.error("expected numeric literal")
        self.pos += 1
        value = rational(Fraction(tok.text))
        return -value if negative else value

    # -- expressions ---------------------------------------------------------

    def expression(self) -> Expr:
        return self.additive()

    def _continues(self) -> bool:
        return not (self.tok.newline_before and self.depth == 0)

    def additive(self) -> Expr:
        e = self.multiplicative()
        while self.tok.text in ("+", "-") and self.tok.kind == "op" and self._continues():
            cls = BINARY_BY_SYMBOL[self.tok.text]
            self.pos += 1
            e = cls(e, self.multiplicative())
        return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while self.tok.text in ("*", "/") and self._continues():
            cls = BINARY_BY_SYMBOL[self.tok.text]
            self.pos += 1
            e = cls(e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("-"):
            self.pos += 1
            if self.tok.kind == "number":
                tok = self.tok
                self.pos += 1
                return Const(-rational(Fraction(tok.text)))
            return Neg(self.unary())
        if self.at("+"):
            self.pos += 1
            return self.unary()
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.pos += 1
            return Const(rational(Fraction(tok.text)))
        if tok.text == "sqrt":
            self.pos += 1
            self.expect("(")
            self.depth += 1
            arg = self.expression()
            self.depth -= 1
            self.expect(")")
            return Sqrt(arg)
        if tok.text == "(":
            self.pos += 1
            self.depth += 1
            e = self.expression()
            self.depth -= 1
            self.expect(")")
            return e
        if tok.text == "{":
            self.pos += 1
            saved, self.depth = self.depth, 0
            bindings = []
            while self.at("val"):
                self.pos += 1
                name = self.ident().text
                self.expect("=")
                bindings.append((name, self.expression()))
                if self.at(";"):
                    self.pos += 1
            e = self.expression()
            self.depth = saved
            self.expect("}")
            for name, bound in reversed(bindings):
                e = Let(name, bound, e)
            return e
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.pos += 1
            return Var(tok.text)
        raise self.error(f"unexpected token {tok.text or 'end of input'!r}")


def parse(source: str) -> list[FunctionSpec]:
    return Parser(source).program()


def parse_file(path) -> list[FunctionSpec]:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def parse_expr(source: str) -> Expr:
    """Parse a bare expression (free variables allowed)."""
    p = Parser(source)
    p.depth = 1
    e = p.expression()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected token {p.tok.text!r}")
    return e
