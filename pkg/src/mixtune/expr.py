"""Immutable arithmetic expression trees and the function specifications that hold them."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Mapping, Optional

from .numerics import Interval, Rational, rational


class Expr:
    __slots__ = ()

    @property
    def children(self) -> tuple["Expr", ...]:
        return ()

    def with_children(self, children) -> "Expr":
        return self

    def __str__(self):
        return format_expr(self)


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: Rational

    def __post_init__(self):
        object.__setattr__(self, "value", rational(self.value))

    def __repr__(self):
        return f"Const({self.value})"


@dataclass(frozen=True, repr=False)
class UnaryOp(Expr):
    arg: Expr
    op = ""

    @property
    def children(self):
        return (self.arg,)

    def with_children(self, children):
        return type(self)(children[0])

    def __repr__(self):
        return f"{type(self).__name__}({self.arg!r})"


@dataclass(frozen=True, repr=False)
class BinaryOp(Expr):
    lhs: Expr
    rhs: Expr
    op = ""
    symbol = ""

    @property
    def children(self):
        return (self.lhs, self.rhs)

    def with_children(self, children):
        return type(self)(children[0], children[1])

    def __repr__(self):
        return f"{type(self).__name__}({self.lhs!r}, {self.rhs!r})"


class Neg(UnaryOp):
    op = "neg"


class Sqrt(UnaryOp):
    op = "sqrt"


class Add(BinaryOp):
    op, symbol = "add", "+"


class Sub(BinaryOp):
    op, symbol = "sub", "-"


class Mul(BinaryOp):
    op, symbol = "mul", "*"


class Div(BinaryOp):
    op, symbol = "div", "/"


@dataclass(frozen=True, repr=False)
class Let(Expr):
    name: str
    bound: Expr
    body: Expr

    @property
    def children(self):
        return (self.bound, self.body)

    def with_children(self, children):
        return Let(self.name, children[0], children[1])

    def __repr__(self):
        return f"Let({self.name!r}, {self.bound!r}, {self.body!r})"


OPERATIONS = (Neg, Sqrt, Add, Sub, Mul, Div)
BINARY_BY_SYMBOL = {cls.symbol: cls for cls in (Add, Sub, Mul, Div)}


def is_operation(e: Expr) -> bool:
    return isinstance(e, (UnaryOp, BinaryOp))


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: tuple[str, ...]
    input_ranges: Mapping[str, Interval]
    body: Expr
    target_error: Optional[Rational] = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "input_ranges", dict(self.input_ranges))
        if self.target_error is not None:
            object.__setattr__(self, "target_error", rational(self.target_error))

    def with_body(self, body: Expr) -> "FunctionSpec":
        return replace(self, body=body)

    def with_target(self, target_error, name: Optional[str] = None) -> "FunctionSpec":
        return replace(self, target_error=target_error, name=name or self.name)

    def variables(self) -> list[str]:
        """Params followed by let-bound names, in order of appearance."""
        return list(self.params) + let_names(self.body)

    def __str__(self):
        return format_function(self)


# ---------------------------------------------------------------------------
# traversal helpers

Path = tuple[int, ...]


def walk(e: Expr, path: Path = ()) -> Iterator[tuple[Path, Expr]]:
    """Pre-order traversal yielding ``(path, node)`` pairs."""
    stack = [(path, e)]
    while stack:
        p, node = stack.pop()
        yield p, node
        kids = node.children
        for i in range(len(kids) - 1, -1, -1):
            stack.append((p + (i,), kids[i]))


def subexpr(e: Expr, path: Path) -> Expr:
    for i in path:
        e = e.children[i]
    return e


def replace_at(e: Expr, path: Path, new: Expr) -> Expr:
    if not path:
        return new
    kids = list(e.children)
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return e.with_children(kids)


def count_ops(e: Expr) -> int:
    """Number of arithmetic operations; let-bound expressions count once."""
    return sum(1 for _, node in walk(e) if is_operation(node))


def let_names(e: Expr) -> list[str]:
    names = []
    while isinstance(e, Let):
        names.append(e.name)
        names.extend(let_names(e.bound))
        e = e.body
    for child in e.children:
        names.extend(let_names(child))
    return names


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Let):
        return free_vars(e.bound) | (free_vars(e.body) - {e.name})
    out = set()
    for child in e.children:
        out |= free_vars(child)
    return out


def inline_lets(e: Expr, env: Optional[dict] = None) -> Expr:
    env = env or {}
    if isinstance(e, Var):
        return env.get(e.name, e)
    if isinstance(e, Let):
        bound = inline_lets(e.bound, env)
        return inline_lets(e.body, {**env, e.name: bound})
    if not e.children:
        return e
    return e.with_children([inline_lets(c, env) for c in e.children])


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2}


def format_rational(q: Rational) -> str:
    """Exact decimal text when the value terminates, ``n/d`` otherwise."""
    q = rational(q)
    num, den = int(q.numerator), int(q.denominator)
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{num}/{den}"
    digits = max(twos, fives)
    scaled = abs(num) * 10**digits // den
    sign = "-" if num < 0 else ""
    if num != 0 and (digits > 8 or len(str(scaled)) - digits > 16):
        # scientific notation, still exact
        mantissa = str(scaled).rstrip("0")
        exponent = len(str(scaled)) - 1 - digits
        frac = mantissa[1:] or "0"
        return f"{sign}{mantissa[0]}.{frac}e{exponent}"
    if digits == 0:
        return f"{sign}{scaled}.0"
    text = str(scaled).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def _format(e: Expr, ctx: int) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        text = format_rational(e.value)
        if e.value < 0 or "/" in text:
            return f"({text})"
        return text
    if isinstance(e, Sqrt):
        return f"sqrt({_format(e.arg, 0)})"
    if isinstance(e, Neg):
        inner = e.arg
        if isinstance(inner, (Var, Sqrt)):
            return f"-{_format(inner, 3)}"
        return f"-({_format(inner, 0)})"
    if isinstance(e, BinaryOp):
        prec = _PREC[type(e)]
        text = f"{_format(e.lhs, prec)} {e.symbol} {_format(e.rhs, prec + 1)}"
        return f"({text})" if prec < ctx else text
    if isinstance(e, Let):
        return f"{{ val {e.name} = {_format(e.bound, 0)}; {_format(e.body, 0)} }}"
    raise TypeError(f"unknown expression {e!r}")


def format_expr(e: Expr) -> str:
    return _format(e, 0)


def format_function(f: FunctionSpec) -> str:
    params = ", ".join(f"{p}: Real" for p in f.params)
    conds = " && ".join(
        f"{_bound_text(f.input_ranges[p].lo)} <= {p} && {p} <= {_bound_text(f.input_ranges[p].hi)}"
        for p in f.params
    )
    lines = [f"def {f.name}({params}): Real = {{", f"  require({conds})"]
    body = f.body
    while isinstance(body, Let):
        lines.append(f"  val {body.name} = {format_expr(body.bound)}")
        body = body.body
    lines.append(f"  {format_expr(body)}")
    tail = "}"
    if f.target_error is not None:
        tail += f" ensuring(res => res +/- {format_rational(f.target_error)})"
    lines.append(tail)
    return "\n".join(lines) + "\n"


def _bound_text(q: Rational) -> str:
    text = format_rational(q)
    return f"({text})" if "/" in text else text
