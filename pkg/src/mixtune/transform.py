"""Normalization before tuning: constants and intermediate results become variables.

After both passes every operation and every constant owns a let-bound name,
so the tuner can assign each one its own precision.
"""

from __future__ import annotations

import itertools

from .expr import Const, Expr, FunctionSpec, Let, Var, is_operation, let_names


def _fresh_names(prefix: str, taken: set[str]):
    for i in itertools.count():
        name = f"{prefix}{i}"
        if name not in taken:
            yield name


def extract_constants(f: FunctionSpec) -> FunctionSpec:
    """Bind every constant occurrence to a fresh ``_const<i>`` at the top of the body."""
    names = _fresh_names("_const", set(f.variables()))
    bindings: list[tuple[str, Const]] = []

    def visit(e: Expr) -> Expr:
        if isinstance(e, Const):
            name = next(names)
            bindings.append((name, e))
            return Var(name)
        if isinstance(e, Let) and isinstance(e.bound, Const):
            # already a named constant
            return Let(e.name, e.bound, visit(e.body))
        if not e.children:
            return e
        return e.with_children([visit(c) for c in e.children])

    body = visit(f.body)
    for name, const in reversed(bindings):
        body = Let(name, const, body)
    return f.with_body(body)


def to_three_address(f: FunctionSpec) -> FunctionSpec:
    """Flatten the body into a chain of single-operation bindings.

    Temporaries ``_t<i>`` are numbered in left-to-right post-order.  The root
    operation of a user binding keeps the user's name.
    """
    names = _fresh_names("_t", set(f.variables()))
    bindings: list[tuple[str, Expr]] = []

    def atom(e: Expr, name: str = None) -> Expr:
        """Emit bindings for ``e`` and return a Var (or Const) holding its value."""
        if isinstance(e, (Var, Const)):
            if name is not None:
                bindings.append((name, e))
                return Var(name)
            return e
        if isinstance(e, Let):
            atom(e.bound, e.name)
            return atom(e.body, name)
        if is_operation(e):
            args = [atom(c) for c in e.children]
            name = name or next(names)
            bindings.append((name, e.with_children(args)))
            return Var(name)
        raise TypeError(f"unknown expression {e!r}")

    result = atom(f.body)
    body: Expr = result
    for name, bound in reversed(bindings):
        body = Let(name, bound, body)
    return f.with_body(body)


def normalize(f: FunctionSpec, coarse: bool = False) -> FunctionSpec:
    """Both passes, or the identity when only declared variables are tuned."""
    if coarse:
        return f
    return to_three_address(extract_constants(f))


def tunable_variables(f: FunctionSpec) -> list[str]:
    """Parameters and let-bound names in order of appearance."""
    return list(f.params) + let_names(f.body)
