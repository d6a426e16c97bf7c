"""Hypothesis strategies for random expressions and function specifications."""

from fractions import Fraction

from hypothesis import strategies as st

from mixtune.expr import Add, Const, Div, FunctionSpec, Let, Mul, Neg, Sqrt, Sub, Var
from mixtune.numerics import Interval

NAMES = ("x", "y", "z")
BOX = {"x": Interval(-2, 3), "y": Interval(1, 4), "z": Interval(Fraction(-1, 2), Fraction(5, 2))}

# source literals are decimals, so only terminating fractions round-trip through text
constants = st.builds(lambda k, d: Const(Fraction(k, 10**d)), st.integers(-10**6, 10**6), st.integers(0, 20))
leaves = st.one_of(st.sampled_from(NAMES).map(Var), constants)


def _extend(children, sqrt=True):
    options = [children.map(Neg)]
    if sqrt:
        options.append(children.map(Sqrt))
    options += [st.tuples(children, children).map(lambda ab, cls=cls: cls(*ab)) for cls in (Add, Sub, Mul, Div)]
    return st.one_of(*options)


bodies = st.recursive(leaves, _extend, max_leaves=12)


@st.composite
def functions(draw, body_strategy=bodies, with_target=True):
    lets = draw(st.lists(body_strategy, max_size=2))
    body = draw(body_strategy)
    for i, bound in reversed(list(enumerate(lets))):
        body = Let(f"v{i}", bound, body)
    target = None
    if with_target:
        target = draw(st.one_of(st.none(), st.builds(lambda k, d: Fraction(k, 10**d), st.integers(1, 999),
                                                     st.integers(0, 20))))
    return FunctionSpec("randomFunction", NAMES, dict(BOX), body, target)


def points(n=5):
    unit = st.fractions(min_value=0, max_value=1, max_denominator=997)
    return st.lists(st.tuples(unit, unit, unit), min_size=1, max_size=n).map(
        lambda ts: [tuple(BOX[p].lo + (BOX[p].hi - BOX[p].lo) * t for p, t in zip(NAMES, pt)) for pt in ts]
    )
