"""Shared corpus loading for the test modules."""

import pathlib

from mixtune.parser import parse, parse_file

ROOT = pathlib.Path(__file__).resolve().parent.parent
BENCHMARKS = ROOT / "benchmarks"

RIGID_BODY_1 = """
def rigidBody1(x1: Real, x2: Real, x3: Real): Real = {
  require(-15.0 <= x1 && x1 <= 15 && -15.0 <= x2 && x2 <= 15.0 && -15.0 <= x3 && x3 <= 15)
  -x1*x2 - 2*x2*x3 - x1 - x3
} ensuring (res => res +/- 1.75e-13)
"""


def corpus_files():
    return sorted(BENCHMARKS.glob("*.daisy"))


def corpus():
    return [f for path in corpus_files() for f in parse_file(path)]


def spec(source: str):
    """Parse a single-function program."""
    (f,) = parse(source)
    return f


# -- point evaluation with rigorous enclosures ---------------------------------

def enclose(e, env):
    """Interval enclosing the exact value of ``e`` at the point ``env``.

    The result is a single point unless a square root is irrational.  Raises
    ZeroDivisionError or ValueError where ``e`` is undefined (or the enclosure
    cannot decide it).
    """
    from mixtune.errors import DivisionByZeroRange, NegativeSqrtRange
    from mixtune.expr import Const, Let, Var
    from mixtune.numerics import Interval, interval_op

    if isinstance(e, Var):
        value = env[e.name]
        return value if isinstance(value, Interval) else Interval.point(value)
    if isinstance(e, Const):
        return Interval.point(e.value)
    if isinstance(e, Let):
        return enclose(e.body, {**env, e.name: enclose(e.bound, env)})
    args = [enclose(c, env) for c in e.children]
    try:
        return interval_op(e.op, *args)
    except DivisionByZeroRange as exc:
        raise ZeroDivisionError(str(exc)) from None
    except NegativeSqrtRange as exc:
        raise ValueError(str(exc)) from None


def same_value(e1, e2, env) -> bool:
    """Do ``e1`` and ``e2`` agree at ``env``?  None when either is undefined there."""
    try:
        a, b = enclose(e1, env), enclose(e2, env)
    except (ZeroDivisionError, ValueError):
        return None
    return a.lo <= b.hi and b.lo <= a.hi


# -- small tuning instances ------------------------------------------------------

def random_tuning_instance(rng, max_vars=5):
    """A random function with at most ``max_vars`` tunable variables and a target
    chosen between its uniform high and uniform low bounds."""
    from fractions import Fraction

    from mixtune.analysis import roundoff_error
    from mixtune.errors import AnalysisError
    from mixtune.expr import Add, Div, FunctionSpec, Mul, Sub, Var
    from mixtune.numerics import Interval, Precision
    from mixtune.transform import normalize

    while True:
        n_params = rng.randint(1, 3)
        params = tuple(f"p{i}" for i in range(n_params))
        box = {}
        for p in params:
            lo = Fraction(rng.randint(1, 400), 8)
            box[p] = Interval(lo, lo + Fraction(rng.randint(1, 400), 8))
        # a left-leaning chain of operations over the parameters
        e = Var(params[0])
        for _ in range(max_vars - n_params):
            op = rng.choice((Add, Sub, Mul, Div))
            e = op(e, Var(rng.choice(params))) if rng.random() < 0.5 else op(Var(rng.choice(params)), e)
        f = normalize(FunctionSpec("instance", params, box, e))
        if len(f.variables()) > max_vars:
            continue
        try:
            hi = roundoff_error(f, None, Precision.FLOAT64).value
            lo = roundoff_error(f, None, Precision.FLOAT32).value
        except AnalysisError:
            continue
        t = Fraction(rng.randint(1, 999), 1000)
        return f.with_target(hi + (lo - hi) * t * t * t)


# -- acceptance summary ------------------------------------------------------------

#: (criterion number, "PASS"/"FAIL", detail), filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: list = []
