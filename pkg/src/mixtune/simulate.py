"""Reference evaluators: exact rational and bit-accurate finite precision.

The finite-precision evaluator follows the same mixed-precision typing rules
as the analysis (see :mod:`mixtune.semantics`) and rounds to nearest-even in
IEEE single, double and quad (with subnormals) through MPFR contexts.
Evaluators are compiled to Python source once per (function, config), which
keeps 10**5-sample soundness checks affordable.
"""

from __future__ import annotations

import random
from typing import Callable, Iterable, Optional, Sequence

import gmpy2
from gmpy2 import mpfr, mpq

from .expr import Add, Const, Div, Expr, FunctionSpec, Let, Mul, Neg, Path, Sqrt, Sub, Var
from .numerics import Precision, Rational, rational, sqrt_enclosure
from .semantics import ConfigLike, config_precision, resolve, validate_config

#: bits of the rational stand-in for an irrational square root
EXACT_SQRT_BITS = 256

CONTEXTS = {
    Precision.FLOAT32: gmpy2.ieee(32),
    Precision.FLOAT64: gmpy2.ieee(64),
    Precision.FLOAT128: gmpy2.ieee(128),
}


def exact_sqrt(q: Rational) -> Rational:
    """Exact when ``q`` is a rational square, else within ``2**-256`` relative."""
    lo, hi = sqrt_enclosure(q, EXACT_SQRT_BITS)
    return lo if lo == hi else (lo + hi) / 2


def exact_eval(e: Expr, env: dict) -> Rational:
    """Evaluate ``e`` in exact rational arithmetic."""
    if isinstance(e, Var):
        return rational(env[e.name])
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Let):
        return exact_eval(e.body, {**env, e.name: exact_eval(e.bound, env)})
    if isinstance(e, Neg):
        return -exact_eval(e.arg, env)
    if isinstance(e, Sqrt):
        arg = exact_eval(e.arg, env)
        if arg < 0:
            raise ValueError(f"sqrt of negative value {arg}")
        return exact_sqrt(arg)
    a, b = exact_eval(e.lhs, env), exact_eval(e.rhs, env)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    if isinstance(e, Div):
        return a / b
    raise TypeError(f"unknown expression {e!r}")


def round_to(value, precision: Precision):
    """Round an exact or wider value to the nearest ``precision`` float."""
    ctx = CONTEXTS[precision]
    if isinstance(value, Rational):
        return mpfr(value, 0, ctx)
    return ctx.plus(value)


# ---------------------------------------------------------------------------
# compiled evaluators

_BINARY = {Add: "add", Sub: "sub", Mul: "mul", Div: "div"}
_EXACT_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


class _Compiler:
    def __init__(self, f: FunctionSpec):
        self.f = f
        self.lines: list[str] = []
        self.consts: dict[str, object] = {}
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"_r{self.counter}"

    def const(self, value) -> str:
        name = f"_k{len(self.consts)}"
        self.consts[name] = value
        return name

    def build(self, result: str, extra_globals: dict) -> Callable:
        params = ", ".join(f"v_{p}" for p in self.f.params)
        src = [f"def _eval({params}):"] + [f"    {line}" for line in self.lines] + [f"    return {result}"]
        namespace = {**extra_globals, **self.consts}
        exec("\n".join(src), namespace)
        fn = namespace["_eval"]
        fn.source = "\n".join(src)
        return fn


def compile_exact(f: FunctionSpec) -> Callable:
    """``fn(*param_values) -> Rational``; raises ZeroDivisionError at poles."""
    c = _Compiler(f)

    def visit(e: Expr) -> str:
        if isinstance(e, Var):
            return f"v_{e.name}"
        if isinstance(e, Const):
            return c.const(e.value)
        if isinstance(e, Let):
            c.lines.append(f"v_{e.name} = {visit(e.bound)}")
            return visit(e.body)
        name = c.fresh()
        if isinstance(e, Neg):
            c.lines.append(f"{name} = -{visit(e.arg)}")
        elif isinstance(e, Sqrt):
            c.lines.append(f"{name} = _sqrt({visit(e.arg)})")
        else:
            lhs, rhs = visit(e.lhs), visit(e.rhs)
            c.lines.append(f"{name} = {lhs} {_EXACT_SYMBOL[type(e)]} {rhs}")
        return name

    result = visit(f.body)
    return c.build(result, {"_sqrt": exact_sqrt})


def compile_float(f: FunctionSpec, config: ConfigLike) -> Callable:
    """``fn(*param_values) -> mpfr`` simulating ``f`` under a float ``config``."""
    validate_config(f, config)
    typing = resolve(f.body, config)
    c = _Compiler(f)
    ctx_names = {p: f"_c{p.bits}" for p in CONTEXTS}
    for p in f.params:
        prec = config_precision(config, p)
        if not prec.is_float:
            raise ValueError("compile_float needs a floating-point configuration")
        c.lines.append(f"v_{p} = _mpfr(v_{p}, 0, {ctx_names[prec]})")
    var_prec = {p: config_precision(config, p) for p in f.params}

    def convert(expr_text: str, src: Precision, dst: Precision) -> str:
        return expr_text if dst >= src else f"{ctx_names[dst]}.plus({expr_text})"

    def visit(e: Expr, path: Path) -> tuple[str, Precision]:
        t = typing[path]
        if isinstance(e, Var):
            return f"v_{e.name}", var_prec[e.name]
        if isinstance(e, Const):
            return c.const(round_to(e.value, t.op)), t.op
        if isinstance(e, Let):
            p = config_precision(config, e.name)
            text, src = visit(e.bound, path + (0,))
            c.lines.append(f"v_{e.name} = {convert(text, src, p)}")
            var_prec[e.name] = p
            return visit(e.body, path + (1,))
        pi = t.op
        ctx = ctx_names[pi]
        args = [visit(k, path + (i,))[0] for i, k in enumerate(e.children)]
        if isinstance(e, Neg):
            call = f"{ctx}.minus({args[0]})"
        elif isinstance(e, Sqrt):
            call = f"{ctx}.sqrt({args[0]})"
        else:
            call = f"{ctx}.{_BINARY[type(e)]}({args[0]}, {args[1]})"
        name = c.fresh()
        c.lines.append(f"{name} = {convert(call, pi, t.result)}")
        return name, t.result

    result, _ = visit(f.body, ())
    env = {"_mpfr": mpfr}
    env.update({name: CONTEXTS[p] for p, name in ctx_names.items()})
    return c.build(result, env)


def finite_eval(f: FunctionSpec, config: ConfigLike, inputs: dict):
    """Finite-precision value of ``f`` at exact ``inputs`` (returned as a Rational).

    Fixed-point configurations run the generated fixed-point program through
    its bit-accurate simulator.  Non-finite float results raise OverflowError.
    """
    precs = [config] if isinstance(config, Precision) else list(config.values())
    if not precs[0].is_float:
        from .codegen import build_fixed_program, simulate_fixed

        return simulate_fixed(build_fixed_program(f, config), inputs)
    fn = compile_float(f, config)
    return to_rational(fn(*(rational(inputs[p]) for p in f.params)))


def to_rational(x) -> Rational:
    if isinstance(x, Rational):
        return x
    if not gmpy2.is_finite(x):
        raise OverflowError(f"non-finite result {x}")
    return mpq(x)


# ---------------------------------------------------------------------------
# sampling

def sample_inputs(f: FunctionSpec, n: int, seed: int = 0, corners: bool = True) -> list[tuple]:
    """``n`` random dyadic points of the input box (plus its corners when small)."""
    rng = random.Random(seed)
    boxes = [f.input_ranges[p] for p in f.params]
    points: list[tuple] = []
    if corners and len(boxes) <= 10:
        import itertools

        points.extend(itertools.product(*[(b.lo, b.hi) for b in boxes]))
    scale = mpq(1, 1 << 64)
    while len(points) < n:
        points.append(tuple(b.lo + b.width * (rng.getrandbits(64) * scale) for b in boxes))
    return points[:n]


def exact_values(f: FunctionSpec, points: Iterable[Sequence]) -> list[Optional[Rational]]:
    """Exact results per point; None where the expression is undefined."""
    fn = compile_exact(f)
    out = []
    for pt in points:
        try:
            out.append(fn(*pt))
        except (ZeroDivisionError, ValueError):
            out.append(None)
    return out


def max_sampled_error(f: FunctionSpec, config: ConfigLike, points: Sequence[Sequence],
                      exact: Optional[Sequence] = None) -> Rational:
    """Largest observed ``|exact - finite|`` over ``points``; inf values raise OverflowError."""
    if exact is None:
        exact = exact_values(f, points)
    precs = [config] if isinstance(config, Precision) else list(config.values())
    worst = mpq(0)
    if not precs[0].is_float:
        from .codegen import build_fixed_program, simulate_fixed

        program = build_fixed_program(f, config)
        for pt, ex in zip(points, exact):
            if ex is None:
                continue
            err = abs(simulate_fixed(program, dict(zip(f.params, pt))) - ex)
            if err > worst:
                worst = err
        return worst
    fn = compile_float(f, config)
    for pt, ex in zip(points, exact):
        if ex is None:
            continue
        err = abs(to_rational(fn(*pt)) - ex)
        if err > worst:
            worst = err
    return worst
