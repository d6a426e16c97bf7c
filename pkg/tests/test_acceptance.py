"""Acceptance suite.

Each criterion is a plain ``check_N`` function that raises AssertionError on
failure and otherwise returns a one-line summary of what it measured.  Under
pytest every check records a PASS/FAIL line which conftest prints at the end
of the session; ``python -m tests.test_acceptance`` runs them without pytest.
"""

import itertools
import random
import subprocess
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import pytest

from mixtune.analysis import check_bound, compute_ranges, fixed_format, roundoff_error
from mixtune.codegen import build_fixed_program, emit_fixed, simulate_fixed
from mixtune.errors import AnalysisError, FormatOverflow
from mixtune.expr import Add, Const, Div, FunctionSpec, Mul, Neg, Sqrt, Sub, Var, count_ops, free_vars
from mixtune.numerics import (
    FIXED_LADDER, FLOAT_LADDER, AffineForm, Interval, affine_op, interval_op, pow2, rational, to_interval,
)
from mixtune.pipeline import _SEARCH_CACHE, gen_bounds, optimize
from mixtune.rewriting import DEFAULT_RULES, genetic_search
from mixtune.simulate import compile_exact, exact_values, max_sampled_error, sample_inputs
from mixtune.tuner import CostModel, DeltaDebugger, cost

from tests.helpers import ACCEPTANCE_LINES, BENCHMARKS, RIGID_BODY_1, corpus, random_tuning_instance, same_value, spec

F32, F64, F128 = FLOAT_LADDER
FX16, FX32 = FIXED_LADDER


# -- 1. end-to-end soundness -----------------------------------------------------------

SOUNDNESS_SAMPLES = 10**5


def check_1():
    start = time.perf_counter()
    configs = checked = 0
    skipped = []
    for f in corpus():
        programs = {}
        for variant in gen_bounds(f.with_target(None)):
            res = optimize(variant)
            if res.status != "ok":
                skipped.append(f"{variant.name}: {res.status}")
                continue
            key = (res.function.body, tuple(sorted((v, p.short) for v, p in res.config.items())))
            if key not in programs or res.final_bound < programs[key][1]:
                programs[key] = (res, res.final_bound)
        by_body = {}
        for (body, _), (res, bound) in programs.items():
            by_body.setdefault(body, []).append((res, bound))
        for body, entries in by_body.items():
            g = entries[0][0].function
            points = sample_inputs(g, SOUNDNESS_SAMPLES, seed=2024)
            exact = exact_values(g, points)
            for res, bound in entries:
                observed = max_sampled_error(g, res.config, points, exact)
                assert observed <= bound, f"{res.name}: sampled {float(observed):.3e} > bound {float(bound):.3e}"
                configs += 1
            checked += sum(e is not None for e in exact) * len(entries)
    elapsed = time.perf_counter() - start
    assert not skipped, "; ".join(skipped)
    assert elapsed < 600, f"took {elapsed:.0f}s"
    return f"{configs} distinct tuned programs, {checked} sample evaluations, no violation, {elapsed:.0f}s"


# -- 2. rigidBody1 ----------------------------------------------------------------------

def check_2():
    f = spec(RIGID_BODY_1)
    assert count_ops(f.body) == 7 and len(f.params) == 3
    search = genetic_search(f)
    before = roundoff_error(f, None, F64).value
    after = roundoff_error(f.with_body(search.expr), None, F64).value
    assert count_ops(search.expr) <= 7
    assert after <= before
    assert 0.25 <= search.improvement <= 0.36, f"improvement {search.improvement:.4f}"

    _SEARCH_CACHE.clear()
    start = time.perf_counter()
    res = optimize(f)
    elapsed = time.perf_counter() - start
    assert res.status == "ok", res.message
    assert res.profile.get(F64, 0) > 0 and res.profile.get(F128, 0) > 0, res.profile
    assert check_bound(res.function, res.config)
    assert res.final_bound <= f.target_error
    assert elapsed < 30
    triple = tuple(res.profile.get(p, 0) for p in FLOAT_LADDER)
    return (f"7 ops 3 vars, rewrite improvement {100 * search.improvement:.2f}%, "
            f"tuned (f32, f64, f128) ops {triple}, bound {float(res.final_bound):.4e}, {elapsed:.1f}s")


# -- 3. delta debugging vs exhaustive enumeration ------------------------------------------

DD_INSTANCES = 50


def check_3():
    rng = random.Random(31337)
    ladder = (F32, F64)
    mixed = 0
    for k in range(DD_INSTANCES):
        f = random_tuning_instance(rng)
        names = f.variables()
        assert len(names) <= 5
        ranges = compute_ranges(f)
        model = CostModel("simple")
        table = {}
        for combo in itertools.product(ladder, repeat=len(names)):
            config = dict(zip(names, combo))
            table[combo] = (check_bound(f, config, ranges), cost(f, config, model, ranges))
        dd = DeltaDebugger(f, ranges, ladder, "simple")
        config = dd.run()
        chosen = tuple(config[v] for v in names)
        ok, chosen_cost = table[chosen]
        assert ok, f"instance {k}: returned config violates the bound"
        uniform = [c for combo, (valid, c) in table.items() if valid and len(set(combo)) == 1]
        assert chosen_cost <= min(uniform), f"instance {k}: dearer than the best uniform config"
        visited = [tuple(c[v] for v in names) for c in dd.passes[-1].visited]
        assert all(table[v][0] for v in visited)
        assert chosen_cost == min(table[v][1] for v in visited), f"instance {k}: not the visited minimum"
        mixed += len(set(chosen)) > 1
    return f"{DD_INSTANCES} instances over 2^n configs each, {mixed} with mixed answers"


# -- 4. rewriting preserves semantics ---------------------------------------------------

SEARCH_RUNS = 1000
POINTS_PER_RUN = 100
BOX = {"x": Interval(-2, 3), "y": Interval(1, 4), "z": Interval(Fraction(-1, 2), Fraction(5, 2))}


def random_expr(rng, depth):
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.8:
            return Var(rng.choice("xyz"))
        return Const(Fraction(rng.randint(1, 40), 4))
    kind = rng.choice((Add, Sub, Mul, Div, Add, Sub, Mul, Neg, Sqrt))
    if kind is Neg:
        return Neg(random_expr(rng, depth - 1))
    if kind is Sqrt:
        return Sqrt(random_expr(rng, depth - 1))
    return kind(random_expr(rng, depth - 1), random_expr(rng, depth - 1))


def _depth(e):
    return 1 + max((_depth(c) for c in e.children), default=-1)


def _box_point(rng):
    return {v: b.lo + b.width * Fraction(rng.getrandbits(32), 2**32) for v, b in BOX.items()}


def _agree(e1, e2, env, exact1, exact2):
    """True/False, or None when either side is undefined at ``env``."""
    if exact1 is not None:
        args = [env[v] for v in "xyz"]
        try:
            a, b = exact1(*args), exact2(*args)
        except (ZeroDivisionError, ValueError):
            return None
        return a == b
    # square roots: compare exact enclosures instead of 256-bit approximations
    return same_value(e1, e2, env)


def check_4():
    rng = random.Random(4)
    rule_points = 0
    for rule in DEFAULT_RULES:
        metavars = sorted(free_vars(rule.pattern))
        for _ in range(100):
            lo = 0 if rule.guard is not None else -50
            env = {v: Fraction(rng.randint(lo * 64, 50 * 64), 64) for v in metavars}
            agree = same_value(rule.pattern, rule.replacement, env)
            assert agree is not False, f"rule {rule.name} disagrees at {env}"
            rule_points += agree is not None

    compared = changed = 0
    for run in range(SEARCH_RUNS):
        e = random_expr(rng, 5)
        assert _depth(e) <= 5
        f = FunctionSpec("r", ("x", "y", "z"), BOX, e)
        result = genetic_search(f)
        assert count_ops(result.expr) <= count_ops(e), f"run {run}: op count grew"
        changed += result.expr != e
        has_sqrt = any(isinstance(n, Sqrt) for n in _nodes(e)) or any(isinstance(n, Sqrt) for n in _nodes(result.expr))
        exact1 = exact2 = None
        if not has_sqrt:
            exact1 = compile_exact(f)
            exact2 = compile_exact(f.with_body(result.expr))
        for _ in range(POINTS_PER_RUN):
            env = _box_point(rng)
            agree = _agree(e, result.expr, env, exact1, exact2)
            assert agree is not False, f"run {run}: {e} vs {result.expr} at {env}"
            compared += agree is not None
    return (f"{len(DEFAULT_RULES)} rules at {rule_points} points; {SEARCH_RUNS} searches "
            f"({changed} rewrote) agree at {compared} defined points")


def _nodes(e):
    yield e
    for c in e.children:
        yield from _nodes(c)


# -- 5. numerics ---------------------------------------------------------------------------

NUMERIC_PAIRS = 10**4


def _random_interval(rng, positive=False):
    lo_bound = 1 if positive else -50 * 64
    a, b = rng.randint(lo_bound, 50 * 64), rng.randint(lo_bound, 50 * 64)
    return Interval(Fraction(min(a, b), 64), Fraction(max(a, b), 64))


def _inside(rng, iv):
    return iv.lo + iv.width * rational(Fraction(rng.randint(0, 1000), 1000))


def check_5():
    rng = random.Random(5)
    exact = {"add": lambda a, b: a + b, "sub": lambda a, b: a - b, "mul": lambda a, b: a * b,
             "div": lambda a, b: a / b}
    for _ in range(NUMERIC_PAIRS):
        op = rng.choice(("add", "sub", "mul", "div", "neg", "sqrt"))
        a = _random_interval(rng, positive=op == "sqrt")
        b = _random_interval(rng, positive=op == "div")
        x, y = _inside(rng, a), _inside(rng, b)
        ia, fa = a, AffineForm.from_interval(a)
        if op in ("neg", "sqrt"):
            iv = interval_op(op, ia)
            av = to_interval(affine_op(op, fa))
            for r in (iv, av):
                if op == "neg":
                    assert -x in r
                else:
                    assert r.lo * r.lo <= x <= r.hi * r.hi and r.hi >= 0
            continue
        fb = AffineForm.from_interval(b)
        value = exact[op](x, y)
        assert value in interval_op(op, ia, b), (op, a, b, x, y)
        assert value in to_interval(affine_op(op, fa, fb)), (op, a, b, x, y)
        # correlated operands: both sides share the noise of ``a``
        if op != "div":
            assert exact[op](x, x) in to_interval(affine_op(op, fa, fa)), (op, a, x)
        elif 0 not in a:
            assert 1 in to_interval(affine_op(op, fa, fa)), (op, a, x)
    for _ in range(100):
        fa = AffineForm.from_interval(_random_interval(rng))
        diff = affine_op("sub", fa, fa)
        assert diff.x0 == 0 and diff.noise == ()
    assert (F32.machine_epsilon, F64.machine_epsilon, F128.machine_epsilon) == (pow2(-24), pow2(-53), pow2(-113))
    return f"{NUMERIC_PAIRS} random operand pairs (interval and affine), x - x = 0, eps 2^-24/2^-53/2^-113"


# -- 6. fixed point -------------------------------------------------------------------------

FIXED_SAMPLES = 10**4


def check_6():
    fmt = fixed_format(Interval(-15, 15), FX16)
    assert (fmt.integer_bits, fmt.fractional_bits) == (4, 11)
    try:
        fixed_format(Interval(-70000, 70000), FX16)
    except FormatOverflow:
        pass
    else:
        raise AssertionError("no FormatOverflow for a 17-bit integer part")
    big = spec("def big(x: Real): Real = { require(0 <= x && x <= 300) x * x }")
    try:
        roundoff_error(big, None, FX16)
    except FormatOverflow:
        pass
    else:
        raise AssertionError("no FormatOverflow for x*x on [0, 300] in 16 bits")

    checked = []
    for f in corpus():
        for p in FIXED_LADDER:
            try:
                bound = roundoff_error(f, None, p).value
                program = build_fixed_program(f, p)
            except AnalysisError:
                continue
            assert emit_fixed(f, p)
            points = sample_inputs(f, FIXED_SAMPLES, seed=6)
            worst = Fraction(0)
            for pt, ex in zip(points, exact_values(f, points)):
                if ex is None:
                    continue
                err = abs(simulate_fixed(program, dict(zip(f.params, pt))) - ex)
                worst = max(worst, err)
            assert worst <= bound, f"{f.name} {p.short}: sampled {float(worst):.3e} > bound {float(bound):.3e}"
            checked.append(f"{f.name}/{p.short}")
    assert "rigidBody1/fixed16" in checked
    return f"Q4.11 on [-15, 15], FormatOverflow raised, {len(checked)} fixed programs within bound on {FIXED_SAMPLES} samples"


# -- 7. determinism --------------------------------------------------------------------------

def _pipeline_run(workdir: Path) -> dict:
    workdir.mkdir()
    for path in sorted(BENCHMARKS.glob("*.daisy")):
        proc = subprocess.run(
            [sys.executable, "-m", "mixtune", "run", str(path), "--codegen", "both", "--out-dir", "gen",
             "--report", f"{path.stem}.txt"],
            cwd=workdir, capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
    return {str(p.relative_to(workdir)): p.read_bytes() for p in sorted(workdir.rglob("*")) if p.is_file()}


def check_7():
    with tempfile.TemporaryDirectory() as tmp:
        first = _pipeline_run(Path(tmp) / "a")
        second = _pipeline_run(Path(tmp) / "b")
    assert first.keys() == second.keys()
    different = [k for k in first if first[k] != second[k]]
    assert not different, f"differing files: {different}"
    code = sum(k.endswith((".c", ".scala")) for k in first)
    return f"{len(first)} files ({code} generated sources) byte-identical across two runs"


# -- 8. monotonicity ---------------------------------------------------------------------------

def check_8():
    strict = 0
    for f in corpus():
        bounds = [roundoff_error(f, None, p).value for p in FLOAT_LADDER]
        points = sample_inputs(f, 2000, seed=8)
        exact = exact_values(f, points)
        for (lo_p, lo_b), hi_b in zip(zip(FLOAT_LADDER, bounds), bounds[1:]):
            assert lo_b >= hi_b, f"{f.name}: bound({lo_p.short}) < next precision"
            if max_sampled_error(f, lo_p, points, exact) > 0:
                assert lo_b > hi_b, f"{f.name}: bound({lo_p.short}) not strictly above"
                strict += 1
    return f"bound(f32) >= bound(f64) >= bound(f128) for {len(corpus())} functions, {strict} strict steps checked"


# -- runners -----------------------------------------------------------------------------------

CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6, 7: check_7, 8: check_8}


def run_criterion(number: int) -> tuple[bool, str]:
    try:
        detail = CHECKS[number]()
        ok = True
    except AssertionError as exc:
        detail, ok = f"{exc}".splitlines()[0] if str(exc) else "assertion failed", False
    line = (number, "PASS" if ok else "FAIL", detail)
    ACCEPTANCE_LINES.append(line)
    print(f"criterion {number}: {line[1]}  {detail}")
    return ok, detail


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number):
    ok, detail = run_criterion(number)
    assert ok, detail


if __name__ == "__main__":
    results = [run_criterion(n)[0] for n in sorted(CHECKS)]
    sys.exit(0 if all(results) else 1)
