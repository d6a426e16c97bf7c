"""Source generation for tuned programs.

Float programs become C (float/double/__float128) or Scala (Float/Double/Quad)
with every precision change spelled out as a cast.  Fixed-point programs go
through a small integer IR that is both printed as C and executed by a
bit-accurate simulator, so the printed code and the simulated semantics
cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .analysis import FixedFormat, RangeMap, _ErrorAnalysis, compute_ranges
from .expr import (
    Const, Expr, FunctionSpec, Let, Path, Sqrt, Var, format_rational,
)
from .numerics import Precision, Rational, pow2, rational
from .semantics import ConfigLike, config_precision, resolve, validate_config

C_TYPES = {Precision.FLOAT32: "float", Precision.FLOAT64: "double", Precision.FLOAT128: "__float128"}
C_SUFFIX = {Precision.FLOAT32: "f", Precision.FLOAT64: "", Precision.FLOAT128: "q"}
C_SQRT = {Precision.FLOAT32: "sqrtf", Precision.FLOAT64: "sqrt", Precision.FLOAT128: "mixtune_sqrtq"}

# libquadmath's sqrtq can be off by one ulp; the exact fma residual decides
# between r and its neighbours, which makes the result correctly rounded
QUAD_SQRT_HELPER = """\
static __float128 mixtune_sqrtq(__float128 x) {
  __float128 r = sqrtq(x);
  if (!(x > 0) || isinfq(x)) return r;
  __float128 e = fmaq(-r, r, x);
  __float128 up = nextafterq(r, FLT128_MAX * 2);
  __float128 dn = nextafterq(r, 0);
  if (e > r * (up - r)) return up;
  if (e <= -r * (r - dn)) return dn;
  return r;
}
"""
SCALA_TYPES = {Precision.FLOAT32: "Float", Precision.FLOAT64: "Double", Precision.FLOAT128: "Quad"}
SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}

# identifiers that cannot name a C function or variable next to <math.h>
C_RESERVED = frozenset("""
    auto break case char const continue default do double else enum extern float for goto if inline int long
    register restrict return short signed sizeof static struct switch typedef union unsigned void volatile while
    _Bool _Complex _Imaginary bool main mixtune_sqrtq
    acos asin atan atan2 cbrt ceil copysign cos cosh erf erfc exp exp2 expm1 fabs fdim floor fma fmax fmin fmod
    frexp hypot ilogb j0 j1 jn ldexp lgamma log log10 log1p log2 logb lrint lround modf nan nearbyint nextafter
    pow remainder remquo rint round scalbn sin sinh sqrt tan tanh tgamma trunc y0 y1 yn
""".split())


def c_name(name: str) -> str:
    """``name`` unless it clashes with C, in which case a trailing underscore is added."""
    return name + "_" if name in C_RESERVED else name


# ---------------------------------------------------------------------------
# floating point

@dataclass(frozen=True)
class Operand:
    text: str  # variable name or literal
    precision: Precision
    cast_to: Optional[Precision] = None  # explicit conversion applied at the use site

    @property
    def effective(self) -> Precision:
        return self.cast_to or self.precision


@dataclass(frozen=True)
class FloatStmt:
    name: str
    precision: Precision  # declared precision of ``name``
    op: str  # add/sub/mul/div/neg/sqrt, "copy" or "const"
    op_precision: Precision
    args: tuple  # Operand values, or the Rational of a constant
    result_cast: Optional[Precision] = None


@dataclass(frozen=True)
class FloatProgram:
    name: str
    params: tuple  # (name, Precision)
    stmts: tuple
    result: str
    result_precision: Precision


def build_float_program(f: FunctionSpec, config: ConfigLike) -> FloatProgram:
    validate_config(f, config)
    typing = resolve(f.body, config)
    var_prec = {p: config_precision(config, p) for p in f.params}
    if not all(p.is_float for p in var_prec.values()):
        raise ValueError("float code generation needs a floating-point configuration")
    stmts: list[FloatStmt] = []
    counter = [0]

    def fresh():
        name = f"_e{counter[0]}"
        counter[0] += 1
        return name

    def operand(e: Expr, path: Path, pi: Precision) -> Operand:
        name, prec = visit(e, path, None)
        return Operand(name, prec, pi if prec is not pi else None)

    def visit(e: Expr, path: Path, target: Optional[str]) -> tuple[str, Precision]:
        t = typing[path]
        if isinstance(e, Var):
            if target is None:
                return e.name, var_prec[e.name]
            p = var_prec[target] = config_precision(config, target)
            src = var_prec[e.name]
            stmts.append(FloatStmt(target, p, "copy", p, (Operand(e.name, src, p if src is not p else None),)))
            return target, p
        if isinstance(e, Const):
            name = target or fresh()
            p = config_precision(config, target) if target else t.result
            var_prec[name] = p
            stmts.append(FloatStmt(name, p, "const", p, (e.value,)))
            return name, p
        if isinstance(e, Let):
            visit(e.bound, path + (0,), e.name)
            return visit(e.body, path + (1,), target)
        pi = t.op
        args = tuple(operand(k, path + (i,), pi) for i, k in enumerate(e.children))
        name = target or fresh()
        result = config_precision(config, target) if target else t.result
        var_prec[name] = result
        stmts.append(FloatStmt(name, result, e.op, pi, args, result if result is not pi else None))
        return name, result

    result, rp = visit(f.body, (), None)
    params = tuple((p, config_precision(config, p)) for p in f.params)
    return FloatProgram(f.name, params, tuple(stmts), result, rp)


def check_casts(program: FloatProgram) -> list[str]:
    """Precision changes that are not explicit in ``program`` (empty when cast-complete)."""
    problems = []
    declared = dict(program.params)
    for s in program.stmts:
        if s.op == "const":
            declared[s.name] = s.precision
            continue
        for a in s.args:
            if declared.get(a.text) is not a.precision:
                problems.append(f"{s.name}: operand {a.text} has precision {declared.get(a.text)}")
            if a.effective is not s.op_precision:
                problems.append(f"{s.name}: operand {a.text} enters {s.op_precision.short} implicitly")
        produced = s.result_cast or s.op_precision
        if produced is not s.precision:
            problems.append(f"{s.name}: {s.op_precision.short} result stored in {s.precision.short} implicitly")
        declared[s.name] = s.precision
    return problems


def _c_literal(value: Rational, p: Precision) -> str:
    text = format_rational(value)
    if "/" in text:
        n, d = text.split("/")
        return f"({n}.0{C_SUFFIX[p]} / {d}.0{C_SUFFIX[p]})"
    return text + C_SUFFIX[p]


def _scala_literal(value: Rational, p: Precision) -> str:
    text = format_rational(value)
    if p is Precision.FLOAT128 or "/" in text:
        return f'{SCALA_TYPES[p]}("{text}")' if "/" not in text else f"({text.replace('/', '.0 / ')}.0)"
    return text + ("f" if p is Precision.FLOAT32 else "")


def emit_float(f: FunctionSpec, config: ConfigLike, target: str = "c", bound: Optional[Rational] = None) -> str:
    """Mixed-precision source for ``f`` with explicit casts; target ``"c"`` or ``"scala"``."""
    program = build_float_program(f, config)
    problems = check_casts(program)
    if problems:
        raise AssertionError("; ".join(problems))
    if target == "c":
        return _emit_c(program, bound)
    if target == "scala":
        return _emit_scala(program, bound)
    raise ValueError(f"unknown target {target!r}")


def _emit_c(program: FloatProgram, bound) -> str:
    def use(a: Operand) -> str:
        return f"({C_TYPES[a.cast_to]}){c_name(a.text)}" if a.cast_to else c_name(a.text)

    body = []
    needs_math = needs_quadmath = False
    for s in program.stmts:
        ctype = C_TYPES[s.precision]
        if s.op == "const":
            expr = _c_literal(s.args[0], s.precision)
        elif s.op == "copy":
            expr = use(s.args[0])
        else:
            if s.op == "neg":
                expr = f"-{use(s.args[0])}"
            elif s.op == "sqrt":
                expr = f"{C_SQRT[s.op_precision]}({use(s.args[0])})"
                needs_quadmath |= s.op_precision is Precision.FLOAT128
                needs_math |= s.op_precision is not Precision.FLOAT128
            else:
                expr = f"{use(s.args[0])} {SYMBOLS[s.op]} {use(s.args[1])}"
            if s.result_cast:
                expr = f"({C_TYPES[s.result_cast]})({expr})"
        body.append(f"  {ctype} {c_name(s.name)} = {expr};")
    lines = []
    if needs_math:
        lines.append("#include <math.h>")
    if needs_quadmath:
        lines.append("#include <quadmath.h>")
    if lines:
        lines.append("")
    if needs_quadmath:
        lines.append(QUAD_SQRT_HELPER)
    if bound is not None:
        lines.append(f"/* {program.name}: worst-case absolute roundoff error <= {float(bound):.6e} */")
    params = ", ".join(f"{C_TYPES[p]} {c_name(n)}" for n, p in program.params)
    lines.append(f"{C_TYPES[program.result_precision]} {c_name(program.name)}({params}) {{")
    lines.extend(body)
    lines.append(f"  return {c_name(program.result)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _emit_scala(program: FloatProgram, bound) -> str:
    def use(a: Operand) -> str:
        return f"{a.text}.to{SCALA_TYPES[a.cast_to]}" if a.cast_to else a.text

    lines = []
    if bound is not None:
        lines.append(f"// {program.name}: worst-case absolute roundoff error <= {float(bound):.6e}")
    params = ", ".join(f"{n}: {SCALA_TYPES[p]}" for n, p in program.params)
    lines.append(f"def {program.name}({params}): {SCALA_TYPES[program.result_precision]} = {{")
    for s in program.stmts:
        if s.op == "const":
            expr = _scala_literal(s.args[0], s.precision)
        elif s.op == "copy":
            expr = use(s.args[0])
        else:
            if s.op == "neg":
                expr = f"-{use(s.args[0])}"
            elif s.op == "sqrt":
                expr = f"sqrt({use(s.args[0])})"
            else:
                expr = f"{use(s.args[0])} {SYMBOLS[s.op]} {use(s.args[1])}"
            if s.result_cast:
                expr = f"({expr}).to{SCALA_TYPES[s.result_cast]}"
        lines.append(f"  val {s.name}: {SCALA_TYPES[s.precision]} = {expr}")
    lines.append(f"  {program.result}")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# fixed point

INT_TYPES = {16: "int16_t", 32: "int32_t", 64: "int64_t", 128: "__int128"}


@dataclass(frozen=True)
class FixedStmt:
    name: str
    op: str  # add/sub/mul/div/neg, "copy" or "const"
    args: tuple  # operand names; for "const" the integer code
    fmt: FixedFormat  # format of the stored value
    op_fmt: Optional[FixedFormat] = None  # format the operation rounds to before storing
    real: Optional[Rational] = None  # constant value before quantization


@dataclass(frozen=True)
class FixedProgram:
    name: str
    params: tuple  # (name, FixedFormat)
    stmts: tuple
    result: str
    formats: dict  # every variable's format

    @property
    def result_format(self) -> FixedFormat:
        return self.formats[self.result]


def quantize(value: Rational, fmt: FixedFormat) -> int:
    """Truncating conversion of a real to ``fmt`` (toward minus infinity)."""
    scaled = rational(value) * pow2(fmt.fractional_bits)
    return int(scaled.numerator // scaled.denominator)


def _exact_frac(op: str, fmts: list[FixedFormat]) -> int:
    if op in ("add", "sub"):
        return max(f.fractional_bits for f in fmts)
    if op == "mul":
        return fmts[0].fractional_bits + fmts[1].fractional_bits
    return fmts[0].fractional_bits


def container_bits(op: str, bits: int) -> int:
    """Width of the intermediate integer an operation of ``bits`` computes in."""
    wide = 2 * bits
    return 2 * wide if op == "div" else wide


def build_fixed_program(f: FunctionSpec, config: ConfigLike, ranges: Optional[RangeMap] = None) -> FixedProgram:
    """Integer IR for ``f``; formats come from the error analysis."""
    validate_config(f, config)
    if ranges is None:
        ranges = compute_ranges(f)
    analysis = _ErrorAnalysis(f, ranges, config)
    analysis.run()
    if any(config_precision(config, p).is_float for p in f.params):
        raise ValueError("fixed-point code generation needs a fixed-point configuration")
    formats: dict[str, FixedFormat] = dict(analysis.formats)
    nodes = analysis.node_formats
    stmts: list[FixedStmt] = []
    counter = [0]

    def fresh():
        name = f"_e{counter[0]}"
        counter[0] += 1
        return name

    def visit(e: Expr, path: Path, target: Optional[str]) -> str:
        if isinstance(e, Var):
            if target is None:
                return e.name
            stmts.append(FixedStmt(target, "copy", (e.name,), formats[target]))
            return target
        if isinstance(e, Const):
            name = target or fresh()
            fmt = nodes[path]
            formats[name] = fmt
            stmts.append(FixedStmt(name, "const", (quantize(e.value, fmt),), fmt, real=e.value))
            return name
        if isinstance(e, Let):
            visit(e.bound, path + (0,), e.name)
            return visit(e.body, path + (1,), target)
        if isinstance(e, Sqrt):
            raise ValueError("square root is not supported in fixed-point arithmetic")
        args = tuple(visit(k, path + (i,), None) for i, k in enumerate(e.children))
        name = target or fresh()
        fmt = nodes[(*path, "store")]
        formats[name] = fmt
        stmts.append(FixedStmt(name, e.op, args, fmt, op_fmt=nodes[path]))
        return name

    result = visit(f.body, (), None)
    params = tuple((p, formats[p]) for p in f.params)
    return FixedProgram(f.name, params, tuple(stmts), result, formats)


def _shift(value: int, by: int) -> int:
    """Multiply by ``2**by``; negative ``by`` is a flooring right shift."""
    return value << by if by >= 0 else value >> -by


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def _check_range(value: int, bits: int, where: str) -> int:
    if not -(1 << (bits - 1)) <= value < (1 << (bits - 1)):
        raise OverflowError(f"{where}: {value} does not fit in {bits} bits")
    return value


def _op_plan(s: FixedStmt, fmts: list[FixedFormat]):
    """Integer steps of one operation: alignment shifts, exact fractional bits, pre-shift."""
    if s.op in ("add", "sub"):
        F = _exact_frac(s.op, fmts)
        return [F - fm.fractional_bits for fm in fmts], F, 0
    if s.op == "div":
        k = s.op_fmt.fractional_bits + fmts[1].fractional_bits - fmts[0].fractional_bits
        return [max(k, 0), max(-k, 0)], s.op_fmt.fractional_bits, 0
    return [0] * len(fmts), _exact_frac(s.op, fmts), 0


def run_fixed_stmt(s: FixedStmt, values: list[int], fmts: list[FixedFormat]) -> int:
    """Execute one operation on integer codes exactly as the emitted C does."""
    bits = s.op_fmt.total_bits
    wide = container_bits(s.op, bits)
    shifts, exact, _ = _op_plan(s, fmts)
    vals = [_check_range(v << sh, wide, s.name) for v, sh in zip(values, shifts)]
    if s.op == "add":
        r = vals[0] + vals[1]
    elif s.op == "sub":
        r = vals[0] - vals[1]
    elif s.op == "mul":
        r = vals[0] * vals[1]
    elif s.op == "neg":
        r = -vals[0]
    elif s.op == "div":
        if vals[1] == 0:
            raise ZeroDivisionError(f"{s.name}: division by zero")
        r = _trunc_div(vals[0], vals[1])
    else:
        raise ValueError(f"unknown fixed-point operation {s.op!r}")
    _check_range(r, wide, s.name)
    r = _check_range(_shift(r, s.op_fmt.fractional_bits - exact), bits, s.name)
    return _check_range(_shift(r, s.fmt.fractional_bits - s.op_fmt.fractional_bits), s.fmt.total_bits, s.name)


def simulate_fixed(program: FixedProgram, inputs: dict) -> Rational:
    """Run ``program`` on real ``inputs`` (quantized by truncation); returns the real result."""
    codes: dict[str, int] = {}
    for name, fmt in program.params:
        codes[name] = _check_range(quantize(inputs[name], fmt), fmt.total_bits, name)
    fmts = program.formats
    for s in program.stmts:
        if s.op == "const":
            codes[s.name] = _check_range(s.args[0], s.fmt.total_bits, s.name)
        elif s.op == "copy":
            src = s.args[0]
            codes[s.name] = _check_range(
                _shift(codes[src], s.fmt.fractional_bits - fmts[src].fractional_bits), s.fmt.total_bits, s.name
            )
        else:
            codes[s.name] = run_fixed_stmt(s, [codes[a] for a in s.args], [fmts[a] for a in s.args])
    result = program.result
    return rational(codes[result]) * pow2(-fmts[result].fractional_bits)


def _fmt_comment(fmt: FixedFormat) -> str:
    return f"1+{fmt.integer_bits}+{fmt.fractional_bits}"


def _shift_text(expr: str, by: int) -> str:
    if by == 0:
        return expr
    return f"({expr} << {by})" if by > 0 else f"({expr} >> {-by})"


def emit_fixed(f: FunctionSpec, config: ConfigLike, ranges: Optional[RangeMap] = None,
               target: str = "c", bound: Optional[Rational] = None) -> str:
    """C code over 16/32-bit signed integers with explicit alignment shifts."""
    if target != "c":
        raise ValueError("fixed-point code is emitted as C only")
    program = build_fixed_program(f, config, ranges)
    return emit_fixed_program(program, bound)


def emit_fixed_program(program: FixedProgram, bound: Optional[Rational] = None) -> str:
    fmts = program.formats
    lines = ["#include <stdint.h>", ""]
    if bound is not None:
        lines.append(f"/* {program.name}: worst-case absolute roundoff error <= {float(bound):.6e} */")
    lines.append("/* formats are sign+integer+fractional bits; a value v encodes v * 2^-fractional */")
    for name, fmt in program.params:
        lines.append(f"/* {name}: {_fmt_comment(fmt)} */")
    params = ", ".join(f"{INT_TYPES[fmt.total_bits]} {c_name(name)}" for name, fmt in program.params)
    rfmt = program.result_format
    lines.append(f"{INT_TYPES[rfmt.total_bits]} {c_name(program.name)}({params}) {{")
    for s in program.stmts:
        ctype = INT_TYPES[s.fmt.total_bits]
        comment = f"/* {s.name}: {_fmt_comment(s.fmt)} */"
        if s.op == "const":
            lines.append(f"  {ctype} {c_name(s.name)} = {s.args[0]}; {comment[:-3]}, {format_rational(s.real)} */")
            continue
        if s.op == "copy":
            src = s.args[0]
            expr = _shift_text(c_name(src), s.fmt.fractional_bits - fmts[src].fractional_bits)
            lines.append(f"  {ctype} {c_name(s.name)} = ({ctype}){expr}; {comment}")
            continue
        in_fmts = [fmts[a] for a in s.args]
        wide = INT_TYPES[container_bits(s.op, s.op_fmt.total_bits)]
        shifts, exact, _ = _op_plan(s, in_fmts)
        ops = [_shift_text(f"(({wide}){c_name(a)})", sh) for a, sh in zip(s.args, shifts)]
        if s.op == "neg":
            expr = f"-{ops[0]}"
        else:
            expr = f"{ops[0]} {SYMBOLS[s.op]} {ops[1]}"
        shift = s.op_fmt.fractional_bits - exact
        if shift:
            expr = _shift_text(f"({expr})", shift)
        if s.op_fmt.total_bits != s.fmt.total_bits or s.op_fmt != s.fmt:
            op_type = INT_TYPES[s.op_fmt.total_bits]
            expr = _shift_text(f"(({op_type})({expr}))", s.fmt.fractional_bits - s.op_fmt.fractional_bits)
        lines.append(f"  {ctype} {c_name(s.name)} = ({ctype})({expr}); {comment}")
    lines.append(f"  return {c_name(program.result)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
