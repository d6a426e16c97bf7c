"""Static range and worst-case roundoff error analysis.

Ranges of real-valued subexpressions are computed once (interval or affine
arithmetic) and cached per node path.  Errors are then propagated bottom-up as
affine forms: each operation carries forward the errors of its operands and
adds a fresh noise term for its own rounding.  A float rounding of a value
whose magnitude is at most ``M`` is bounded by ``2**floor(log2 M) * eps``,
i.e. half an ulp of the largest binade reached.  Fixed-point arithmetic
truncates and commits at most one unit in the last place of its format.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .errors import (
    AnalysisError, DivisionByZeroRange, FormatOverflow, NegativeSqrtRange, SpecialValueError,
)
from .expr import (
    Add, Const, Div, Expr, FunctionSpec, Let, Mul, Neg, Path, Sqrt, Sub, Var,
)
from .numerics import (
    ZERO, AffineForm, Interval, Precision, Rational, affine_op, floor_log2, interval_op, pow2, sqrt_enclosure,
)
from .semantics import ConfigLike, NodeTyping, config_precision, resolve, validate_config

logger = logging.getLogger(__name__)


@dataclass
class RangeMap:
    """Real-valued ranges of every node (by path) and every variable of one expression."""

    expr: Expr
    nodes: dict[Path, Interval]
    variables: dict[str, Interval]
    method: str = "interval"

    def __getitem__(self, path: Path) -> Interval:
        return self.nodes[path]

    @property
    def root(self) -> Interval:
        return self.nodes[()]


@dataclass(frozen=True)
class FixedFormat:
    total_bits: int
    integer_bits: int

    @property
    def fractional_bits(self) -> int:
        return self.total_bits - 1 - self.integer_bits

    @property
    def ulp(self) -> Rational:
        return pow2(-self.fractional_bits)

    def __str__(self):
        return f"Q{self.integer_bits}.{self.fractional_bits}"


@dataclass
class ErrorBound:
    value: Rational
    # fixed-point formats chosen by the analysis: per variable and per operation node
    formats: dict = field(default_factory=dict)
    node_formats: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


def fixed_format(rng: Interval, precision: Precision) -> FixedFormat:
    """Smallest integer part with ``2**integer_bits > max|range|``; one bit is the sign."""
    if precision.is_float:
        raise ValueError(f"{precision.short} is not a fixed-point precision")
    m = rng.max_abs()
    n = 0 if m < 1 else floor_log2(m) + 1
    fmt = FixedFormat(precision.bits, n)
    if fmt.fractional_bits < 0:
        raise FormatOverflow(
            f"range {rng!r} needs {n} integer bits, more than {precision.short} provides"
        )
    return fmt


# ---------------------------------------------------------------------------
# ranges

def _intersect(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.lo, b.lo), min(a.hi, b.hi))


def compute_ranges(f: FunctionSpec, method: Union[str, Callable] = "interval") -> RangeMap:
    """Bottom-up range analysis of ``f.body``.

    ``method`` is ``"interval"``, ``"affine"`` or a callable ``(f) -> RangeMap``
    (the hook for a refining backend such as an SMT solver).
    """
    if callable(method):
        return method(f)
    if method not in ("interval", "affine"):
        raise ValueError(f"unknown range method {method!r}")
    nodes: dict[Path, Interval] = {}
    variables: dict[str, Interval] = dict(f.input_ranges)
    affine = method == "affine"
    # Each value is (interval, affine form or None).  In affine mode the stored
    # range is the intersection of both enclosures, and nonlinear affine steps
    # linearize over that intersection: x*x stays nonnegative, for instance.
    env = {p: (r, AffineForm.from_interval(r) if affine else None) for p, r in f.input_ranges.items()}

    def store(path, iv, form=None):
        if form is not None:
            iv = _intersect(iv, form.to_interval())
        nodes[path] = iv
        return iv, form

    def visit(node: Expr, path: Path):
        if isinstance(node, Var):
            return store(path, *env[node.name])
        if isinstance(node, Const):
            return store(path, Interval.point(node.value), AffineForm.constant(node.value) if affine else None)
        if isinstance(node, Let):
            bound = visit(node.bound, path + (0,))
            env[node.name] = bound
            variables[node.name] = bound[0]
            return store(path, *visit(node.body, path + (1,)))
        args = [visit(c, path + (i,)) for i, c in enumerate(node.children)]
        iv = interval_op(node.op, *(a[0] for a in args))
        if not affine:
            return store(path, iv)
        if isinstance(node, Sqrt):
            form = args[0][1].sqrt(args[0][0])
        elif isinstance(node, Div):
            form = args[0][1] * args[1][1].inverse(args[1][0])
        else:
            form = affine_op(node.op, *(a[1] for a in args))
        return store(path, iv, form)

    visit(f.body, ())
    return RangeMap(f.body, nodes, variables, method if isinstance(method, str) else "plugin")


# ---------------------------------------------------------------------------
# roundoff errors

def float_roundoff(magnitude: Rational, precision: Precision) -> Rational:
    """Worst-case rounding error for any value with ``|v| <= magnitude``."""
    if magnitude == 0:
        return ZERO
    return pow2(floor_log2(magnitude)) * precision.machine_epsilon


def representable(value: Rational, precision: Precision, fmt: Optional[FixedFormat] = None) -> bool:
    if value == 0:
        return True
    if not precision.is_float:
        return (value * pow2(fmt.fractional_bits)).denominator == 1
    a = abs(value)
    if a.denominator & (a.denominator - 1):
        return False  # not dyadic
    if a > precision.max_finite or a < precision.min_normal:
        return False
    e = floor_log2(a)
    return (a * pow2(precision.significand - 1 - e)).denominator == 1


def check_special(rng: Interval, precision: Precision, where: str = "") -> None:
    if not precision.is_float:
        return
    if rng.max_abs() > precision.max_finite:
        raise SpecialValueError(f"{where}range {rng!r} overflows {precision.short}")
    mn = precision.min_normal
    if not (rng.lo == 0 and rng.hi == 0) and -mn < rng.lo and rng.hi < mn:
        raise SpecialValueError(f"{where}range {rng!r} contains only denormals in {precision.short}")


class _ErrorAnalysis:
    def __init__(self, f: FunctionSpec, ranges: RangeMap, config: ConfigLike):
        validate_config(f, config)
        self.f = f
        self.config = config
        self.ranges = ranges
        self.typing: dict[Path, NodeTyping] = resolve(f.body, config)
        self.env: dict[str, tuple[AffineForm, Precision]] = {}
        self.formats: dict[str, FixedFormat] = {}
        self.node_formats: dict[Path, FixedFormat] = {}

    # -- committed roundoff --------------------------------------------------

    def _rounding(self, rng: Interval, err: AffineForm, precision: Precision, exact_from=None):
        """Error committed by storing a value in ``precision``.

        For fixed point, ``exact_from`` is the number of fractional bits of the
        exact result; no error is committed when the target keeps them all.
        Returns ``(error, format)``.
        """
        finite = rng + err.to_interval()
        check_special(finite, precision)
        if precision.is_float:
            return float_roundoff(finite.max_abs(), precision), None
        fmt = fixed_format(finite, precision)
        if exact_from is not None and exact_from <= fmt.fractional_bits:
            return ZERO, fmt
        return fmt.ulp, fmt

    def input_error(self, name: str, rng: Interval, precision: Precision) -> AffineForm:
        if precision.is_float:
            check_special(rng, precision, f"input {name}: ")
            if rng.lo == rng.hi and representable(rng.lo, precision):
                return AffineForm.constant(ZERO)
            return AffineForm.from_error(float_roundoff(rng.max_abs(), precision))
        fmt = fixed_format(rng, precision)
        self.formats[name] = fmt
        if rng.lo == rng.hi and representable(rng.lo, precision, fmt):
            return AffineForm.constant(ZERO)
        return AffineForm.from_error(fmt.ulp)

    def run(self) -> ErrorBound:
        for p in self.f.params:
            prec = self.typing_for_var(p)
            self.env[p] = (self.input_error(p, self.f.input_ranges[p], prec), prec)
        err = self.visit(self.f.body, ())
        bound = err.to_interval().max_abs()
        return ErrorBound(bound, self.formats, self.node_formats)

    def typing_for_var(self, name: str) -> Precision:
        return config_precision(self.config, name)

    # -- propagation ---------------------------------------------------------

    def visit(self, node: Expr, path: Path) -> AffineForm:
        t = self.typing[path]
        if isinstance(node, Var):
            return self.env[node.name][0]
        if isinstance(node, Const):
            return self.constant(node.value, t.op, path)
        if isinstance(node, Let):
            return self.let(node, path)
        return self.operation(node, path, t)

    def constant(self, value: Rational, precision: Precision, path: Path) -> AffineForm:
        rng = Interval.point(value)
        if precision.is_float:
            check_special(rng, precision, "constant: ")
            if representable(value, precision):
                return AffineForm.constant(ZERO)
            return AffineForm.from_error(float_roundoff(abs(value), precision))
        fmt = fixed_format(rng, precision)
        self.node_formats[path] = fmt
        if representable(value, precision, fmt):
            return AffineForm.constant(ZERO)
        return AffineForm.from_error(fmt.ulp)

    def let(self, node: Let, path: Path) -> AffineForm:
        var_prec = self.typing_for_var(node.name)
        bound_path = path + (0,)
        bound = node.bound
        err = self.visit(bound, bound_path)
        rng = self.ranges[bound_path]
        if isinstance(bound, Var):
            src_prec = self.env[bound.name][1]
            src_fmt = self.formats.get(bound.name)
            exact_from = src_fmt.fractional_bits if src_fmt else None
            if var_prec.is_float and var_prec >= src_prec:
                check_special(rng + err.to_interval(), var_prec)
            else:
                rnd, fmt = self._rounding(rng, err, var_prec, exact_from)
                if fmt is not None:
                    self.formats[node.name] = fmt
                err = err.add_noise(rnd)
        elif isinstance(bound, Const):
            if not var_prec.is_float:
                self.formats[node.name] = self.node_formats[bound_path]
        elif not var_prec.is_float:
            self.formats[node.name] = self.node_formats[(*bound_path, "store")]
        self.env[node.name] = (err, var_prec)
        return self.visit(node.body, path + (1,))

    def operation(self, node: Expr, path: Path, t: NodeTyping) -> AffineForm:
        rng = self.ranges[path]
        kids = node.children
        errs = [self.visit(k, path + (i,)) for i, k in enumerate(kids)]
        ranges = [self.ranges[path + (i,)] for i in range(len(kids))]
        pi = t.op
        fixed = not pi.is_float
        in_fmts = [self._operand_format(k, path + (i,)) for i, k in enumerate(kids)] if fixed else []

        exact_from = None
        if isinstance(node, Neg):
            prop = -errs[0]
            exact_from = in_fmts[0].fractional_bits if fixed else None
        elif isinstance(node, (Add, Sub)):
            prop = errs[0] + errs[1] if isinstance(node, Add) else errs[0] - errs[1]
            if fixed:
                exact_from = max(fm.fractional_bits for fm in in_fmts)
        elif isinstance(node, Mul):
            prop = self._mul_error(ranges[0], errs[0], ranges[1], errs[1])
            if fixed:
                exact_from = in_fmts[0].fractional_bits + in_fmts[1].fractional_bits
        elif isinstance(node, Div):
            prop = self._div_error(ranges[0], errs[0], ranges[1], errs[1])
        elif isinstance(node, Sqrt):
            if fixed:
                raise AnalysisError("square root is not supported in fixed-point arithmetic")
            prop = self._sqrt_error(ranges[0], errs[0])
        else:
            raise TypeError(f"unknown operation {node!r}")

        if isinstance(node, Neg) and not fixed:
            # negation is exact in floating point
            check_special(rng + prop.to_interval(), pi)
            err = prop
        else:
            rnd, fmt = self._rounding(rng, prop, pi, exact_from)
            if fmt is not None:
                self.node_formats[path] = fmt
            err = prop.add_noise(rnd)

        if t.result is not pi:
            # assignment into a lower-precision variable
            exact = self.node_formats[path].fractional_bits if fixed else None
            rnd, fmt = self._rounding(rng, err, t.result, exact)
            if fmt is not None:
                self.node_formats[(*path, "store")] = fmt
            err = err.add_noise(rnd)
        elif fixed:
            self.node_formats[(*path, "store")] = self.node_formats[path]
        return err

    def _operand_format(self, node: Expr, path: Path) -> FixedFormat:
        if isinstance(node, Var):
            return self.formats[node.name]
        if isinstance(node, Const):
            return self.node_formats[path]
        return self.node_formats[(*path, "store")]

    @staticmethod
    def _mul_error(rx, ex, ry, ey) -> AffineForm:
        # x~*y~ - x*y = x*ey + y*ex + ex*ey
        return AffineForm.from_interval(rx) * ey + AffineForm.from_interval(ry) * ex + ex * ey

    @staticmethod
    def _div_error(rx, ex, ry, ey) -> AffineForm:
        finite_y = ry + ey.to_interval()
        if finite_y.lo <= 0 <= finite_y.hi:
            raise DivisionByZeroRange(f"denominator range {finite_y!r} may be zero")
        inv = ry.inverse()
        a, b = ry.min_abs(), ry.max_abs()
        r = ey.to_interval().max_abs()
        # 1/y~ - 1/y = ey * k with k = -1/(y*y~) in [-1/(a(a-r)), -1/(b(b+r))]
        k_lo, k_hi = -1 / (a * (a - r)), -1 / (b * (b + r))
        inv_err = ey.scale((k_lo + k_hi) / 2).add_noise((k_hi - k_lo) / 2 * r)
        return AffineForm.from_interval(rx) * inv_err + AffineForm.from_interval(inv) * ex + ex * inv_err

    @staticmethod
    def _sqrt_error(rx, ex) -> AffineForm:
        r = ex.to_interval().max_abs()
        if rx.lo - r < 0:
            raise NegativeSqrtRange(f"finite-precision argument {rx.widen(r)!r} of sqrt may be negative")
        if rx.lo == 0 and r > 0:
            raise AnalysisError("unbounded error propagation through sqrt at zero")
        if r == 0:
            return AffineForm.constant(ZERO)
        # sqrt(x + e) - sqrt(x) = e * k, k = 1/(sqrt(x+e) + sqrt(x))
        k_hi = 1 / (sqrt_enclosure(rx.lo - r)[0] + sqrt_enclosure(rx.lo)[0])
        k_lo = 1 / (sqrt_enclosure(rx.hi + r)[1] + sqrt_enclosure(rx.hi)[1])
        return ex.scale((k_lo + k_hi) / 2).add_noise((k_hi - k_lo) / 2 * r)


def roundoff_error(f: FunctionSpec, ranges: Optional[RangeMap], config: ConfigLike) -> ErrorBound:
    """Sound upper bound on ``max |f(x) - f~(x~)|`` over the input box under ``config``."""
    if ranges is None:
        ranges = compute_ranges(f)
    return _ErrorAnalysis(f, ranges, config).run()


def check_bound(f: FunctionSpec, config: ConfigLike, ranges: Optional[RangeMap] = None,
                diagnostics: Optional[list] = None) -> bool:
    """True iff the bound under ``config`` is within ``f.target_error``."""
    try:
        bound = roundoff_error(f, ranges, config).value
    except AnalysisError as exc:
        logger.debug("check_bound(%s): %s", f.name, exc)
        if diagnostics is not None:
            diagnostics.append(str(exc))
        return False
    if f.target_error is None:
        return True
    return bound <= f.target_error
