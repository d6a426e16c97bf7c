"""Exact rational interval and affine arithmetic, plus finite-precision formats.

Everything here is computed with ``gmpy2.mpq`` so that range and error
computations never commit roundoff themselves.  Square roots are the one
irrational operation; they are enclosed by dyadic rationals obtained from an
integer square root.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import gmpy2
from gmpy2 import mpq

from .errors import DivisionByZeroRange, NegativeSqrtRange

Rational = type(mpq(0))

ZERO = mpq(0)
ONE = mpq(1)

#: relative width of square-root enclosures
SQRT_TOLERANCE_BITS = 120


def rational(value) -> Rational:
    """Convert ints, decimal strings, Fractions and mpq values exactly."""
    if isinstance(value, Rational):
        return value
    if isinstance(value, (int, Fraction)):
        return mpq(value)
    if isinstance(value, str):
        return mpq(Fraction(value.strip()))
    if isinstance(value, float):
        # floats are dyadic, so this is exact
        return mpq(Fraction(value))
    return mpq(value)


def floor_log2(q: Rational) -> int:
    """Largest e with 2**e <= q, for q > 0."""
    n, d = int(q.numerator), int(q.denominator)
    e = n.bit_length() - d.bit_length()
    if e >= 0:
        if n < d << e:
            e -= 1
    elif n << -e < d:
        e -= 1
    return e


def pow2(e: int) -> Rational:
    return mpq(1 << e) if e >= 0 else mpq(1, 1 << -e)


def sqrt_enclosure(q: Rational, bits: int = SQRT_TOLERANCE_BITS) -> tuple[Rational, Rational]:
    """Dyadic rationals ``lo <= sqrt(q) <= hi`` with ``hi - lo <= 2**-bits * max(1, sqrt(q))``."""
    if q < 0:
        raise NegativeSqrtRange(f"sqrt of negative value {q}")
    if q == 0:
        return ZERO, ZERO
    n, d = int(q.numerator), int(q.denominator)
    # scale so that the integer root carries enough significant bits
    m = max(0, bits + 2 - (n.bit_length() - d.bit_length()) // 2)
    scaled_num = n << (2 * m)
    root = gmpy2.isqrt(scaled_num // d)
    lo = mpq(int(root), 1 << m)
    if root * root * d == scaled_num:
        return lo, lo
    return lo, mpq(int(root) + 1, 1 << m)


class Precision(enum.Enum):
    """Finite-precision formats; floats and fixed-point form separate ladders."""

    FLOAT32 = ("f32", True, 32, 24, -126, 127)
    FLOAT64 = ("f64", True, 64, 53, -1022, 1023)
    FLOAT128 = ("f128", True, 128, 113, -16382, 16383)
    FIXED16 = ("fixed16", False, 16, None, None, None)
    FIXED32 = ("fixed32", False, 32, None, None, None)

    def __init__(self, short, is_float, bits, significand, emin, emax):
        self.short = short
        self.is_float = is_float
        self.bits = bits
        self.significand = significand
        self.emin = emin
        self.emax = emax

    @property
    def ladder(self) -> str:
        return "float" if self.is_float else "fixed"

    @property
    def rank(self) -> int:
        return self.bits

    @property
    def machine_epsilon(self) -> Rational:
        if not self.is_float:
            raise ValueError(f"{self.short} has no machine epsilon")
        return pow2(-self.significand)

    @property
    def min_normal(self) -> Rational:
        if not self.is_float:
            raise ValueError(f"{self.short} has no minimum normal")
        return pow2(self.emin)

    @property
    def max_finite(self) -> Rational:
        if not self.is_float:
            raise ValueError(f"{self.short} has no maximum finite value")
        return (2 - pow2(1 - self.significand)) * pow2(self.emax)

    def _check_comparable(self, other):
        if not isinstance(other, Precision):
            return NotImplemented
        if self.is_float != other.is_float:
            raise TypeError(f"cannot compare {self.short} with {other.short}: different ladders")
        return None

    def __lt__(self, other):
        if self._check_comparable(other) is NotImplemented:
            return NotImplemented
        return self.bits < other.bits

    def __le__(self, other):
        if self._check_comparable(other) is NotImplemented:
            return NotImplemented
        return self.bits <= other.bits

    def __gt__(self, other):
        if self._check_comparable(other) is NotImplemented:
            return NotImplemented
        return self.bits > other.bits

    def __ge__(self, other):
        if self._check_comparable(other) is NotImplemented:
            return NotImplemented
        return self.bits >= other.bits

    @classmethod
    def parse(cls, name: str) -> "Precision":
        aliases = {
            "float": cls.FLOAT32, "single": cls.FLOAT32,
            "double": cls.FLOAT64, "quad": cls.FLOAT128,
        }
        key = name.strip().lower()
        for p in cls:
            if p.short == key or p.name.lower() == key:
                return p
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown precision {name!r}")


FLOAT_LADDER = (Precision.FLOAT32, Precision.FLOAT64, Precision.FLOAT128)
FIXED_LADDER = (Precision.FIXED16, Precision.FIXED32)


@dataclass(frozen=True)
class Interval:
    lo: Rational
    hi: Rational

    def __post_init__(self):
        object.__setattr__(self, "lo", rational(self.lo))
        object.__setattr__(self, "hi", rational(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, value) -> "Interval":
        v = rational(value)
        return cls(v, v)

    def __repr__(self):
        return f"[{self.lo}, {self.hi}]"

    def __contains__(self, value) -> bool:
        return self.lo <= value <= self.hi

    @property
    def mid(self) -> Rational:
        return (self.lo + self.hi) / 2

    @property
    def radius(self) -> Rational:
        return (self.hi - self.lo) / 2

    @property
    def width(self) -> Rational:
        return self.hi - self.lo

    def max_abs(self) -> Rational:
        return max(abs(self.lo), abs(self.hi))

    def min_abs(self) -> Rational:
        if self.lo <= 0 <= self.hi:
            return ZERO
        return min(abs(self.lo), abs(self.hi))

    def subset_of(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def union(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def widen(self, amount) -> "Interval":
        """Minkowski sum with ``[-amount, amount]``."""
        return Interval(self.lo - amount, self.hi + amount)

    def __add__(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval(min(products), max(products))

    __rmul__ = __mul__

    def inverse(self) -> "Interval":
        if self.lo <= 0 <= self.hi:
            raise DivisionByZeroRange(f"division by range {self!r} containing zero")
        return Interval(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        return self * other.inverse()

    def sqrt(self) -> "Interval":
        if self.lo < 0:
            raise NegativeSqrtRange(f"sqrt of range {self!r} with negative values")
        return Interval(sqrt_enclosure(self.lo)[0], sqrt_enclosure(self.hi)[1])


def interval_op(op: str, a: Interval, b: Optional[Interval] = None) -> Interval:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    if op == "sqrt":
        return a.sqrt()
    raise ValueError(f"unknown operation {op!r}")


def max_abs(i: Interval) -> Rational:
    return i.max_abs()


# Noise symbols only need to be distinct; the counter is never reset.
# next() on itertools.count is atomic under the GIL.
_noise_counter = itertools.count(1)


def fresh_noise_index() -> int:
    return next(_noise_counter)


def _clip(iv: Interval, domain: Optional[Interval]) -> Interval:
    if domain is None:
        return iv
    return Interval(max(iv.lo, domain.lo), min(iv.hi, domain.hi))


class AffineForm:
    """``x0 + sum(c_i * eps_i)`` with every ``eps_i`` ranging over [-1, 1].

    Noise terms are kept as a tuple of ``(index, coefficient)`` pairs sorted by
    index; zero coefficients are dropped.
    """

    __slots__ = ("x0", "noise", "_radius")

    def __init__(self, x0, noise: Iterable[tuple[int, Rational]] = ()):
        self.x0 = rational(x0)
        self.noise = tuple(sorted((i, rational(c)) for i, c in noise if c != 0))
        self._radius = None

    @classmethod
    def _trusted(cls, x0: Rational, noise: tuple) -> "AffineForm":
        # noise must already be sorted, zero-free and made of Rationals
        obj = object.__new__(cls)
        obj.x0 = x0
        obj.noise = noise
        obj._radius = None
        return obj

    @classmethod
    def constant(cls, value) -> "AffineForm":
        return cls._trusted(rational(value), ())

    @classmethod
    def from_interval(cls, interval: Interval) -> "AffineForm":
        return cls(interval.mid, [(fresh_noise_index(), interval.radius)])

    @classmethod
    def from_error(cls, magnitude) -> "AffineForm":
        """A fresh, uncorrelated error term in ``[-magnitude, magnitude]``."""
        return cls(ZERO, [(fresh_noise_index(), rational(magnitude))])

    def __repr__(self):
        terms = " + ".join(f"{c}*e{i}" for i, c in self.noise)
        return f"AffineForm({self.x0}{' + ' + terms if terms else ''})"

    def __eq__(self, other):
        if not isinstance(other, AffineForm):
            return NotImplemented
        return self.x0 == other.x0 and self.noise == other.noise

    def __hash__(self):
        return hash((self.x0, self.noise))

    @property
    def radius(self) -> Rational:
        if self._radius is None:
            r = ZERO
            for _, c in self.noise:
                r += abs(c)
            self._radius = r
        return self._radius

    def to_interval(self) -> Interval:
        r = self.radius
        return Interval(self.x0 - r, self.x0 + r)

    def is_zero(self) -> bool:
        return self.x0 == 0 and not self.noise

    def _combine(self, other: "AffineForm", sign: int) -> "AffineForm":
        a, b = self.noise, other.noise
        if not b:
            return AffineForm._trusted(self.x0 + sign * other.x0, a)
        if not a and sign == 1:
            return AffineForm._trusted(self.x0 + other.x0, b)
        coeffs = dict(a)
        for i, c in b:
            coeffs[i] = coeffs.get(i, ZERO) + sign * c
        noise = tuple(sorted((i, c) for i, c in coeffs.items() if c != 0))
        return AffineForm._trusted(self.x0 + sign * other.x0, noise)

    def __add__(self, other):
        if not isinstance(other, AffineForm):
            return AffineForm._trusted(self.x0 + rational(other), self.noise)
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, AffineForm):
            return AffineForm._trusted(self.x0 - rational(other), self.noise)
        return self._combine(other, -1)

    def __neg__(self):
        return AffineForm._trusted(-self.x0, tuple((i, -c) for i, c in self.noise))

    def scale(self, factor) -> "AffineForm":
        f = rational(factor)
        if f == 0:
            return AffineForm._trusted(ZERO, ())
        return AffineForm._trusted(self.x0 * f, tuple((i, c * f) for i, c in self.noise))

    def add_noise(self, magnitude) -> "AffineForm":
        if magnitude == 0:
            return self
        # fresh indices are larger than every existing one, so order is kept
        return AffineForm._trusted(self.x0, self.noise + ((fresh_noise_index(), rational(magnitude)),))

    def __mul__(self, other):
        if not isinstance(other, AffineForm):
            return self.scale(other)
        coeffs = {i: other.x0 * c for i, c in self.noise}
        for i, c in other.noise:
            coeffs[i] = coeffs.get(i, ZERO) + self.x0 * c
        noise = tuple(sorted((i, c) for i, c in coeffs.items() if c != 0))
        result = AffineForm._trusted(self.x0 * other.x0, noise)
        # nonlinear residual, rad(x) * rad(y)
        return result.add_noise(self.radius * other.radius)

    __rmul__ = __mul__

    def inverse(self, domain: Optional[Interval] = None) -> "AffineForm":
        """Min-range linear approximation of ``1/x``.

        ``domain`` is an independent enclosure of the value; the linearization
        is taken over its intersection with this form's own range.
        """
        iv = _clip(self.to_interval(), domain)
        if iv.lo <= 0 <= iv.hi:
            raise DivisionByZeroRange(f"division by affine range {iv!r} containing zero")
        if iv.hi < 0:
            return -((-self).inverse(None if domain is None else -domain))
        lo, hi = iv.lo, iv.hi
        alpha = -1 / (hi * hi)
        # d(x) = 1/x - alpha*x is decreasing on [lo, hi]
        d_max = 1 / lo - alpha * lo
        d_min = 1 / hi - alpha * hi
        return (self.scale(alpha) + (d_max + d_min) / 2).add_noise((d_max - d_min) / 2)

    def __truediv__(self, other):
        if not isinstance(other, AffineForm):
            other = AffineForm.constant(other)
        return self * other.inverse()

    def sqrt(self, domain: Optional[Interval] = None) -> "AffineForm":
        """Min-range linear approximation of the (concave) square root over ``domain``."""
        iv = _clip(self.to_interval(), domain)
        if iv.lo < 0:
            raise NegativeSqrtRange(f"sqrt of affine range {iv!r} with negative values")
        lo, hi = iv.lo, iv.hi
        if hi == 0:
            return AffineForm.constant(ZERO)
        if lo == hi:
            s_lo, s_hi = sqrt_enclosure(lo)
            return AffineForm((s_lo + s_hi) / 2).add_noise((s_hi - s_lo) / 2)
        sqrt_lo, sqrt_hi = sqrt_enclosure(lo), sqrt_enclosure(hi)
        alpha = 1 / (2 * sqrt_hi[1])
        # d(x) = sqrt(x) - alpha*x is concave with maximum at 1/(4 alpha^2) >= hi
        d_min = min(sqrt_lo[0] - alpha * lo, sqrt_hi[0] - alpha * hi)
        x_star = 1 / (4 * alpha * alpha)
        if lo <= x_star <= hi:
            d_max = 1 / (4 * alpha)
        else:
            d_max = max(sqrt_lo[1] - alpha * lo, sqrt_hi[1] - alpha * hi)
        return (self.scale(alpha) + (d_max + d_min) / 2).add_noise((d_max - d_min) / 2)


def affine_op(op: str, a: AffineForm, b: Optional[AffineForm] = None) -> AffineForm:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    if op == "sqrt":
        return a.sqrt()
    raise ValueError(f"unknown operation {op!r}")


def to_interval(a: AffineForm) -> Interval:
    return a.to_interval()
