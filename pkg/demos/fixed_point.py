"""Fixed-point code for a small polynomial: inferred formats, shifts, and how
close the generated integer program gets to its certified bound.

    python demos/fixed_point.py
"""

from mixtune.analysis import roundoff_error
from mixtune.codegen import build_fixed_program, emit_fixed, simulate_fixed
from mixtune.errors import FormatOverflow
from mixtune.numerics import FIXED_LADDER
from mixtune.parser import parse
from mixtune.simulate import exact_values, sample_inputs

SOURCE = """
def poly(x: Real, y: Real): Real = {
  require(-1.5 <= x && x <= 1.5 && 0.25 <= y && y <= 3.0)
  0.5 * x * x + x * y - 1.25 * y
}
"""

(f,) = parse(SOURCE)
points = sample_inputs(f, 5000, seed=1)
exact = exact_values(f, points)

for p in FIXED_LADDER:
    program = build_fixed_program(f, p)
    bound = roundoff_error(f, None, p).value
    worst = max(abs(simulate_fixed(program, dict(zip(f.params, pt))) - ex) for pt, ex in zip(points, exact))
    print(f"== {p.short}: bound {float(bound):.3e}, worst sampled {float(worst):.3e}")
    print(emit_fixed(f, p, bound=bound))

# ranges that need more integer bits than the word has are refused up front
(wide,) = parse("def wide(x: Real): Real = { require(0 <= x && x <= 300) x * x }")
try:
    roundoff_error(wide, None, FIXED_LADDER[0])
except FormatOverflow as exc:
    print("fixed16 refused:", exc)
