"""Walk rigidBody1 through every stage of the tuner and print what each one does.

    python demos/rigid_body_walkthrough.py
"""

from mixtune.analysis import compute_ranges, roundoff_error
from mixtune.codegen import emit_float
from mixtune.expr import count_ops, format_expr, format_function
from mixtune.numerics import FLOAT_LADDER
from mixtune.parser import parse
from mixtune.rewriting import genetic_search
from mixtune.simulate import max_sampled_error, sample_inputs
from mixtune.transform import normalize
from mixtune.tuner import delta_debug, op_profile

SOURCE = """
def rigidBody1(x1: Real, x2: Real, x3: Real): Real = {
  require(-15.0 <= x1 && x1 <= 15.0 && -15.0 <= x2 && x2 <= 15.0 && -15.0 <= x3 && x3 <= 15.0)
  -x1*x2 - 2*x2*x3 - x1 - x3
} ensuring(res => res +/- 1.75e-13)
"""

(f,) = parse(SOURCE)
print(f"{f.name}: {count_ops(f.body)} operations over {len(f.params)} inputs")
print("result range:", compute_ranges(f).root)

print("\nuniform bounds of the original expression")
for p in FLOAT_LADDER:
    print(f"  {p.short:5} {float(roundoff_error(f, None, p).value):.4e}")

# step 1: search for an equivalent expression with a smaller double bound
search = genetic_search(f)
print("\nrewritten:", format_expr(search.expr))
print(f"  double bound {float(search.original_fitness):.4e} -> {float(search.fitness):.4e}"
      f"  ({100 * search.improvement:.2f}% smaller)")

# step 2: one variable per operation, so each one can get its own precision
g = normalize(f.with_body(search.expr))
print("\nthree-address form:")
print(format_function(g))

# step 3: cheapest assignment that still meets the target
ranges = compute_ranges(g)
config = delta_debug(g, ranges, FLOAT_LADDER)
bound = roundoff_error(g, ranges, config).value
profile = op_profile(g, config)
print("tuned:", " ".join(f"{v}:{p.short}" for v, p in config.items()))
print(f"  operations per precision (f32, f64, f128): {tuple(profile.get(p, 0) for p in FLOAT_LADDER)}")
print(f"  certified bound {float(bound):.4e} <= target {float(g.target_error):.4e}")

# sanity: a sampled error can never exceed the certified one
points = sample_inputs(g, 20000, seed=0)
print(f"  worst error over {len(points)} samples: {float(max_sampled_error(g, config, points)):.4e}")

print("\n" + emit_float(g, config, "c", bound))
