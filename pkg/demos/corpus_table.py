"""Tune every benchmark at its generated double-precision targets and print a
table of how many operations end up in each precision.

    python demos/corpus_table.py [--no-rewrite]
"""

import sys
from pathlib import Path

from mixtune.expr import count_ops
from mixtune.numerics import FLOAT_LADDER
from mixtune.parser import parse_file
from mixtune.pipeline import Options, gen_bounds, optimize

BENCHMARKS = Path(__file__).resolve().parents[1] / "benchmarks"
options = Options(rewrite="--no-rewrite" not in sys.argv)
columns = ("D", "D_0_5", "D_0_1", "D_0_01")

print(f"{'benchmark':12} {'ops':>4} {'vars':>4}  " + "  ".join(f"{c:>13}" for c in columns))
for path in sorted(BENCHMARKS.glob("*.daisy")):
    for f in parse_file(str(path)):
        variants = {v.name.rsplit(f.name + "_", 1)[1]: v for v in gen_bounds(f.with_target(None))}
        cells = []
        for column in columns:
            res = optimize(variants[column], options)
            if res.status != "ok":
                cells.append(res.status)
                continue
            cells.append("(" + ",".join(str(res.profile.get(p, 0)) for p in FLOAT_LADDER) + ")")
        print(f"{f.name:12} {count_ops(f.body):>4} {len(f.params):>4}  " + "  ".join(f"{c:>13}" for c in cells))

print("\ncells are (f32, f64, f128) operation counts of the tuned program")
