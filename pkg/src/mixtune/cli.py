"""Command line driver.

    mixtune run rigidBody1.daisy --codegen c --out-dir out/
    mixtune run kernels.daisy --gen-bounds
    mixtune tune-costs --output my_costs.txt

``mixtune FILE ...`` is shorthand for ``mixtune run FILE ...``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from .errors import ParseError
from .expr import format_function
from .numerics import Precision
from .parser import parse_file
from .pipeline import Options, format_report, format_sidecar, gen_bounds, optimize
from .tuner import COST_KINDS, CostTable, benchmark_costs, parse_ladder

logger = logging.getLogger("mixtune")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _ladder(text: str):
    try:
        return parse_ladder(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _precision(text: str) -> Precision:
    try:
        return Precision.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixtune", description="Sound mixed-precision tuning.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize every function of an input file")
    run.add_argument("input", help="input file (.daisy)")
    run.add_argument("--no-rewrite", action="store_true", help="skip accuracy rewriting")
    run.add_argument("--coarse", action="store_true", help="tune only declared variables")
    run.add_argument("--ladder", type=_ladder, default=parse_ladder("f32,f64,f128"),
                     help="ascending precisions, e.g. f32,f64,f128 or fixed16,fixed32")
    run.add_argument("--cost", choices=COST_KINDS + ("auto",), default="auto")
    run.add_argument("--cost-table", help="cost table for the benchmarked cost model")
    run.add_argument("--codegen", choices=("c", "scala", "both"), help="emit tuned source code")
    run.add_argument("--out-dir", help="directory for generated code (default: current directory)")
    run.add_argument("--rewrite-seed", type=_seed, help="seed of the rewriting search")
    run.add_argument("--range-method", choices=("interval", "affine"), default="interval")
    run.add_argument("--gen-bounds", action="store_true",
                     help="print nine benchmark variants per function instead of optimizing")
    run.add_argument("--uniform", type=_precision, help="analyze one uniform precision, no tuning")
    run.add_argument("--report", help="write the text report here; a .kv sidecar is written next to it")
    run.add_argument("--timings", action="store_true", help="include wall times in the reports")

    costs = sub.add_parser("tune-costs", help="benchmark operation costs on this machine")
    costs.add_argument("--output", help="write the table here instead of stdout")
    costs.add_argument("--repeat", type=int, default=7)
    return parser


def _run(args) -> int:
    try:
        functions = parse_file(args.input)
    except ParseError as exc:
        print(f"{args.input}:{exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mixtune: {exc}", file=sys.stderr)
        return 1

    if args.gen_bounds:
        text = "\n".join(format_function(v) for f in functions for v in gen_bounds(f, args.range_method))
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            stem = os.path.splitext(os.path.basename(args.input))[0]
            path = os.path.join(args.out_dir, f"{stem}_bounds.daisy")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            print(path)
        else:
            sys.stdout.write(text)
        return 0

    table = None
    if args.cost_table:
        try:
            table = CostTable.load(args.cost_table)
        except (OSError, ValueError) as exc:
            print(f"mixtune: {exc}", file=sys.stderr)
            return 1
    if args.uniform and args.uniform.ladder != args.ladder[0].ladder:
        args.ladder = parse_ladder("fixed16,fixed32" if not args.uniform.is_float else "f32,f64,f128")
    options = Options(
        rewrite=not args.no_rewrite,
        seed=args.rewrite_seed,
        coarse=args.coarse,
        ladder=args.ladder,
        cost=args.cost,
        cost_table=table,
        range_method=args.range_method,
        uniform=args.uniform,
        codegen=args.codegen,
        out_dir=args.out_dir,
        timings=args.timings,
    )
    results = [optimize(f, options) for f in functions]
    report = format_report(results, options)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report)
        with open(os.path.splitext(args.report)[0] + ".kv", "w", encoding="utf-8") as fh:
            fh.write(format_sidecar(results, options))
    else:
        sys.stdout.write(report)
    for r in results:
        if r.status != "ok":
            print(f"mixtune: {r.name}: {r.message}", file=sys.stderr)
    return max((r.exit_code for r in results), default=0)


def _tune_costs(args) -> int:
    text = benchmark_costs(repeat=args.repeat).format()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] not in ("run", "tune-costs") and not argv[0].startswith("-"):
        argv.insert(0, "run")
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(name)s: %(message)s", stream=sys.stderr
    )
    if args.command == "tune-costs":
        return _tune_costs(args)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
