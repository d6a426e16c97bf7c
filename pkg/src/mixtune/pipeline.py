"""End-to-end optimization of one function: rewrite, normalize, tune, verify, emit."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .analysis import compute_ranges, roundoff_error
from .codegen import emit_fixed, emit_float
from .errors import AnalysisError, MixtuneError, NoValidConfig
from .expr import FunctionSpec, count_ops, format_expr, format_rational
from .numerics import FLOAT_LADDER, Precision, Rational, floor_log2, rational
from .rewriting import INFINITE, SearchParams, default_seed, genetic_search
from .semantics import uniform_config
from .transform import normalize
from .tuner import CostModel, CostTable, DeltaDebugger, cost, op_profile

logger = logging.getLogger(__name__)


class MissingTarget(MixtuneError):
    pass


@dataclass
class Options:
    rewrite: bool = True
    seed: Optional[int] = None
    coarse: bool = False
    ladder: tuple = FLOAT_LADDER
    cost: str = "auto"
    cost_table: Optional[CostTable] = None
    range_method: str = "interval"
    uniform: Optional[Precision] = None
    codegen: Optional[str] = None  # "c", "scala", "both" or None
    out_dir: Optional[str] = None
    timings: bool = False

    def search_params(self) -> SearchParams:
        return SearchParams(seed=default_seed() if self.seed is None else self.seed)


@dataclass
class FunctionResult:
    name: str
    status: str = "ok"  # ok, no-valid-config, analysis-error
    message: str = ""
    target: Optional[Rational] = None
    ops: int = 0
    rewritten: Optional[str] = None
    rewrite_before: Optional[Rational] = None  # uniform-double bounds around rewriting
    rewrite_after: Optional[Rational] = None
    original_bound: Optional[Rational] = None  # original expression, ladder top, uniform
    final_bound: Optional[Rational] = None
    config: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)
    cost_value: object = None
    cost_kind: str = ""
    files: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    function: Optional[FunctionSpec] = None  # the tuned program

    @property
    def final_ops(self) -> int:
        return count_ops(self.function.body) if self.function is not None else 0

    @property
    def exit_code(self) -> int:
        return {"ok": 0, "no-target": 1, "no-valid-config": 2, "analysis-error": 3}[self.status]

    @property
    def improvement(self) -> Optional[float]:
        if self.rewrite_before in (None, 0, INFINITE) or self.rewrite_after in (None, INFINITE):
            return None
        return float(1 - self.rewrite_after / self.rewrite_before)


_SEARCH_CACHE: dict = {}


def _rewrite(f: FunctionSpec, params: SearchParams):
    key = (f.body, tuple(sorted(f.input_ranges.items(), key=lambda kv: kv[0])), params.seed,
           params.population_size, params.generations, params.tournament_size, params.rules)
    if key not in _SEARCH_CACHE:
        _SEARCH_CACHE[key] = genetic_search(f, params)
    return _SEARCH_CACHE[key]


def ladder_name(ladder: Sequence[Precision]) -> str:
    return "-".join(p.short for p in ladder)


def optimize(f: FunctionSpec, options: Optional[Options] = None) -> FunctionResult:
    """Run the whole pipeline on ``f``; failures are reported in the result's status."""
    options = options or Options()
    res = FunctionResult(f.name, target=f.target_error, ops=count_ops(f.body))
    clock = time.perf_counter
    try:
        top = options.uniform or options.ladder[-1]
        res.original_bound = roundoff_error(f, compute_ranges(f, options.range_method), top).value

        start = clock()
        g = f
        if options.rewrite:
            search = _rewrite(f, options.search_params())
            g = f.with_body(search.expr)
            res.rewrite_before, res.rewrite_after = search.original_fitness, search.fitness
            res.rewritten = format_expr(search.expr)
        res.timings["rewrite"] = clock() - start

        start = clock()
        g = normalize(g, options.coarse)
        ranges = compute_ranges(g, options.range_method)
        res.timings["ranges"] = clock() - start

        start = clock()
        if options.uniform is not None:
            config = uniform_config(g, options.uniform)
            model = CostModel("simple")
        else:
            if g.target_error is None:
                raise MissingTarget(f"function {f.name!r} has no ensuring clause; use --uniform or --gen-bounds")
            dd = DeltaDebugger(g, ranges, options.ladder, options.cost, options.cost_table)
            config = dd.run()
            model = dd.passes[-1].model
        res.timings["tuning"] = clock() - start

        # re-verify the final configuration from scratch
        start = clock()
        final = roundoff_error(g, compute_ranges(g, options.range_method), config).value
        if options.uniform is None and final > g.target_error:
            raise AnalysisError(f"{f.name}: re-verification failed, bound {float(final):.6e}")
        res.final_bound = final
        res.config = config
        res.profile = op_profile(g, config)
        res.cost_kind = model.kind
        res.cost_value = cost(g, config, model, ranges)
        res.function = g
        res.timings["verify"] = clock() - start

        if options.codegen:
            start = clock()
            res.files = write_code(g, config, ranges, final, options)
            res.timings["codegen"] = clock() - start
    except AnalysisError as exc:
        res.status, res.message = "analysis-error", str(exc)
    except NoValidConfig as exc:
        res.status, res.message = "no-valid-config", str(exc)
    except MissingTarget as exc:
        res.status, res.message = "no-target", str(exc)
    for phase, seconds in res.timings.items():
        logger.info("%s: %s took %.3fs", f.name, phase, seconds)
    return res


def write_code(g: FunctionSpec, config: dict, ranges, bound: Rational, options: Options) -> list[str]:
    out_dir = options.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    ladder = options.uniform.short if options.uniform else ladder_name(options.ladder)
    stem = os.path.join(out_dir, f"{g.name}_{ladder}_tuned")
    fixed = not next(iter(config.values())).is_float
    targets = ["c", "scala"] if options.codegen == "both" else [options.codegen]
    files = []
    for target in targets:
        if fixed and target != "c":
            logger.warning("%s: fixed-point code is emitted as C only", g.name)
            continue
        text = emit_fixed(g, config, ranges, "c", bound) if fixed else emit_float(g, config, target, bound)
        path = f"{stem}.{target}"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        files.append(path)
    return files


# ---------------------------------------------------------------------------
# benchmark error bounds

def round_up_sig(value: Rational, digits: int = 3) -> Rational:
    """Smallest number with ``digits`` significant decimal digits that is >= ``value``."""
    value = rational(value)
    if value <= 0:
        return value
    e = floor_log2(value) * 3 // 10 - 1  # a lower estimate of floor(log10)
    while rational(10) ** (e + 1) <= value:
        e += 1
    unit = rational(10) ** (e - digits + 1)
    scaled = value / unit
    n = -((-scaled.numerator) // scaled.denominator)
    return n * unit


VARIANT_FACTORS = (("", 1), ("_0_5", rational("0.5")), ("_0_1", rational("0.1")), ("_0_01", rational("0.01")))


def gen_bounds(f: FunctionSpec, range_method: str = "interval") -> list[FunctionSpec]:
    """Nine copies of ``f`` with targets derived from its uniform single/double/quad bounds."""
    ranges = compute_ranges(f, range_method)
    bounds = {p: round_up_sig(roundoff_error(f, ranges, p).value) for p in FLOAT_LADDER}
    out = []
    for letter, p in (("F", Precision.FLOAT32), ("D", Precision.FLOAT64)):
        for suffix, factor in VARIANT_FACTORS:
            out.append(f.with_target(bounds[p] * factor, f"{f.name}_{letter}{suffix}"))
    out.append(f.with_target(bounds[Precision.FLOAT128], f"{f.name}_Q"))
    return out


# ---------------------------------------------------------------------------
# reports

def _num(q) -> str:
    if q is None:
        return "-"
    if q == INFINITE:
        return "inf"
    return f"{float(q):.6e}"


def _triple(res: FunctionResult, ladder: Sequence[Precision]) -> str:
    return "(" + ", ".join(str(res.profile.get(p, 0)) for p in ladder) + ")"


def _config_text(res: FunctionResult) -> str:
    return " ".join(f"{v}:{p.short}" for v, p in res.config.items())


def _cost_text(value) -> str:
    if isinstance(value, tuple):
        return "(" + ", ".join(str(v) for v in value) + ")"
    return format_rational(value)


def format_report(results: Sequence[FunctionResult], options: Options) -> str:
    ladder = (options.uniform,) if options.uniform else options.ladder
    lines = []
    for r in results:
        lines.append(f"== {r.name} ==")
        if r.status != "ok":
            lines.append(f"status: {r.status}: {r.message}")
            lines.append("")
            continue
        lines.append(f"operations: {r.ops}")
        if r.target is not None:
            lines.append(f"target error: {_num(r.target)}")
        lines.append(f"original bound (uniform {ladder[-1].short}): {_num(r.original_bound)}")
        if r.rewritten is not None:
            imp = r.improvement
            lines.append(f"rewritten: {r.rewritten}")
            lines.append(
                f"rewriting (uniform f64): {_num(r.rewrite_before)} -> {_num(r.rewrite_after)}"
                + (f" ({100 * imp:.2f}% improvement)" if imp is not None else "")
            )
        lines.append(f"final bound: {_num(r.final_bound)}")
        lines.append(f"final operations: {r.final_ops}")
        lines.append(f"operations per precision {tuple(p.short for p in ladder)}: {_triple(r, ladder)}")
        lines.append(f"cost ({r.cost_kind}): {_cost_text(r.cost_value)}")
        lines.append(f"configuration: {_config_text(r)}")
        for path in r.files:
            lines.append(f"generated: {path}")
        if options.timings:
            lines.append("wall time: " + ", ".join(f"{k} {v:.3f}s" for k, v in r.timings.items()))
        lines.append("")
    return "\n".join(lines)


def format_sidecar(results: Sequence[FunctionResult], options: Options) -> str:
    """``key=value`` lines, one blank-line separated record per function."""
    ladder = (options.uniform,) if options.uniform else options.ladder
    records = []
    for r in results:
        rec = [("function", r.name), ("status", r.status)]
        if r.status != "ok":
            rec.append(("message", r.message.replace("\n", " ")))
        else:
            rec += [
                ("ops", r.ops),
                ("target", "-" if r.target is None else format_rational(r.target)),
                ("original_bound", _num(r.original_bound)),
                ("original_bound_exact", format_rational(r.original_bound)),
                ("rewritten", r.rewritten or "-"),
                ("rewrite_before", _num(r.rewrite_before)),
                ("rewrite_after", _num(r.rewrite_after)),
                ("improvement", "-" if r.improvement is None else f"{r.improvement:.6f}"),
                ("final_bound", _num(r.final_bound)),
                ("final_ops", r.final_ops),
                ("final_bound_exact", format_rational(r.final_bound)),
                ("ladder", ladder_name(ladder)),
                ("ops_per_precision", ",".join(str(r.profile.get(p, 0)) for p in ladder)),
                ("cost_model", r.cost_kind),
                ("cost", _cost_text(r.cost_value)),
                ("config", ",".join(f"{v}:{p.short}" for v, p in r.config.items())),
                ("files", ",".join(r.files) or "-"),
            ]
            if options.timings:
                rec += [(f"time_{k}", f"{v:.6f}") for k, v in r.timings.items()]
        records.append("\n".join(f"{k}={v}" for k, v in rec))
    return "\n\n".join(records) + "\n"
