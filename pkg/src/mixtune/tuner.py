"""Precision tuning by delta debugging over a precision ladder.

Each pass takes two adjacent precisions (high, low), tries to lower the
variables currently at ``high`` and splits the set in halves whenever the
static error bound is violated.  Among the bound-satisfying assignments the
recursion evaluates, the cheapest under the active cost model wins.
Variables still at ``high`` after a pass are frozen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional, Sequence, Union

from .analysis import RangeMap, compute_ranges, roundoff_error
from .errors import AnalysisError, MissingCostEntry, NoValidConfig
from .expr import Const, Expr, FunctionSpec, Let, Path, Var
from .numerics import FIXED_LADDER, FLOAT_LADDER, Precision, Rational, rational
from .semantics import ConfigLike, config_precision, resolve

logger = logging.getLogger(__name__)

COST_KINDS = ("simple", "benchmarked", "opcount", "error")
SIMPLE_WEIGHTS = {
    Precision.FLOAT32: 1, Precision.FLOAT64: 2, Precision.FLOAT128: 4,
    Precision.FIXED16: 1, Precision.FIXED32: 2,
}


# ---------------------------------------------------------------------------
# cost models

@dataclass(frozen=True)
class CostTable:
    ops: Mapping[tuple[str, Precision], Rational] = field(default_factory=dict)
    casts: Mapping[tuple[Precision, Precision], Rational] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "CostTable":
        ops, casts = {}, {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "cast" and len(parts) == 4:
                    casts[Precision.parse(parts[1]), Precision.parse(parts[2])] = rational(parts[3])
                elif len(parts) == 3:
                    ops[parts[0], Precision.parse(parts[1])] = rational(parts[2])
                else:
                    raise ValueError("expected 'op precision cost' or 'cast from to cost'")
            except (ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"cost table line {lineno}: {exc}") from None
        for key, value in list(ops.items()) + list(casts.items()):
            if value < 0:
                raise ValueError(f"negative cost for {key}")
        return cls(ops, casts)

    @classmethod
    def load(cls, path=None) -> "CostTable":
        if path is None:
            text = resources.files("mixtune").joinpath("data/default_costs.txt").read_text()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        return cls.parse(text)

    def format(self) -> str:
        lines = [f"{op} {p.short} {float(c):.6g}" for (op, p), c in self.ops.items()]
        lines += [f"cast {a.short} {b.short} {float(c):.6g}" for (a, b), c in self.casts.items()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CostModel:
    kind: str
    table: Optional[CostTable] = None

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost model {self.kind!r}")
        if self.kind == "benchmarked" and self.table is None:
            object.__setattr__(self, "table", CostTable.load())


def _events(f: FunctionSpec, config: ConfigLike):
    """Yield ``("op", name, precision)`` and ``("cast", src, dst)`` events."""
    typing = resolve(f.body, config)
    var_prec = {p: config_precision(config, p) for p in f.params}

    def visit(e: Expr, path: Path):
        t = typing[path]
        if isinstance(e, Var):
            return var_prec[e.name]
        if isinstance(e, Const):
            return t.result
        if isinstance(e, Let):
            p = config_precision(config, e.name)
            src = visit(e.bound, path + (0,))
            if src is not p:
                events.append(("cast", src, p))
            var_prec[e.name] = p
            return visit(e.body, path + (1,))
        for i, k in enumerate(e.children):
            src = visit(k, path + (i,))
            if src is not t.op:
                events.append(("cast", src, t.op))
        events.append(("op", e.op, t.op))
        if t.result is not t.op:
            events.append(("cast", t.op, t.result))
        return t.result

    events: list = []
    visit(f.body, ())
    return events


def op_profile(f: FunctionSpec, config: ConfigLike) -> dict[Precision, int]:
    """Number of operations executed in each precision."""
    counts: dict[Precision, int] = {}
    for kind, _, p in _events(f, config):
        if kind == "op":
            counts[p] = counts.get(p, 0) + 1
    return counts


def cost(f: FunctionSpec, config: ConfigLike, model: Union[CostModel, str], ranges: Optional[RangeMap] = None):
    """Static cost of ``f`` under ``config``; smaller is cheaper."""
    if isinstance(model, str):
        model = CostModel(model)
    if model.kind == "error":
        return -roundoff_error(f, ranges, config).value
    events = _events(f, config)
    if model.kind == "opcount":
        ladder = FLOAT_LADDER if _ladder_of(config) == "float" else FIXED_LADDER
        counts = {p: 0 for p in ladder}
        for kind, _, p in events:
            if kind == "op":
                counts[p] += 1
        return tuple(counts[p] for p in reversed(ladder))
    total = rational(0)
    for kind, a, b in events:
        if model.kind == "simple":
            total += SIMPLE_WEIGHTS[b] if kind == "op" else SIMPLE_WEIGHTS[a]
            continue
        table = model.table.ops if kind == "op" else model.table.casts
        try:
            total += table[a, b]
        except KeyError:
            what = f"operation {a} in {b.short}" if kind == "op" else f"cast {a.short} -> {b.short}"
            raise MissingCostEntry(f"cost table has no entry for {what}") from None
    return total


def _ladder_of(config: ConfigLike) -> str:
    if isinstance(config, Precision):
        return config.ladder
    return next(iter(config.values())).ladder


def select_cost_model(ladder: Sequence[Precision], phase: tuple[Precision, Precision],
                      frozen: Sequence[Precision] = (), table: Optional[CostTable] = None) -> CostModel:
    """Simple costs while quad may still appear or for fixed point, benchmarked costs otherwise."""
    if not ladder[0].is_float:
        return CostModel("simple")
    if Precision.FLOAT128 in phase or Precision.FLOAT128 in frozen:
        return CostModel("simple")
    return CostModel("benchmarked", table)


# ---------------------------------------------------------------------------
# delta debugging

def parse_ladder(text: str) -> tuple[Precision, ...]:
    ladder = tuple(Precision.parse(t) for t in text.split(",") if t.strip())
    if len(ladder) < 2:
        raise ValueError("a ladder needs at least two precisions")
    if len({p.ladder for p in ladder}) > 1:
        raise ValueError("a ladder cannot mix fixed-point and floating-point precisions")
    if any(a >= b for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder precisions must be strictly ascending")
    return ladder


@dataclass
class PassRecord:
    high: Precision
    low: Precision
    model: CostModel
    tunable: list[str]
    visited: list[dict]  # bound-satisfying configurations, in evaluation order
    chosen: dict
    evaluations: int


class DeltaDebugger:
    """Delta-debugging search; ``passes`` keeps the per-pass visited sets."""

    def __init__(self, f: FunctionSpec, ranges: Optional[RangeMap], ladder: Sequence[Precision],
                 cost_model: Union[str, CostModel] = "auto", table: Optional[CostTable] = None):
        if f.target_error is None:
            raise ValueError(f"function {f.name!r} has no target error")
        self.f = f
        self.ranges = ranges if ranges is not None else compute_ranges(f)
        self.ladder = tuple(ladder)
        self.cost_model = cost_model
        self.table = table
        self.variables = f.variables()
        self.passes: list[PassRecord] = []
        self._bounds: dict[tuple, Optional[Rational]] = {}

    def _key(self, config: Mapping[str, Precision]) -> tuple:
        return tuple(config[v] for v in self.variables)

    def bound(self, config: Mapping[str, Precision]) -> Optional[Rational]:
        key = self._key(config)
        if key not in self._bounds:
            try:
                self._bounds[key] = roundoff_error(self.f, self.ranges, config).value
            except AnalysisError as exc:
                logger.debug("%s: %s", self.f.name, exc)
                self._bounds[key] = None
        return self._bounds[key]

    def valid(self, config) -> bool:
        b = self.bound(config)
        return b is not None and b <= self.f.target_error

    def model_for(self, high: Precision, low: Precision, config) -> CostModel:
        if isinstance(self.cost_model, CostModel):
            return self.cost_model
        if self.cost_model != "auto":
            return CostModel(self.cost_model, self.table if self.cost_model == "benchmarked" else None)
        frozen = [p for p in config.values() if p > high]
        return select_cost_model(self.ladder, (high, low), frozen, self.table)

    def run(self) -> dict[str, Precision]:
        top = self.ladder[-1]
        config = {v: top for v in self.variables}
        if not self.valid(config):
            b = self.bound(config)
            detail = "analysis failed" if b is None else f"bound {float(b):.3e}"
            raise NoValidConfig(
                f"{self.f.name}: even uniform {top.short} misses the target "
                f"{float(self.f.target_error):.3e} ({detail})"
            )
        for high, low in zip(reversed(self.ladder), reversed(self.ladder[:-1])):
            config = self._pass(config, high, low)
        return config

    def _pass(self, config: dict, high: Precision, low: Precision) -> dict:
        tunable = [v for v in self.variables if config[v] is high]
        model = self.model_for(high, low, config)
        visited = [dict(config)]
        counter = [0]

        def lower(tau: list[str], base: dict) -> dict:
            candidate = dict(base)
            for v in tau:
                candidate[v] = low
            counter[0] += 1
            if self.valid(candidate):
                visited.append(candidate)
                return candidate
            if len(tau) <= 1:
                return base
            half = (len(tau) + 1) // 2
            after_first = lower(tau[:half], base)
            return lower(tau[half:], after_first)

        if tunable:
            lower(tunable, config)
        assert counter[0] <= 4 * len(tunable)

        def rank(c):
            return (
                cost(self.f, c, model, self.ranges),
                -sum(1 for v in tunable if c[v] is low),
                tuple(c[v].bits for v in self.variables),
            )

        chosen = min(visited, key=rank)
        self.passes.append(PassRecord(high, low, model, tunable, visited, chosen, counter[0]))
        logger.debug("%s: pass %s->%s, %d evaluations, %d valid", self.f.name, high.short,
                     low.short, counter[0], len(visited))
        return chosen


def delta_debug(f: FunctionSpec, ranges: Optional[RangeMap], ladder: Sequence[Precision],
                cost_model: Union[str, CostModel] = "auto", table: Optional[CostTable] = None) -> dict:
    """Tuned type configuration of ``f``; raises NoValidConfig if the ladder top misses the target."""
    return DeltaDebugger(f, ranges, ladder, cost_model, table).run()


# ---------------------------------------------------------------------------
# cost table micro-benchmark

def benchmark_costs(repeat: int = 7, size: int = 1 << 16) -> CostTable:
    """Measure per-element times of numpy kernels; normalized so single add costs 1.

    ``longdouble`` stands in for quad precision, which numpy lacks.
    """
    import timeit

    import numpy as np

    dtypes = {Precision.FLOAT32: np.float32, Precision.FLOAT64: np.float64, Precision.FLOAT128: np.longdouble}
    rng = np.random.default_rng(0)
    kernels = {
        "add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide,
        "neg": np.negative, "sqrt": np.sqrt,
    }
    times = {}
    for p, dt in dtypes.items():
        a = (rng.random(size) + 0.5).astype(dt)
        b = (rng.random(size) + 0.5).astype(dt)
        out = np.empty(size, dtype=dt)
        for op, kernel in kernels.items():
            args = (a,) if op in ("neg", "sqrt") else (a, b)
            times[op, p] = min(timeit.repeat(lambda: kernel(*args, out=out), number=20, repeat=repeat))
    casts = {}
    for src, sdt in dtypes.items():
        for dst, ddt in dtypes.items():
            if src is dst:
                continue
            a = (rng.random(size) + 0.5).astype(sdt)
            out = np.empty(size, dtype=ddt)
            casts[src, dst] = min(timeit.repeat(lambda: out.__setitem__(slice(None), a), number=20, repeat=repeat))
    unit = times["add", Precision.FLOAT32]

    def norm(t):
        return rational(f"{t / unit:.3f}")

    return CostTable({k: norm(v) for k, v in times.items()}, {k: norm(v) for k, v in casts.items()})
