"""Accuracy-driven rewriting by genetic search over real-valued identities.

Individuals are expressions; a mutation applies one identity at one place.
Fitness is the static roundoff bound under uniform double precision.  The
search never returns an expression with more operations than the original.
"""

from __future__ import annotations

import logging
import os
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .errors import AnalysisError
from .expr import (
    Const, Expr, FunctionSpec, Let, Var, count_ops, replace_at, walk,
)
from .numerics import Interval, Precision, interval_op
from .parser import parse_expr

logger = logging.getLogger(__name__)

DEFAULT_SEED = 4242
SEED_ENV_VAR = "PRECISION_TUNER_SEED"

#: fitness of candidates the analysis rejects
INFINITE = float("inf")


def default_seed() -> int:
    value = os.environ.get(SEED_ENV_VAR)
    return int(value) if value else DEFAULT_SEED


# ---------------------------------------------------------------------------
# rules

RangeOf = Callable[[Expr], Optional[Interval]]


@dataclass(frozen=True)
class RewriteRule:
    """``pattern -> replacement``; identifiers in the templates are metavariables."""

    name: str
    pattern: Expr
    replacement: Expr
    guard: Optional[Callable[[dict, RangeOf], bool]] = field(default=None, compare=False)

    @classmethod
    def of(cls, name: str, pattern: str, replacement: str, guard=None) -> "RewriteRule":
        return cls(name, parse_expr(pattern), parse_expr(replacement), guard)

    def match(self, e: Expr) -> Optional[dict]:
        return match(self.pattern, e, {})

    def apply(self, e: Expr, range_of: Optional[RangeOf] = None) -> Optional[Expr]:
        binding = self.match(e)
        if binding is None:
            return None
        if self.guard is not None and (range_of is None or not self.guard(binding, range_of)):
            return None
        return instantiate(self.replacement, binding)


def match(pattern: Expr, e: Expr, binding: dict) -> Optional[dict]:
    if isinstance(pattern, Var):
        bound = binding.get(pattern.name)
        if bound is None:
            return {**binding, pattern.name: e}
        return binding if bound == e else None
    if isinstance(pattern, Const):
        return binding if e == pattern else None
    if type(pattern) is not type(e):
        return None
    for p, c in zip(pattern.children, e.children):
        binding = match(p, c, binding)
        if binding is None:
            return None
    return binding


def instantiate(template: Expr, binding: dict) -> Expr:
    if isinstance(template, Var):
        return binding[template.name]
    if isinstance(template, Const):
        return template
    return template.with_children([instantiate(c, binding) for c in template.children])


def _nonnegative(*names):
    def guard(binding, range_of):
        for n in names:
            r = range_of(binding[n])
            if r is None or r.lo < 0:
                return False
        return True

    return guard


def _rules(*specs) -> tuple[RewriteRule, ...]:
    return tuple(RewriteRule.of(*s) for s in specs)


DEFAULT_RULES: tuple[RewriteRule, ...] = _rules(
    ("add-commute", "a + b", "b + a"),
    ("mul-commute", "a * b", "b * a"),
    ("add-assoc-left", "a + (b + c)", "(a + b) + c"),
    ("add-assoc-right", "(a + b) + c", "a + (b + c)"),
    ("mul-assoc-left", "a * (b * c)", "(a * b) * c"),
    ("mul-assoc-right", "(a * b) * c", "a * (b * c)"),
    ("distribute-add", "a * (b + c)", "a * b + a * c"),
    ("distribute-sub", "a * (b - c)", "a * b - a * c"),
    ("factor-add", "a * b + a * c", "a * (b + c)"),
    ("factor-sub", "a * b - a * c", "a * (b - c)"),
    ("neg-add-out", "-(a + b)", "-a - b"),
    ("neg-add-in", "-a - b", "-(a + b)"),
    ("neg-mul-in", "-(a * b)", "(-a) * b"),
    ("neg-mul-out", "(-a) * b", "-(a * b)"),
    ("neg-sub-flip", "-(a - b)", "b - a"),
    ("sub-flip-neg", "b - a", "-(a - b)"),
    ("sub-to-add", "a - b", "a + -b"),
    ("add-neg-to-sub", "a + -b", "a - b"),
    ("double-neg", "-(-a)", "a"),
    ("div-mul-combine", "(a / b) * (c / d)", "(a * c) / (b * d)"),
    ("div-mul-split", "(a * c) / (b * d)", "(a / b) * (c / d)"),
    ("mul-recip-to-div", "a * (1 / b)", "a / b"),
    ("diff-squares-expand", "(a - b) * (a + b)", "a * a - b * b"),
    ("diff-squares-factor", "a * a - b * b", "(a - b) * (a + b)"),
    # subtraction reassociation
    ("sub-sub-to-sum", "(a - b) - c", "a - (b + c)"),
    ("sub-sum-to-sub", "a - (b + c)", "(a - b) - c"),
    ("add-sub-assoc", "(a + b) - c", "a + (b - c)"),
    ("add-sub-unassoc", "a + (b - c)", "(a + b) - c"),
    ("sub-add-assoc", "(a - b) + c", "a - (b - c)"),
    ("sub-sub-unassoc", "a - (b - c)", "(a - b) + c"),
    ("sub-add-swap", "(a - b) + c", "(a + c) - b"),
    ("sub-sub-swap", "(a - b) - c", "(a - c) - b"),
) + (
    RewriteRule.of("sqrt-split", "sqrt(a * b)", "sqrt(a) * sqrt(b)", _nonnegative("a", "b")),
    RewriteRule.of("sqrt-join", "sqrt(a) * sqrt(b)", "sqrt(a * b)", _nonnegative("a", "b")),
)


# ---------------------------------------------------------------------------
# ranges of matched subexpressions

def _interval_of(e: Expr, env: Mapping[str, Interval]) -> Interval:
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Const):
        return Interval.point(e.value)
    if isinstance(e, Let):
        return _interval_of(e.body, {**env, e.name: _interval_of(e.bound, env)})
    args = [_interval_of(c, env) for c in e.children]
    return interval_op(e.op, *args)


def _let_ranges(e: Expr, env: dict) -> None:
    """Add the interval of every let-bound name in ``e`` to ``env``."""
    for _, node in walk(e):
        if isinstance(node, Let) and node.name not in env:
            try:
                env[node.name] = _interval_of(node.bound, env)
            except (AnalysisError, KeyError):
                continue


def range_oracle(e: Expr, input_ranges: Mapping[str, Interval]) -> RangeOf:
    env: dict = dict(input_ranges)
    _let_ranges(e, env)

    def range_of(sub: Expr) -> Optional[Interval]:
        try:
            return _interval_of(sub, env)
        except (AnalysisError, KeyError):
            return None

    return range_of


# ---------------------------------------------------------------------------
# mutation and fitness

def _rules_by_type(rules) -> dict:
    index: dict = {}
    for rule in rules:
        index.setdefault(type(rule.pattern), []).append(rule)
    return index


def applicable(e: Expr, rules=DEFAULT_RULES, input_ranges: Optional[Mapping[str, Interval]] = None):
    """All ``(path, rule, binding)`` triples where a rule applies to a node of ``e``."""
    index = _rules_by_type(rules)
    range_of = None
    out = []
    for path, node in walk(e):
        for rule in index.get(type(node), ()):
            binding = rule.match(node)
            if binding is None:
                continue
            if rule.guard is not None:
                if range_of is None:
                    range_of = range_oracle(e, input_ranges or {})
                if not rule.guard(binding, range_of):
                    continue
            out.append((path, rule, binding))
    return out


def rewrites(e: Expr, rules=DEFAULT_RULES, input_ranges: Optional[Mapping[str, Interval]] = None):
    """All single-step rewrites of ``e`` as ``(path, rule, result)`` triples."""
    return [
        (path, rule, replace_at(e, path, instantiate(rule.replacement, binding)))
        for path, rule, binding in applicable(e, rules, input_ranges)
    ]


def mutate(e: Expr, rules=DEFAULT_RULES, rng: Optional[random.Random] = None,
           input_ranges: Optional[Mapping[str, Interval]] = None, cache: Optional[dict] = None) -> Expr:
    """Apply one uniformly chosen applicable (node, rule) pair; ``e`` if none applies."""
    rng = rng or random.Random()
    options = cache.get(e) if cache is not None else None
    if options is None:
        options = applicable(e, rules, input_ranges)
        if cache is not None:
            cache[e] = options
    if not options:
        return e
    path, rule, binding = options[rng.randrange(len(options))]
    return replace_at(e, path, instantiate(rule.replacement, binding))


def fitness(e: Expr, input_ranges: Mapping[str, Interval], precision: Precision = Precision.FLOAT64):
    """Uniform-precision roundoff bound of ``e``; ``INFINITE`` if the analysis fails."""
    from .analysis import compute_ranges, roundoff_error

    f = FunctionSpec("_candidate", tuple(input_ranges), input_ranges, e)
    try:
        return roundoff_error(f, compute_ranges(f), precision).value
    except AnalysisError:
        return INFINITE


# ---------------------------------------------------------------------------
# search

@dataclass
class SearchParams:
    population_size: int = 30
    generations: int = 30
    tournament_size: int = 4
    seed: int = DEFAULT_SEED
    rules: tuple = DEFAULT_RULES

    def __post_init__(self):
        if self.population_size <= 0 or self.generations <= 0 or self.tournament_size <= 0:
            raise ValueError("population size, generations and tournament size must be positive")


@dataclass
class SearchResult:
    expr: Expr
    fitness: object
    original_fitness: object
    evaluations: int

    @property
    def improvement(self) -> float:
        """Relative reduction of the bound, 0.0 when nothing improved."""
        if self.original_fitness in (0, INFINITE) or self.fitness == INFINITE:
            return 0.0
        return float(1 - self.fitness / self.original_fitness)


def genetic_search(f: FunctionSpec, params: Optional[SearchParams] = None) -> SearchResult:
    """Best-ever expression with no more operations than ``f.body``.

    Ties in fitness go to fewer operations, then to the earlier discovery.
    """
    params = params or SearchParams()
    rng = random.Random(params.seed)
    ranges = f.input_ranges
    cache: dict[Expr, object] = {}
    moves: dict[Expr, list] = {}

    def fit(e: Expr):
        value = cache.get(e)
        if value is None:
            value = cache[e] = fitness(e, ranges)
        return value

    original = f.body
    max_ops = count_ops(original)
    original_fit = fit(original)
    best, best_key = original, (original_fit, max_ops)

    population = [original] * params.population_size
    for _ in range(params.generations):
        selected = []
        for _ in range(params.population_size):
            contenders = [population[rng.randrange(len(population))] for _ in range(params.tournament_size)]
            winner = contenders[0]
            for c in contenders[1:]:
                if fit(c) < fit(winner):
                    winner = c
            selected.append(winner)
        population = [mutate(e, params.rules, rng, ranges, moves) for e in selected]
        for e in population:
            ops = count_ops(e)
            if ops > max_ops:
                continue
            key = (fit(e), ops)
            if key < best_key:
                best, best_key = e, key
    logger.debug("rewriting %s: %d distinct candidates", f.name, len(cache))
    return SearchResult(best, best_key[0], original_fit, len(cache))
