"""Mixed-precision typing rules shared by the analysis, simulator, cost model and code generator.

An operation runs in the highest precision among its operands and the
variable it is assigned to, so ``val z = x + y`` with ``x, y`` single and
``z`` double is ``z = x.toDouble + y.toDouble``.  Operand upcasts are exact;
assigning into a lower-precision variable commits an extra rounding.
Constants that are not bound to a variable adopt the precision of the
operation that consumes them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .expr import Const, Expr, FunctionSpec, Let, Path, Var
from .numerics import Precision

TypeConfig = Mapping[str, Precision]
ConfigLike = Union[Precision, TypeConfig]


@dataclass(frozen=True)
class NodeTyping:
    op: Precision  # precision the node is computed or rounded in
    result: Precision  # precision of the value the node produces


def uniform_config(f: FunctionSpec, precision: Precision) -> dict[str, Precision]:
    return {v: precision for v in f.variables()}


def config_precision(config: ConfigLike, name: str) -> Precision:
    if isinstance(config, Precision):
        return config
    try:
        return config[name]
    except KeyError:
        raise KeyError(f"type configuration has no precision for variable {name!r}") from None


def validate_config(f: FunctionSpec, config: ConfigLike) -> None:
    if isinstance(config, Precision):
        return
    missing = [v for v in f.variables() if v not in config]
    if missing:
        raise ValueError(f"type configuration is missing variables {missing}")
    ladders = {p.ladder for p in config.values()}
    if len(ladders) > 1:
        raise ValueError("type configuration mixes fixed-point and floating-point precisions")


def default_precision(config: ConfigLike) -> Precision:
    if isinstance(config, Precision):
        return config
    return max(config.values(), key=lambda p: p.bits)


def _max(precisions) -> Optional[Precision]:
    ps = [p for p in precisions if p is not None]
    return max(ps, key=lambda p: p.bits) if ps else None


def resolve(expr: Expr, config: ConfigLike) -> dict[Path, NodeTyping]:
    """Assign an operation and result precision to every node of ``expr``."""
    out: dict[Path, NodeTyping] = {}
    default = default_precision(config)

    def visit(node: Expr, path: Path, target: Optional[Precision]) -> Optional[Precision]:
        # returns the node's result precision; None for a free-floating constant
        if isinstance(node, Var):
            p = config_precision(config, node.name)
            out[path] = NodeTyping(p, p)
            return p
        if isinstance(node, Const):
            if target is not None:
                out[path] = NodeTyping(target, target)
            return target
        if isinstance(node, Let):
            p = config_precision(config, node.name)
            bound_path = path + (0,)
            if isinstance(node.bound, (Var, Const)):
                visit(node.bound, bound_path, p if isinstance(node.bound, Const) else None)
            else:
                visit(node.bound, bound_path, p)
            result = visit(node.body, path + (1,), None)
            if result is None:
                result = default
                visit(node.body, path + (1,), default)
            out[path] = NodeTyping(result, result)
            return result
        kids = node.children
        kid_results = [visit(k, path + (i,), None) for i, k in enumerate(kids)]
        op = _max(kid_results + [target]) or default
        for i, (k, r) in enumerate(zip(kids, kid_results)):
            if r is None:
                visit(k, path + (i,), op)
        result = target if target is not None else op
        out[path] = NodeTyping(op, result)
        return result

    if visit(expr, (), None) is None:
        visit(expr, (), default)
    return out
