"""Minimal computer-algebra kernel used throughout the package."""

from .calculus import depends_on, diff, integrate
from .core import (
    ONE, PI, ZERO, Add, Expr, Fn, Mul, Num, Pow, Sym,
    add, as_expr, const, coord, div, fn, free_function, mul, neg, num, power, sub, velocity,
)
from .numeric import (
    Chart, CompiledExprs, PointEvaluator, constant_values, eval_numeric, is_zero,
    sample_points, zero_mask,
)
from .printing import to_text
from .simplify import cancel, expand, factor_terms, node_count, quotient, simplify, tidy


size = node_count


def subs(e, mapping):
    """Replace symbols by expressions and re-canonicalize."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo = {}

    def go(x):
        if not (mapping.keys() & x.symbols):
            return x
        hit = memo.get(x)
        if hit is not None:
            return hit
        if isinstance(x, Sym):
            r = mapping[x]
        elif isinstance(x, Fn):
            r = fn(x.name, go(x.arg))
        elif isinstance(x, Pow):
            r = power(go(x.base), x.exp)
        elif isinstance(x, Mul):
            r = mul(x.coeff, *[power(go(b), k) for b, k in x.factors])
        elif isinstance(x, Add):
            r = add(x.const, *[mul(c, go(t)) for t, c in x.terms])
        else:
            r = x
        memo[x] = r
        return r

    return go(e)


__all__ = [
    "Expr", "Num", "Sym", "Fn", "Pow", "Mul", "Add", "ONE", "ZERO", "PI",
    "add", "mul", "power", "fn", "neg", "sub", "div", "num", "as_expr",
    "coord", "const", "velocity", "free_function",
    "diff", "integrate", "depends_on",
    "Chart", "CompiledExprs", "PointEvaluator", "constant_values", "eval_numeric", "is_zero", "zero_mask", "sample_points",
    "to_text", "simplify", "expand", "factor_terms", "cancel", "quotient", "tidy", "size", "subs",
]
