"""Normalization passes layered on top of constructor canonicalization."""

from fractions import Fraction

from .core import (
    ONE, Add, Fn, Mul, Num, Pow, Sym, add, fn, mul, power,
)

from .rational import rational_normal

EXPAND_LIMIT = 20000
WORK_FACTOR = 5


class ExpansionTooLarge(Exception):
    pass


def _expand(e, trig, memo, limit):
    r = memo.get(e)
    if r is not None:
        return r
    if isinstance(e, (Num, Sym)):
        r = e
    elif isinstance(e, Fn):
        r = fn(e.name, _expand(e.arg, trig, memo, limit))
    elif isinstance(e, Add):
        r = add(Num(e.const), *[mul(c, _expand(t, trig, memo, limit)) for t, c in e.terms])
    elif isinstance(e, Pow):
        r = _expand_power(_expand(e.base, trig, memo, limit), e.exp, trig, memo, limit)
    elif isinstance(e, Mul):
        parts = [_expand_power(_expand(b, trig, memo, limit), x, trig, memo, limit)
                 for b, x in e.factors]
        r = _distribute([Num(e.coeff)] + parts, limit, memo.get(_Budget))
    else:
        raise TypeError(e)
    memo[e] = r
    return r


def _expand_power(b, x, trig, memo, limit):
    if x.denominator != 1 or x < 2:
        return power(b, x)
    k = int(x)
    if trig and isinstance(b, Fn) and b.name in ("cos", "cosh"):
        u = b.arg
        if b.name == "cos":
            sq = add(1, mul(-1, power(fn("sin", u), 2)))
        else:
            sq = add(1, power(fn("sinh", u), 2))
        pieces = [power(b, k % 2)] + [sq] * (k // 2)
        return _distribute(pieces, limit, memo.get(_Budget))
    if isinstance(b, Add):
        return _distribute([b] * k, limit, memo.get(_Budget))
    return power(b, x)


class _Budget:
    """Total number of term products one expansion may build."""

    def __init__(self, work):
        self.left = work

    def spend(self, k):
        self.left -= k
        if self.left < 0:
            raise ExpansionTooLarge()


def _distribute(pieces, limit, budget=None):
    acc = [ONE]
    for p in pieces:
        if isinstance(p, Add):
            terms = p.parts()
            if len(acc) * len(terms) > limit:
                raise ExpansionTooLarge()
            if budget is not None:
                budget.spend(len(acc) * len(terms))
            acc = [mul(a, t) for a in acc for t in terms]
        else:
            acc = [mul(a, p) for a in acc]
    return add(*acc)


def expand(e, trig=False, limit=EXPAND_LIMIT, work=None):
    """Distribute products over sums everywhere (including inside bases).

    With ``trig=True`` positive powers ``cos(u)^k`` (k >= 2) are rewritten via
    ``cos^2 = 1 - sin^2`` (likewise ``cosh^2 = 1 + sinh^2``), which makes the
    Pythagorean identity collapse during term collection.

    Raises :class:`ExpansionTooLarge` when an intermediate sum would exceed
    ``limit`` terms, or when more than ``work`` term products (default
    ``5 * limit``) would be built in total.
    """
    budget = _Budget(WORK_FACTOR * limit if work is None else work)
    return _expand(e, trig, {_Budget: budget}, limit)


def simplify(e, limit=EXPAND_LIMIT):
    """Expanded, Pythagorean-normalized form; best effort, idempotent.

    Falls back to the input when expansion would exceed ``limit`` terms.
    """
    try:
        prev = e
        for _ in range(6):
            cur = expand(prev, trig=True, limit=limit)
            if cur == prev:
                return cur
            prev = cur
        return prev
    except ExpansionTooLarge:
        return e


def _monomial(p):
    """``(coeff, {base: exp})`` for a term of an expanded sum."""
    if isinstance(p, Num):
        return p.value, {}
    if isinstance(p, Mul):
        return p.coeff, dict(p.factors)
    if isinstance(p, Pow):
        return Fraction(1), {p.base: p.exp}
    return Fraction(1), {p: Fraction(1)}


def factor_terms(e):
    """Pull the common monomial factor out of a sum.

    Bases absent from a term count with exponent 0, so negative powers common
    to every term (shared denominators) are extracted as well.
    """
    if not isinstance(e, Add):
        return e
    monos = [_monomial(p)[1] for p in e.parts()]
    bases = set()
    for m in monos:
        bases.update(m)
    common = {}
    for b in bases:
        lo = min(m.get(b, Fraction(0)) for m in monos)
        if lo != 0:
            common[b] = lo
    if not common:
        return e
    c = mul(*[power(b, x) for b, x in common.items()])
    inv = mul(*[power(b, -x) for b, x in common.items()])
    inner = add(*[mul(p, inv) for p in e.parts()])
    return mul(c, inner)


def cancel(numer, denom, limit=EXPAND_LIMIT):
    """``numer/denom`` with shared monomial content and equal sum factors cancelled."""
    try:
        n = expand(numer, trig=True, limit=limit)
        d = expand(denom, trig=True, limit=limit)
    except ExpansionTooLarge:
        return mul(numer, power(denom, -1))
    return mul(factor_terms(n), power(factor_terms(d), -1))


def node_count(e):
    """Number of distinct nodes in the expression DAG."""
    seen = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        stack.extend(x.children())
    return len(seen)


def quotient(numer, denom, limit=2000):
    """Smallest of several equivalent forms of ``numer/denom``.

    Candidates: factored form (top-level common factors pulled out, so equal
    sum factors cancel by construction), its simplification, the fully
    expanded :func:`cancel`, and for functions of one symbol the reduced
    rational normal form.
    """
    structural = mul(factor_terms(numer), power(factor_terms(denom), -1))
    forms = [structural, simplify(structural, limit=limit), cancel(numer, denom, limit=limit)]
    rn = rational_normal(structural)
    if rn is not None:
        forms.append(rn)
    return min(forms, key=lambda f: (node_count(f), f._key))


def tidy(e, limit=2000):
    """Smallest of ``e``, its simplification and its rational normal form."""
    forms = [e, simplify(e, limit=limit)]
    rn = rational_normal(forms[1])
    if rn is not None:
        forms.append(rn)
    for f in forms[:2]:
        grouped = _normalize_groups(f)
        if grouped is not None:
            forms.append(grouped)
    return min(forms, key=lambda f: (node_count(f), f._key))


def _normalize_groups(e):
    """Rational normal form applied to each single-symbol group of a product."""
    if not isinstance(e, Mul):
        return None
    groups, rest = {}, [Num(e.coeff)]
    for b, k in e.factors:
        f = power(b, k)
        syms = f.symbols
        if len(syms) == 1:
            groups.setdefault(next(iter(syms)), []).append(f)
        else:
            rest.append(f)
    if not groups:
        return None
    parts = []
    for fs in groups.values():
        rn = rational_normal(mul(*fs))
        parts.append(rn if rn is not None else mul(*fs))
    return mul(*rest, *parts)
