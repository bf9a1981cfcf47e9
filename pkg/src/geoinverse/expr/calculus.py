"""Differentiation and a small rule-table integrator."""

from fractions import Fraction

from ..errors import DomainError, IndeterminateError
from .core import (
    ONE, ZERO, Add, Fn, Mul, Pow, Sym, add, fn, free_function, mul, neg, power,
)
from .numeric import CompiledExprs, is_zero
from .rational import integrate_rational
from .simplify import ExpansionTooLarge, cancel, expand, factor_terms, simplify


def depends_on(e, v):
    """Whether ``e`` may vary with coordinate ``v`` (free functions included)."""
    for s in e.symbols:
        if s == v or (s.kind == "func" and v.name in s.deps):
            return True
    return False


def _fn_derivative(name, u):
    if name == "sin":
        return fn("cos", u)
    if name == "cos":
        return neg(fn("sin", u))
    if name == "exp":
        return fn("exp", u)
    if name == "log":
        return power(u, -1)
    if name == "sinh":
        return fn("cosh", u)
    if name == "cosh":
        return fn("sinh", u)
    raise ValueError(name)


def diff(e, v):
    """Partial derivative of ``e`` with respect to coordinate ``v``."""
    memo = {}

    def d(x):
        if not depends_on(x, v):
            return ZERO
        hit = memo.get(x)
        if hit is not None:
            return hit
        if isinstance(x, Sym):
            if x == v:
                r = ONE
            else:
                r = free_function(f"{x.name}_{v.name}", x.deps)
        elif isinstance(x, Add):
            r = add(*[mul(c, d(t)) for t, c in x.terms])
        elif isinstance(x, Pow):
            r = mul(x.exp, power(x.base, x.exp - 1), d(x.base))
        elif isinstance(x, Mul):
            pieces = []
            for i, (b, k) in enumerate(x.factors):
                db = d(b)
                if db == ZERO:
                    continue
                others = [power(bb, kk) for j, (bb, kk) in enumerate(x.factors) if j != i]
                pieces.append(mul(x.coeff, k, power(b, k - 1), db, *others))
            r = add(*pieces)
        elif isinstance(x, Fn):
            r = mul(_fn_derivative(x.name, x.arg), d(x.arg))
        else:
            raise TypeError(x)
        memo[x] = r
        return r

    return d(e)


# ------------------------------------------------------------- integration

_ANTIDERIVATIVES = {
    "sin": lambda u: neg(fn("cos", u)),
    "cos": lambda u: fn("sin", u),
    "exp": lambda u: fn("exp", u),
    "sinh": lambda u: fn("cosh", u),
    "cosh": lambda u: fn("sinh", u),
    "log": lambda u: add(mul(u, fn("log", u)), neg(u)),
}


class _Integrator:
    def __init__(self, v, chart, seed):
        self.v = v
        self.chart = chart
        self.seed = seed

    def independent(self, e):
        if not depends_on(e, self.v):
            return True
        try:
            return is_zero(diff(e, self.v), self.chart, seed=self.seed)
        except IndeterminateError:
            return False

    def log_abs(self, u):
        """``log(u)`` or ``log(-u)``, whichever is real on the chart box."""
        if self.chart is None:
            return fn("log", u)
        point = dict(zip(self.chart.coords, self.chart.center()))
        comp = CompiledExprs([u])
        if any(s not in point for s in comp.symbols if s.kind == "coord"):
            return fn("log", u)
        try:
            val = comp({**point, **{s: 1.0 for s in comp.symbols if s not in point}})[0]
        except DomainError:
            return fn("log", u)
        return fn("log", neg(u)) if val < 0 else fn("log", u)

    def rational(self, e):
        r = integrate_rational(e, self.v)
        if r is None:
            return None
        part, logs = r
        return add(part, *[mul(c, self.log_abs(p)) for c, p in logs])

    def run(self, e):
        v = self.v
        if not depends_on(e, v):
            return mul(e, v)
        if isinstance(e, Add):
            out = []
            for p in e.parts():
                r = self.run(p)
                if r is None:
                    return None
                out.append(r)
            return add(*out)
        if isinstance(e, Mul):
            coeff, factors = e.coeff, list(e.factors)
        elif isinstance(e, Pow):
            coeff, factors = Fraction(1), [(e.base, e.exp)]
        else:
            coeff, factors = Fraction(1), [(e, Fraction(1))]
        const = [power(b, k) for b, k in factors if not depends_on(b, v)]
        dep = [(b, k) for b, k in factors if depends_on(b, v)]
        r = self.product(dep)
        if r is None:
            return None
        return mul(coeff, *const, r)

    def product(self, factors):
        v = self.v
        if len(factors) == 1:
            b, k = factors[0]
            if b == v:
                if k == -1:
                    return self.log_abs(v)
                return mul(Fraction(1) / (k + 1), power(v, k + 1))
        # substitution u = base (power pattern) or u = argument (function pattern)
        for i, (b, k) in enumerate(factors):
            rest = mul(*[power(bb, kk) for j, (bb, kk) in enumerate(factors) if j != i])
            if isinstance(b, Fn) and k == 1 and b.name in _ANTIDERIVATIVES:
                u = b.arg
                du = diff(u, v)
                if du != ZERO:
                    ratio = cancel(rest, du)
                    if self.independent(ratio):
                        return mul(ratio, _ANTIDERIVATIVES[b.name](u))
            du = diff(b, v)
            if du == ZERO:
                continue
            others = rest
            ratio = cancel(others, du)
            if not self.independent(ratio):
                continue
            if k == -1:
                return mul(ratio, self.log_abs(b))
            return mul(ratio, Fraction(1) / (k + 1), power(b, k + 1))
        return None


def integrate(e, v, chart=None, seed=42):
    """Antiderivative of ``e`` in ``v`` from the rule table, or ``None``.

    Rules: linearity and constant factoring, powers of ``v`` (``1/v`` gives a
    log), sin/cos/exp/sinh/cosh/log of an argument whose derivative divides
    the cofactor, and the derivative-divides rule ``f'/f -> log f`` together
    with its power form ``f' f^k -> f^(k+1)/(k+1)``. Every candidate is checked
    by differentiating back and zero-testing the difference.
    """
    if e == ZERO:
        return ZERO
    job = _Integrator(v, chart, seed)
    forms = [e]
    s = simplify(e)
    if s != e:
        forms.append(s)
    for f in (e, s):
        t = factor_terms(f)
        if t not in forms:
            forms.append(t)
    try:
        x = expand(e)
        if x not in forms:
            forms.append(x)
    except ExpansionTooLarge:
        pass
    for form in forms:
        F = job.run(form)
        if F is None and form is forms[0]:
            F = job.rational(form)
        if F is None:
            continue
        try:
            if is_zero(add(diff(F, v), neg(e)), chart, seed=seed):
                return F
        except IndeterminateError:
            continue
    return None
