"""Immutable expression trees with canonicalizing constructors.

Every public constructor (``add``, ``mul``, ``power``, ``fn``) returns an
expression in canonical form:

* sums and products are flattened and sorted by a fixed total order;
* like terms and like powers are merged, rational constants folded exactly;
* a sum appearing as an integer power inside a product is made monic (its
  leading coefficient is pulled out into the product's coefficient), so
  ``-(1 - 2/r)`` and ``(-1 + 2/r)`` share a base and cancel structurally;
* ``exp`` factors combine into one, and ``exp(c*log(u))`` becomes ``u^c``;
* tan/cot/sec/csc and their hyperbolic cousins are rewritten in terms of
  sin/cos/sinh/cosh.

Nodes compare and hash by a structural key computed once at construction.
"""

from fractions import Fraction

from ..errors import DomainError

__all__ = [
    "Expr", "Num", "Sym", "Fn", "Pow", "Mul", "Add",
    "as_expr", "num", "coord", "const", "free_function", "velocity", "PI",
    "add", "mul", "power", "fn", "neg", "sub", "div",
    "ZERO", "ONE", "BASIS_FUNCTIONS", "FUNCTION_ALIASES",
]

_F0 = Fraction(0)
_F1 = Fraction(1)

# real: named real numbers such as pi; const: free constants and parameters;
# coord: chart coordinates; vel: d(x) markers in geodesic files;
# func: free functions of a subset of the coordinates.
SYMBOL_KINDS = ("real", "const", "coord", "vel", "func")
_KIND_RANK = {k: i for i, k in enumerate(SYMBOL_KINDS)}

BASIS_FUNCTIONS = ("sin", "cos", "exp", "log", "sinh", "cosh")


class Expr:
    __slots__ = ("_key", "_hash", "_syms")

    def _set_key(self, key, h=None):
        # h combines cached child hashes, so building a node never rehashes its subtree
        self._key = key
        self._hash = hash(key) if h is None else h
        self._syms = None

    def __eq__(self, other):
        if self is other:
            return True
        if isinstance(other, Expr):
            return self._hash == other._hash and self._key == other._key
        if isinstance(other, (int, Fraction)):
            return isinstance(self, Num) and self.value == other
        return NotImplemented

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self._key < other._key

    def __setattr__(self, name, value):
        if name in ("_key", "_hash", "_syms") or not hasattr(self, "_key"):
            object.__setattr__(self, name, value)
        else:
            raise AttributeError("expressions are immutable")

    def __add__(self, other):
        return add(self, as_expr(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, -1))

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        if isinstance(exponent, Num):
            exponent = exponent.value
        return power(self, exponent)

    def __repr__(self):
        from .printing import to_text
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        from .printing import to_text
        return to_text(self)

    @property
    def symbols(self):
        """Frozen set of every :class:`Sym` occurring in the tree."""
        if self._syms is None:
            object.__setattr__(self, "_syms", frozenset(self._collect_syms()))
        return self._syms

    def _collect_syms(self):
        out = set()
        for c in self.children():
            out |= c.symbols
        return out

    def children(self):
        return ()

    def has(self, sym):
        return sym in self.symbols

    @property
    def is_number(self):
        return isinstance(self, Num)


def _qhash(q):
    return hash(q.numerator) if q.denominator == 1 else hash((q.numerator, q.denominator))


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        object.__setattr__(self, "value", Fraction(value))
        self._set_key((0, self.value), hash((0, _qhash(self.value))))


class Sym(Expr):
    __slots__ = ("name", "kind", "deps")

    def __init__(self, name, kind="coord", deps=()):
        if kind not in _KIND_RANK:
            raise ValueError(f"unknown symbol kind {kind!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "deps", tuple(deps))
        key = (1, _KIND_RANK[kind], name)
        if deps:
            key = key + (self.deps,)
        self._set_key(key)

    def _collect_syms(self):
        return {self}


class Fn(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)
        self._set_key((2, name, arg._key), hash((2, name, arg._hash)))

    def children(self):
        return (self.arg,)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base, exp):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exp", exp)
        self._set_key((3, base._key, exp), hash((3, base._hash, _qhash(exp))))

    def children(self):
        return (self.base,)


class Mul(Expr):
    """``coeff * prod(base**exp for base, exp in factors)``."""

    __slots__ = ("coeff", "factors")

    def __init__(self, coeff, factors):
        object.__setattr__(self, "coeff", coeff)
        object.__setattr__(self, "factors", factors)
        self._set_key((4, tuple((b._key, e) for b, e in factors), coeff),
                      hash((4, tuple((b._hash, _qhash(e)) for b, e in factors), _qhash(coeff))))

    def children(self):
        return tuple(b for b, _ in self.factors)

    def rest(self):
        """The product with coefficient 1."""
        return _from_factors(self.factors)


class Add(Expr):
    """``const + sum(coeff * term for term, coeff in terms)``."""

    __slots__ = ("const", "terms")

    def __init__(self, const, terms):
        object.__setattr__(self, "const", const)
        object.__setattr__(self, "terms", terms)
        self._set_key((5, tuple((t._key, c) for t, c in terms), const),
                      hash((5, tuple((t._hash, _qhash(c)) for t, c in terms), _qhash(const))))

    def children(self):
        return tuple(t for t, _ in self.terms)

    @property
    def lead(self):
        return self.const if self.const != 0 else self.terms[0][1]

    def parts(self):
        """Each summand as a standalone expression, constant first."""
        out = [Num(self.const)] if self.const != 0 else []
        out.extend(_scale_term(t, c) for t, c in self.terms)
        return out


ZERO = Num(0)
ONE = Num(1)
PI = Sym("pi", "real")


def as_expr(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(x, (int, Fraction)):
        return num(x)
    if isinstance(x, float):
        return num(Fraction(repr(x)))
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def num(value):
    value = Fraction(value)
    if value == 0:
        return ZERO
    if value == 1:
        return ONE
    return Num(value)


def coord(name):
    return Sym(name, "coord")


def const(name):
    return Sym(name, "const")


def velocity(name):
    return Sym(name, "vel")


def free_function(name, deps):
    """Placeholder for an unknown function of the coordinates named in ``deps``."""
    return Sym(name, "func", tuple(deps))


# ---------------------------------------------------------------- products

def _from_factors(factors):
    if not factors:
        return ONE
    if len(factors) == 1:
        b, e = factors[0]
        return b if e == 1 else Pow(b, e)
    return Mul(_F1, factors)


def _scale_term(t, c):
    """``c * t`` for a canonical term ``t`` (never a Num or an Add)."""
    if c == 1:
        return t
    if isinstance(t, Mul):
        return Mul(c * t.coeff, t.factors)
    if isinstance(t, Pow):
        return Mul(c, ((t.base, t.exp),))
    return Mul(c, ((t, _F1),))


def _scale_add(a, s):
    return Add(a.const * s, tuple((t, c * s) for t, c in a.terms))


def _exact_root(value, q):
    """Exact rational q-th root of ``value`` or ``None``."""
    if value < 0:
        if q % 2 == 0:
            return None
        r = _exact_root(-value, q)
        return None if r is None else -r
    out = []
    for part in (value.numerator, value.denominator):
        r = round(part ** (1.0 / q))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** q == part:
                out.append(cand)
                break
        else:
            return None
    return Fraction(out[0], out[1])


def _num_power(value, e):
    """Exact ``value**e`` when representable, else ``None``."""
    if e.denominator == 1:
        if value == 0 and e < 0:
            raise DomainError("division by zero")
        return value ** int(e)
    root = _exact_root(value, e.denominator)
    if root is None:
        return None
    if root == 0 and e < 0:
        raise DomainError("division by zero")
    return root ** e.numerator


def _composable(inner, outer):
    """Whether ``(b**inner)**outer == b**(inner*outer)`` for real ``b``."""
    if outer.denominator == 1:
        return True
    if inner.denominator % 2 == 0:
        return True
    return inner.numerator % 2 == 1


class _Product:
    """Accumulator behind :func:`mul` and :func:`power`."""

    __slots__ = ("coeff", "powers", "exp_args")

    def __init__(self):
        self.coeff = _F1
        self.powers = {}
        self.exp_args = []

    def put(self, a, e=_F1):
        if isinstance(a, Num):
            if e == 1:
                self.coeff *= a.value
                return
            v = _num_power(a.value, e)
            if v is not None:
                self.coeff *= v
                return
        elif isinstance(a, Mul):
            if e.denominator == 1:
                self.coeff *= a.coeff ** int(e)
                for b, fe in a.factors:
                    self.put(b, fe * e)
                return
        elif isinstance(a, Pow):
            if _composable(a.exp, e):
                self.put(a.base, a.exp * e)
                return
        elif isinstance(a, Fn) and a.name == "exp":
            self.exp_args.append(mul(num(e), a.arg))
            return
        elif isinstance(a, Add) and e.denominator == 1:
            lead = a.lead
            if lead != 1:
                self.coeff *= lead ** int(e)
                a = _scale_add(a, 1 / lead)
        self.powers[a] = self.powers.get(a, _F0) + e

    def _settle(self):
        while True:
            if self.exp_args:
                for b in [b for b in self.powers if isinstance(b, Fn) and b.name == "exp"]:
                    self.exp_args.append(mul(num(self.powers.pop(b)), b.arg))
                arg = add(*self.exp_args)
                self.exp_args = []
                logs, rest = _split_exp_arg(arg)
                for u, c in logs:
                    self.put(u, c)
                if rest != ZERO:
                    raw = Fn("exp", rest)
                    self.powers[raw] = self.powers.get(raw, _F0) + _F1
                continue
            pending = [
                (b, e) for b, e in self.powers.items()
                if e == 0
                or (e.denominator == 1 and isinstance(b, (Mul, Pow, Num)))
                or (isinstance(b, Add) and e.denominator == 1 and b.lead != 1)
                or (e != 1 and isinstance(b, Fn) and b.name == "exp")
            ]
            if not pending:
                return
            for b, e in pending:
                del self.powers[b]
            for b, e in pending:
                if e != 0:
                    self.put(b, e)

    def build(self):
        self._settle()
        if self.coeff == 0:
            return ZERO
        factors = tuple(sorted(((b, e) for b, e in self.powers.items() if e != 0),
                               key=lambda p: p[0]._key))
        if not factors:
            return num(self.coeff)
        if len(factors) == 1:
            b, e = factors[0]
            if self.coeff == 1:
                return b if e == 1 else Pow(b, e)
            if e == 1 and isinstance(b, Add):
                return _scale_add(b, self.coeff)
        return Mul(self.coeff, factors)


def _split_exp_arg(arg):
    """Split ``arg`` into ``c*log(u)`` pieces and the remainder."""
    logs = []
    rest = []
    parts = arg.parts() if isinstance(arg, Add) else [arg]
    for p in parts:
        if isinstance(p, Fn) and p.name == "log":
            logs.append((p.arg, _F1))
        elif (isinstance(p, Mul) and len(p.factors) == 1
              and p.factors[0][1] == 1
              and isinstance(p.factors[0][0], Fn) and p.factors[0][0].name == "log"):
            logs.append((p.factors[0][0].arg, p.coeff))
        else:
            rest.append(p)
    return logs, add(*rest) if rest else ZERO


def mul(*args):
    acc = _Product()
    for a in args:
        a = as_expr(a)
        if isinstance(a, Num) and a.value == 0:
            return ZERO
        acc.put(a)
    return acc.build()


def power(base, exponent):
    base = as_expr(base)
    e = Fraction(exponent)
    if e == 0:
        return ONE
    if e == 1:
        return base
    if isinstance(base, Num):
        v = _num_power(base.value, e)
        if v is not None:
            return num(v)
        if base.value < 0 and e.denominator % 2 == 0:
            raise DomainError(f"even root of negative number {base.value}")
    acc = _Product()
    acc.put(base, e)
    return acc.build()


# -------------------------------------------------------------------- sums

def add(*args):
    const = _F0
    terms = {}
    for a in args:
        a = as_expr(a)
        if isinstance(a, Num):
            const += a.value
        elif isinstance(a, Add):
            const += a.const
            for t, c in a.terms:
                terms[t] = terms.get(t, _F0) + c
        elif isinstance(a, Mul):
            t = a.rest()
            terms[t] = terms.get(t, _F0) + a.coeff
        else:
            terms[a] = terms.get(a, _F0) + _F1
    items = sorted(((t, c) for t, c in terms.items() if c != 0), key=lambda p: p[0]._key)
    if not items:
        return num(const)
    if len(items) == 1 and const == 0:
        t, c = items[0]
        return _scale_term(t, c)
    return Add(const, tuple(items))


def neg(a):
    return mul(-1, a)


def sub(a, b):
    return add(a, neg(as_expr(b)))


def div(a, b):
    return mul(a, power(as_expr(b), -1))


# --------------------------------------------------------------- functions

def _is_negative_form(a):
    if isinstance(a, Num):
        return a.value < 0
    if isinstance(a, Mul):
        return a.coeff < 0
    if isinstance(a, Add):
        return a.lead < 0
    return False


def _sin(u):
    if u == ZERO:
        return ZERO
    if _is_negative_form(u):
        return neg(_sin(neg(u)))
    return Fn("sin", u)


def _cos(u):
    if u == ZERO:
        return ONE
    if _is_negative_form(u):
        return _cos(neg(u))
    return Fn("cos", u)


def _sinh(u):
    if u == ZERO:
        return ZERO
    if _is_negative_form(u):
        return neg(_sinh(neg(u)))
    return Fn("sinh", u)


def _cosh(u):
    if u == ZERO:
        return ONE
    if _is_negative_form(u):
        return _cosh(neg(u))
    return Fn("cosh", u)


def _exp(u):
    if u == ZERO:
        return ONE
    if isinstance(u, Fn) and u.name == "log":
        return u.arg
    acc = _Product()
    acc.exp_args.append(u)
    return acc.build()


def _log(u):
    if u == ONE:
        return ZERO
    if isinstance(u, Num) and u.value <= 0:
        raise DomainError(f"log of nonpositive number {u.value}")
    if isinstance(u, Fn) and u.name == "exp":
        return u.arg
    return Fn("log", u)


_BASIS = {
    "sin": _sin, "cos": _cos, "exp": _exp, "log": _log,
    "sinh": _sinh, "cosh": _cosh,
    "sqrt": lambda u: power(u, Fraction(1, 2)),
}

FUNCTION_ALIASES = {
    "tan": lambda u: div(_sin(u), _cos(u)),
    "cot": lambda u: div(_cos(u), _sin(u)),
    "sec": lambda u: power(_cos(u), -1),
    "csc": lambda u: power(_sin(u), -1),
    "tanh": lambda u: div(_sinh(u), _cosh(u)),
    "coth": lambda u: div(_cosh(u), _sinh(u)),
    "sech": lambda u: power(_cosh(u), -1),
    "csch": lambda u: power(_sinh(u), -1),
}


def fn(name, arg):
    """Apply a named elementary function, rewriting into the kernel basis."""
    arg = as_expr(arg)
    if name in _BASIS:
        return _BASIS[name](arg)
    if name in FUNCTION_ALIASES:
        return FUNCTION_ALIASES[name](arg)
    raise ValueError(f"unsupported function {name!r}")
