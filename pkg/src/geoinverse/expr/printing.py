"""Render expressions in the same infix grammar the parser reads."""

from fractions import Fraction

from .core import Add, Fn, Mul, Num, Pow, Sym


def _frac_text(v):
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def _sym_text(s):
    if s.kind == "vel":
        return f"d({s.name})"
    if s.kind == "func":
        return f"{s.name}[{','.join(s.deps)}]"
    return s.name


def _atom(e):
    """Text of ``e`` safe to use as a factor or a power base."""
    if isinstance(e, Num):
        v = e.value
        if v.denominator == 1 and v >= 0:
            return str(v.numerator)
        return f"({_frac_text(v)})"
    if isinstance(e, (Sym, Fn)):
        return to_text(e)
    if isinstance(e, Pow) and e.exp == Fraction(1, 2):
        return to_text(e)
    return f"({to_text(e)})"


def _power_text(base, e):
    if e == 1:
        return _atom(base) if isinstance(base, (Add, Mul)) else _atom(base)
    if e == Fraction(1, 2):
        return f"sqrt({to_text(base)})"
    if e.denominator == 1 and e > 0:
        return f"{_atom(base)}^{e.numerator}"
    return f"{_atom(base)}^({_frac_text(e)})"


def _product_text(coeff, factors):
    numer = []
    denom = []
    for b, e in factors:
        if e < 0:
            denom.append(_power_text(b, -e))
        else:
            numer.append(_power_text(b, e))
    sign = "-" if coeff < 0 else ""
    c = abs(coeff)
    if c.numerator != 1:
        numer.insert(0, str(c.numerator))
    if c.denominator != 1:
        denom.insert(0, str(c.denominator))
    top = "*".join(numer) if numer else "1"
    if not denom:
        return sign + top
    bottom = denom[0] if len(denom) == 1 else "(" + "*".join(denom) + ")"
    return f"{sign}{top}/{bottom}"


def to_text(e):
    if isinstance(e, Num):
        return _frac_text(e.value)
    if isinstance(e, Sym):
        return _sym_text(e)
    if isinstance(e, Fn):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Pow):
        return _product_text(Fraction(1), ((e.base, e.exp),))
    if isinstance(e, Mul):
        return _product_text(e.coeff, e.factors)
    if isinstance(e, Add):
        pieces = []
        for p in e.parts():
            t = to_text(p)
            if not pieces:
                pieces.append(t)
            elif t.startswith("-"):
                pieces.append(" - " + t[1:])
            else:
                pieces.append(" + " + t)
        return "".join(pieces)
    raise TypeError(f"not an expression: {e!r}")
