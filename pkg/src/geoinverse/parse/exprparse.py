"""Pratt parser for expression text.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"
"""

from fractions import Fraction

from ..errors import DegreeError, DomainError, GeoSyntaxError, UnknownSymbolError
from ..expr import PI, Num, add, as_expr, fn, mul, neg, power
from ..expr.core import BASIS_FUNCTIONS, FUNCTION_ALIASES
from .lexer import tokenize

FUNCTIONS = frozenset(BASIS_FUNCTIONS) | frozenset(FUNCTION_ALIASES) | {"sqrt"}
RESERVED = FUNCTIONS | {"d", "pi"}

_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_PREFIX_BP = 25
MAX_EXPONENT = 1000


class ExprParser:
    """Parse a token stream against a symbol table.

    ``symbols`` maps identifier -> Expr. ``velocities`` maps coordinate name ->
    velocity symbol and enables ``d(name)`` markers; when ``None`` they are
    rejected.
    """

    def __init__(self, tokens, symbols, velocities=None):
        self.tokens = tokens
        self.pos = 0
        self.symbols = symbols
        self.velocities = velocities

    # token helpers
    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def expect(self, text):
        tok = self.next()
        if tok.text != text or tok.kind == "end":
            found = "end of line" if tok.kind == "end" else repr(tok.text)
            raise GeoSyntaxError(f"expected {text!r}, found {found}", tok.line, tok.column)
        return tok

    def at_end(self):
        return self.peek().kind == "end"

    # grammar
    def parse_expr(self, rbp=0):
        tok = self.next()
        left = self.nud(tok)
        while True:
            op = self.peek()
            bp = _INFIX.get(op.text) if op.kind == "op" else None
            if bp is None or bp <= rbp:
                return left
            self.next()
            left = self.led(op, left)

    def nud(self, tok):
        if tok.kind == "num":
            mant, _, exp10 = tok.text.lower().partition("e")
            if exp10 and abs(int(exp10)) > MAX_EXPONENT:
                raise GeoSyntaxError("numeric literal out of range", tok.line, tok.column)
            return Num(Fraction(tok.text))
        if tok.kind == "name":
            return self.name(tok)
        if tok.kind == "op":
            if tok.text == "(":
                e = self.parse_expr()
                self.expect(")")
                return e
            if tok.text == "-":
                return neg(self.parse_expr(_PREFIX_BP))
            if tok.text == "+":
                return self.parse_expr(_PREFIX_BP)
        found = "end of line" if tok.kind == "end" else repr(tok.text)
        raise GeoSyntaxError(f"expected an expression, found {found}", tok.line, tok.column)

    def led(self, op, left):
        if op.text == "^":
            right = self.parse_expr(_INFIX["^"] - 1)
            return self.guard(op, lambda: _raise(left, right))
        right = self.parse_expr(_INFIX[op.text])
        if op.text == "+":
            return add(left, right)
        if op.text == "-":
            return add(left, neg(right))
        if op.text == "*":
            return mul(left, right)
        if right == 0:
            raise GeoSyntaxError("division by zero", op.line, op.column)
        return self.guard(op, lambda: mul(left, power(right, -1)))

    def guard(self, tok, thunk):
        try:
            return thunk()
        except (DomainError, ZeroDivisionError, ValueError, OverflowError) as exc:
            raise GeoSyntaxError(str(exc), tok.line, tok.column) from None

    def name(self, tok):
        name = tok.text
        if self.peek().text == "(" and self.peek().kind == "op":
            if name == "d":
                return self.velocity(tok)
            if name in FUNCTIONS:
                self.next()
                arg = self.parse_expr()
                self.expect(")")
                if name == "sqrt":
                    return self.guard(tok, lambda: power(arg, Fraction(1, 2)))
                return self.guard(tok, lambda: fn(name, arg))
            if name in self.symbols:
                raise GeoSyntaxError(f"{name!r} is not a function", tok.line, tok.column)
            raise UnknownSymbolError(f"unknown function {name!r}", tok.line, tok.column)
        if name in FUNCTIONS or name == "d":
            raise GeoSyntaxError(f"function {name!r} needs an argument list", tok.line, tok.column)
        if name == "pi":
            return PI
        if name in self.symbols:
            return self.symbols[name]
        raise UnknownSymbolError(f"undeclared identifier {name!r}", tok.line, tok.column)

    def velocity(self, tok):
        if self.velocities is None:
            raise GeoSyntaxError("d(...) markers are only allowed in geodesic systems",
                                 tok.line, tok.column)
        self.next()  # "("
        arg = self.next()
        if arg.kind == "name" and arg.text == "d":
            raise DegreeError("nested d(...) markers are not allowed", arg.line, arg.column)
        if arg.kind != "name":
            raise GeoSyntaxError("d(...) takes a coordinate name", arg.line, arg.column)
        if arg.text not in self.velocities:
            raise UnknownSymbolError(f"d({arg.text}) does not name a coordinate",
                                     arg.line, arg.column)
        self.expect(")")
        return self.velocities[arg.text]


def _raise(base, exponent):
    if isinstance(exponent, Num):
        if isinstance(base, Num) and abs(exponent.value) > MAX_EXPONENT:
            raise ValueError("exponent too large for exact arithmetic")
        return power(base, exponent.value)
    # symbolic exponent: b^e = exp(e*log(b))
    return fn("exp", mul(exponent, fn("log", base)))


def parse_expr(text, symbols, velocities=None, line=1, column=1):
    """Parse a whole string as one expression."""
    p = ExprParser(tokenize(text, line, column), symbols, velocities)
    try:
        e = p.parse_expr()
    except RecursionError:
        raise GeoSyntaxError("expression nested too deeply", line, column) from None
    if not p.at_end():
        tok = p.peek()
        raise GeoSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.column)
    return as_expr(e)
