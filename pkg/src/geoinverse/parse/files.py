"""Readers and writers for the ``.geo``, ``.gam`` and ``.met`` formats.

All three are line-oriented UTF-8 with ``#`` comments. A file starts with
``format = 1`` and declares its coordinates before anything refers to them::

    format = 1
    coords = theta, phi
    box theta = [3/10, 14/5]          # optional, default [1/2, 3/2]
    param M = 1                       # numeric parameter, inlined
    param a                           # symbolic constant

    eq theta = sin(theta)*cos(theta)*d(phi)^2      # .geo: x'' = ...
    gamma 1,2,2 = -sin(theta)*cos(theta)           # .gam: 1-based indices
    g 2,2 = sin(theta)^2                           # .met: 1-based indices
"""

from fractions import Fraction

from ..errors import (
    DegreeError, GeoSyntaxError, IndexOutOfRangeError, ParseError, SymmetryConflictError,
)
from ..expr import (
    ZERO, Add, Chart, Mul, Num, Pow, add, const, coord, expand, is_zero, mul, neg,
    power, sub, to_text, velocity,
)
from ..expr.numeric import DEFAULT_BOX
from ..expr.simplify import ExpansionTooLarge
from ..geometry import ChristoffelSet, MetricTensor, check_invertible
from .exprparse import RESERVED, ExprParser
from .lexer import tokenize

FORMAT_VERSION = 1
_KEYWORDS = {"format", "coords", "box", "param", "eq", "gamma", "g"}


class _Header:
    """Accumulates the shared statements (format, coords, box, param)."""

    def __init__(self, kind):
        self.kind = kind
        self.version_seen = False
        self.names = None
        self.boxes = {}
        self.symbols = {}

    def require_coords(self, tok):
        if self.names is None:
            raise GeoSyntaxError("coordinates must be declared first", tok.line, tok.column)

    def chart(self):
        if self.names is None:
            raise ParseError("missing 'coords = ...' declaration")
        try:
            return Chart(self.names, tuple(self.boxes.get(n, DEFAULT_BOX) for n in self.names))
        except ValueError as exc:
            raise ParseError(str(exc)) from None


class _Line:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def expect(self, text=None, kind=None):
        tok = self.next()
        if (text is not None and (tok.text != text or tok.kind == "end")) or \
                (kind is not None and tok.kind != kind):
            want = repr(text) if text is not None else f"a {kind}"
            found = "end of line" if tok.kind == "end" else repr(tok.text)
            raise GeoSyntaxError(f"expected {want}, found {found}", tok.line, tok.column)
        return tok

    def expr(self, symbols, velocities=None):
        p = ExprParser(self.tokens, symbols, velocities)
        p.pos = self.pos
        try:
            e = p.parse_expr()
        except RecursionError:
            tok = self.peek()
            raise GeoSyntaxError("expression nested too deeply", tok.line, tok.column) from None
        self.pos = p.pos
        return e

    def end(self):
        tok = self.peek()
        if tok.kind != "end":
            raise GeoSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.column)

    def index(self, n):
        tok = self.expect(kind="num")
        if not tok.text.isdigit():
            raise GeoSyntaxError("index must be a positive integer", tok.line, tok.column)
        k = int(tok.text)
        if not 1 <= k <= n:
            raise IndexOutOfRangeError(f"index {k} outside 1..{n}", tok.line, tok.column)
        return k - 1


def _statements(text, kind, body_keywords):
    """Split into header state and ``(keyword_token, _Line)`` body statements."""
    header = _Header(kind)
    body = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0]
        if not content.strip():
            continue
        line = _Line(tokenize(content, lineno, 1))
        key = line.next()
        if key.kind != "name" or key.text not in _KEYWORDS:
            raise GeoSyntaxError(f"expected a statement keyword, found {key.text!r}",
                                 key.line, key.column)
        if not header.version_seen and key.text != "format":
            raise GeoSyntaxError("file must start with 'format = 1'", key.line, key.column)
        if key.text == "format":
            if header.version_seen:
                raise GeoSyntaxError("duplicate format line", key.line, key.column)
            line.expect("=")
            v = line.expect(kind="num")
            if v.text != str(FORMAT_VERSION):
                raise GeoSyntaxError(f"unsupported format version {v.text}", v.line, v.column)
            line.end()
            header.version_seen = True
        elif key.text == "coords":
            if header.names is not None:
                raise GeoSyntaxError("duplicate coords line", key.line, key.column)
            line.expect("=")
            names = [_declare(line.expect(kind="name"), header)]
            while line.peek().text == ",":
                line.next()
                names.append(_declare(line.expect(kind="name"), header))
            line.end()
            if len(names) < 2:
                raise GeoSyntaxError("at least two coordinates are required", key.line, key.column)
            header.names = tuple(names)
            for n in names:
                header.symbols[n] = coord(n)
        elif key.text == "box":
            header.require_coords(key)
            name_tok = line.expect(kind="name")
            if name_tok.text not in header.names:
                raise GeoSyntaxError(f"{name_tok.text!r} is not a coordinate",
                                     name_tok.line, name_tok.column)
            if name_tok.text in header.boxes:
                raise GeoSyntaxError("duplicate box", name_tok.line, name_tok.column)
            line.expect("=")
            line.expect("[")
            lo = _rational(line, header)
            line.expect(",")
            hi = _rational(line, header)
            line.expect("]")
            line.end()
            if not lo < hi:
                raise GeoSyntaxError("box must satisfy lo < hi", name_tok.line, name_tok.column)
            header.boxes[name_tok.text] = (lo, hi)
        elif key.text == "param":
            name_tok = line.expect(kind="name")
            name = _declare(name_tok, header)
            if line.peek().text == "=":
                line.next()
                value = line.expr(header.symbols)
                if any(s.kind == "coord" for s in value.symbols):
                    raise GeoSyntaxError("parameters must not depend on coordinates",
                                         name_tok.line, name_tok.column)
            else:
                value = const(name)
            line.end()
            header.symbols[name] = value
        else:
            if key.text not in body_keywords:
                raise GeoSyntaxError(f"{key.text!r} lines are not allowed in {kind} files",
                                     key.line, key.column)
            header.require_coords(key)
            body.append((key, line))
    if not header.version_seen:
        raise ParseError("empty input: expected 'format = 1'")
    return header, body


def _declare(tok, header):
    name = tok.text
    if name in RESERVED or name in _KEYWORDS:
        raise GeoSyntaxError(f"{name!r} is reserved", tok.line, tok.column)
    if name in header.symbols:
        raise GeoSyntaxError(f"{name!r} is already declared", tok.line, tok.column)
    return name


def _rational(line, header):
    tok = line.peek()
    e = line.expr({k: v for k, v in header.symbols.items() if isinstance(v, Num)})
    if not isinstance(e, Num):
        raise GeoSyntaxError("box bounds must be rational numbers", tok.line, tok.column)
    return e.value


# ----------------------------------------------------------------- readers

def parse_system(text):
    """Read a ``.geo`` geodesic system and return ``(chart, christoffel)``.

    Each ``eq x = rhs`` gives ``x'' = rhs`` where ``rhs`` must be exactly
    quadratic in the ``d(.)`` markers. ``Γ^i_jk`` is minus the symmetrized
    coefficient, so a cross term ``2b d(x) d(y)`` yields ``Γ^i_xy = -b``.
    """
    header, body = _statements(text, "geodesic", {"eq"})
    chart = header.chart()
    names = header.names
    vels = {n: velocity(n) for n in names}
    rhs = {}
    where = {}
    for key, line in body:
        tok = line.expect(kind="name")
        if tok.text not in names:
            raise GeoSyntaxError(f"{tok.text!r} is not a coordinate", tok.line, tok.column)
        if line.peek().text == "'":
            line.next()
            line.expect("'")
        if tok.text in rhs:
            raise GeoSyntaxError(f"duplicate equation for {tok.text}", tok.line, tok.column)
        line.expect("=")
        start = line.peek()
        rhs[tok.text] = line.expr(header.symbols, vels)
        line.end()
        where[tok.text] = (start.line, start.column)
    missing = [n for n in names if n not in rhs]
    if missing:
        raise ParseError(f"missing equation for {', '.join(missing)}")
    index = {vels[n]: k for k, n in enumerate(names)}
    entries = {}
    for i, n in enumerate(names):
        for (j, k), c in _quadratic_coefficients(rhs[n], index, where[n]).items():
            entries[(i, j, k)] = neg(c) if j == k else mul(Fraction(-1, 2), c)
    return chart, ChristoffelSet.from_entries(chart, entries)


def _quadratic_coefficients(e, index, where):
    try:
        x = expand(e)
    except ExpansionTooLarge:
        raise ParseError("right-hand side too large to expand", *where) from None
    parts = x.parts() if isinstance(x, Add) else [x]
    out = {}
    for p in parts:
        if isinstance(p, Num):
            if p.value != 0:
                raise DegreeError("term of degree 0 in the velocities", *where)
            continue
        if isinstance(p, Mul):
            coeff, factors = p.coeff, p.factors
        elif isinstance(p, Pow):
            coeff, factors = Fraction(1), ((p.base, p.exp),)
        else:
            coeff, factors = Fraction(1), ((p, Fraction(1)),)
        degree = 0
        vs = []
        rest = [Num(coeff)]
        for b, k in factors:
            if b in index:
                if k.denominator != 1 or k < 1:
                    raise DegreeError("velocity markers must appear with positive integer powers",
                                      *where)
                degree += int(k)
                vs.extend([index[b]] * int(k))
            elif any(s.kind == "vel" for s in b.symbols):
                raise DegreeError("velocity marker inside a non-polynomial term", *where)
            else:
                rest.append(power(b, k))
        if degree != 2:
            raise DegreeError(f"term of degree {degree} in the velocities", *where)
        key = (min(vs), max(vs))
        out[key] = add(out.get(key, ZERO), mul(*rest))
    return out


def parse_christoffel(text):
    """Read a ``.gam`` table of ``gamma i,j,k = expr`` lines (1-based)."""
    header, body = _statements(text, "christoffel", {"gamma"})
    chart = header.chart()
    n = chart.n
    given = {}
    for key, line in body:
        i = line.index(n)
        line.expect(",")
        j = line.index(n)
        line.expect(",")
        k = line.index(n)
        line.expect("=")
        e = line.expr(header.symbols)
        line.end()
        if (i, j, k) in given:
            raise GeoSyntaxError(f"duplicate entry gamma {i + 1},{j + 1},{k + 1}",
                                 key.line, key.column)
        given[(i, j, k)] = (e, key)
    entries = {}
    for (i, j, k), (e, key) in sorted(given.items()):
        twin = given.get((i, k, j))
        if j > k and twin is not None:
            if not is_zero(sub(e, twin[0]), chart):
                raise SymmetryConflictError(
                    f"gamma {i + 1},{j + 1},{k + 1} disagrees with gamma {i + 1},{k + 1},{j + 1}",
                    key.line, key.column)
            continue
        entries[(i, j, k)] = e
    return chart, ChristoffelSet.from_entries(chart, entries)


def parse_metric(text, seed=42):
    """Read a ``.met`` table of ``g i,j = expr`` lines (1-based, symmetric)."""
    header, body = _statements(text, "metric", {"g"})
    chart = header.chart()
    n = chart.n
    given = {}
    for key, line in body:
        i = line.index(n)
        line.expect(",")
        j = line.index(n)
        line.expect("=")
        e = line.expr(header.symbols)
        line.end()
        if (i, j) in given:
            raise GeoSyntaxError(f"duplicate entry g {i + 1},{j + 1}", key.line, key.column)
        given[(i, j)] = (e, key)
    entries = {}
    for (i, j), (e, key) in sorted(given.items()):
        twin = given.get((j, i))
        if i > j and twin is not None:
            if not is_zero(sub(e, twin[0]), chart):
                raise SymmetryConflictError(
                    f"g {i + 1},{j + 1} disagrees with g {j + 1},{i + 1}", key.line, key.column)
            continue
        entries[(i, j)] = e
    metric = MetricTensor.from_entries(chart, entries)
    check_invertible(metric, seed)
    return chart, metric


# ----------------------------------------------------------------- writers

def _header_lines(chart, exprs):
    lines = [f"format = {FORMAT_VERSION}", "coords = " + ", ".join(chart.names)]
    for name, (lo, hi) in zip(chart.names, chart.boxes):
        if (lo, hi) != DEFAULT_BOX:
            lines.append(f"box {name} = [{_frac(lo)}, {_frac(hi)}]")
    consts = set()
    for e in exprs:
        consts |= {s.name for s in e.symbols if s.kind == "const"}
    lines.extend(f"param {c}" for c in sorted(consts))
    return lines


def _frac(q):
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def render_christoffel(gamma):
    entries = gamma.nonzero()
    lines = _header_lines(gamma.chart, [e for _, e in entries])
    for (i, j, k), e in entries:
        lines.append(f"gamma {i + 1},{j + 1},{k + 1} = {to_text(e)}")
    return "\n".join(lines) + "\n"


def render_metric(metric):
    entries = [(k, e) for k, e in metric.items() if e != ZERO]
    lines = _header_lines(metric.chart, [e for _, e in entries])
    for (i, j), e in entries:
        lines.append(f"g {i + 1},{j + 1} = {to_text(e)}")
    return "\n".join(lines) + "\n"


def render_system(gamma):
    """Geodesic equations ``x'' = -Γ^x_jk d(x^j) d(x^k)``."""
    chart = gamma.chart
    names = chart.names
    lines = _header_lines(chart, [e for _, e in gamma.nonzero()])
    for i, name in enumerate(names):
        terms = []
        for j in range(chart.n):
            for k in range(j, chart.n):
                e = gamma[i, j, k]
                if e == ZERO:
                    continue
                c = -1 if j == k else -2
                marks = f"d({names[j]})^2" if j == k else f"d({names[j]})*d({names[k]})"
                terms.append((mul(c, e), marks))
        if not terms:
            lines.append(f"eq {name} = 0")
            continue
        pieces = []
        for coef, marks in terms:
            pieces.append(f"({to_text(coef)})*{marks}")
        lines.append(f"eq {name} = " + " + ".join(pieces))
    return "\n".join(lines) + "\n"
