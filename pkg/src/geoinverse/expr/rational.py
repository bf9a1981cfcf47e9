"""Exact normal form for rational functions of a single symbol.

Polynomials are coefficient lists over ``Fraction``, lowest degree first.
"""

import math
from fractions import Fraction

from .core import Add, Fn, Mul, Num, Pow, Sym, add, mul, power

MAX_DEGREE = 64


def _trim(p):
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return p


def _padd(a, b):
    n = max(len(a), len(b))
    return _trim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def _pmul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return _trim(out)


def _pdivmod(a, b):
    a = list(a)
    q = [Fraction(0)] * max(1, len(a) - len(b) + 1)
    lead = b[-1]
    while len(a) >= len(b) and any(a):
        k = len(a) - len(b)
        c = a[-1] / lead
        q[k] = c
        for i, y in enumerate(b):
            a[i + k] -= c * y
        a = _trim(a[:-1]) if len(a) > 1 else [Fraction(0)]
    return _trim(q), _trim(a)


def _is_zero(p):
    return len(p) == 1 and p[0] == 0


def _monic(p):
    return [c / p[-1] for c in p]


def _pgcd(a, b):
    while not _is_zero(b):
        _, r = _pdivmod(a, b)
        a, b = b, r
    return _monic(a)


def _pderiv(p):
    return _trim([i * c for i, c in enumerate(p)][1:] or [Fraction(0)])


def _squarefree(p):
    """``[(factor, multiplicity)]`` with monic factors (Yun's algorithm)."""
    out = []
    a = _monic(p)
    if len(a) == 1:
        return out
    b = _pderiv(a)
    c = _pgcd(a, b)
    w = _pdivmod(a, c)[0]
    i = 1
    while len(w) > 1:
        y = _pgcd(w, c)
        z = _pdivmod(w, y)[0]
        if len(z) > 1:
            out.append((_monic(z), i))
        i += 1
        w = y
        c = _pdivmod(c, y)[0]
    return out


def _to_fraction(e, x):
    """``(P, Q)`` with ``e = P(x)/Q(x)``, or ``None`` outside the class."""
    if isinstance(e, Num):
        return [e.value], [Fraction(1)]
    if isinstance(e, Sym):
        return ([Fraction(0), Fraction(1)], [Fraction(1)]) if e == x else None
    if isinstance(e, Fn):
        return None
    if isinstance(e, Pow):
        if e.exp.denominator != 1 or abs(e.exp) > MAX_DEGREE:
            return None
        base = _to_fraction(e.base, x)
        if base is None:
            return None
        P, Q = base
        k = int(e.exp)
        if k < 0:
            P, Q, k = Q, P, -k
        rp, rq = [Fraction(1)], [Fraction(1)]
        for _ in range(k):
            rp, rq = _pmul(rp, P), _pmul(rq, Q)
        return _reduce(rp, rq)
    if isinstance(e, Mul):
        P, Q = [e.coeff], [Fraction(1)]
        for b, k in e.factors:
            f = _to_fraction(power(b, k), x)
            if f is None:
                return None
            P, Q = _reduce(_pmul(P, f[0]), _pmul(Q, f[1]))
        return P, Q
    if isinstance(e, Add):
        P, Q = [e.const], [Fraction(1)]
        for t, c in e.terms:
            f = _to_fraction(t, x)
            if f is None:
                return None
            tp = [c * v for v in f[0]]
            P, Q = _reduce(_padd(_pmul(P, f[1]), _pmul(tp, Q)), _pmul(Q, f[1]))
        return P, Q
    return None


def _reduce(P, Q):
    if _is_zero(Q):
        raise ZeroDivisionError("rational function with zero denominator")
    if len(P) > MAX_DEGREE or len(Q) > MAX_DEGREE:
        raise OverflowError("degree too large")
    g = _pgcd(P, Q)
    if len(g) > 1:
        P = _pdivmod(P, g)[0]
        Q = _pdivmod(Q, g)[0]
    lead = Q[-1]
    return [c / lead for c in P], [c / lead for c in Q]


def _poly_expr(p, x):
    return add(*[mul(c, power(x, i)) for i, c in enumerate(p) if c])


def rational_normal(e):
    """Reduced ``P/Q`` with a square-free factored denominator, or ``None``.

    Applies only when ``e`` is a rational function of exactly one symbol.
    """
    syms = e.symbols
    if len(syms) != 1:
        return None
    (x,) = tuple(syms)
    try:
        f = _to_fraction(e, x)
    except (ZeroDivisionError, OverflowError):
        return None
    if f is None:
        return None
    P, Q = f
    # pull powers of x out of the denominator so 1/x stays readable
    k = 0
    while len(Q) > 1 and Q[0] == 0:
        Q = Q[1:]
        k += 1
    den = [power(x, -k)] if k else []
    for fac, m in _squarefree(Q):
        den.append(power(_poly_expr(fac, x), -m))
    return mul(_poly_expr(P, x), *den)


# ------------------------------------------------------------ integration

def _psub(a, b):
    return _padd(a, [-c for c in b])


def _pscale(a, c):
    return _trim([c * v for v in a])


def _resultant(a, b):
    a, b = _trim(a), _trim(b)
    if _is_zero(a) or _is_zero(b):
        return Fraction(0)
    da, db = len(a) - 1, len(b) - 1
    if db == 0:
        return b[0] ** da
    if da == 0:
        return a[0] ** db
    _, r = _pdivmod(a, b)
    if _is_zero(r):
        return Fraction(0)
    dr = len(r) - 1
    sign = -1 if (da * db) % 2 else 1
    return sign * b[-1] ** (da - dr) * _resultant(b, r)


def _interpolate(xs, ys):
    out = [Fraction(0)]
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        basis = [Fraction(1)]
        denom = Fraction(1)
        for j, xj in enumerate(xs):
            if j != i:
                basis = _pmul(basis, [-xj, Fraction(1)])
                denom *= xi - xj
        out = _padd(out, _pscale(basis, yi / denom))
    return out


def _divisors(n, limit=10 ** 12):
    n = abs(n)
    if n == 0 or n > limit:
        return None
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def _rational_roots(p):
    p = _trim(p)
    if len(p) == 1:
        return []
    roots = []
    while len(p) > 1 and p[0] == 0:
        roots.append(Fraction(0))
        p = p[1:]
    if len(p) == 1:
        return sorted(set(roots))
    lcm = 1
    for c in p:
        lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    ints = [int(c * lcm) for c in p]
    ps, qs = _divisors(ints[0]), _divisors(ints[-1])
    if ps is None or qs is None:
        return None
    for a in ps:
        for b in qs:
            for s in (1, -1):
                z = Fraction(s * a, b)
                if sum(c * z ** i for i, c in enumerate(p)) == 0:
                    roots.append(z)
    return sorted(set(roots))


def _solve_linear(A, b):
    """Exact Gaussian elimination; ``None`` if singular."""
    n = len(A)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            return None
        M[c], M[p] = M[p], M[c]
        inv = 1 / M[c][c]
        M[c] = [v * inv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [v - f * w for v, w in zip(M[r], M[c])]
    return [M[r][n] for r in range(n)]


def integrate_rational(e, x):
    """``∫ e dx`` for a rational function of the single symbol ``x``.

    Polynomial part by the power rule, rational part by Horowitz-Ostrogradsky,
    logarithmic part by Rothstein-Trager. Returns ``(rational_expr, logs)``
    with ``logs`` a list of ``(coefficient, polynomial_expr)``, or ``None``
    when ``e`` is outside the class or a residue is irrational.
    """
    if e.symbols - {x}:
        return None
    try:
        f = _to_fraction(e, x)
    except (ZeroDivisionError, OverflowError):
        return None
    if f is None:
        return None
    P, Q = f
    poly, P = _pdivmod(P, Q)
    integral_poly = [Fraction(0)] + [c / (i + 1) for i, c in enumerate(poly)]
    rational_part = _poly_expr(_trim(integral_poly), x)
    if _is_zero(P):
        return rational_part, []
    # Q = D * S with S square-free and D = gcd(Q, Q')
    D = _pgcd(Q, _pderiv(Q))
    S = _pdivmod(Q, D)[0]
    dD, dS = len(D) - 1, len(S) - 1
    if dD > 0:
        T = _pdivmod(_pmul(_pderiv(D), S), D)[0]
        # P = N' S - N T + M D with deg N < dD, deg M < dS
        size = dD + dS
        cols = []
        for i in range(dD):
            basis = [Fraction(0)] * i + [Fraction(1)]
            cols.append(_psub(_pmul(_pderiv(basis), S), _pmul(basis, T)))
        for i in range(dS):
            basis = [Fraction(0)] * i + [Fraction(1)]
            cols.append(_pmul(basis, D))
        A = [[(c[r] if r < len(c) else Fraction(0)) for c in cols] for r in range(size)]
        rhs = [(P[r] if r < len(P) else Fraction(0)) for r in range(size)]
        sol = _solve_linear(A, rhs)
        if sol is None:
            return None
        N = _trim(sol[:dD]) if dD else [Fraction(0)]
        M = _trim(sol[dD:]) if dS else [Fraction(0)]
        rational_part = add(rational_part, mul(_poly_expr(N, x), power(_poly_expr(D, x), -1)))
    else:
        M = P
    if _is_zero(M):
        return rational_part, []
    # log part: residues are the roots of res_x(S, M - z S')
    dS1 = _pderiv(S)
    zs = [Fraction(k) for k in range(dS + 1)]
    vals = [_resultant(S, _psub(M, _pscale(dS1, z))) for z in zs]
    R = _interpolate(zs, vals)
    roots = _rational_roots(R)
    if roots is None:
        return None
    logs = []
    total = 0
    for c in roots:
        if c == 0:
            continue
        v = _pgcd(S, _psub(M, _pscale(dS1, c)))
        if len(v) > 1:
            logs.append((c, _poly_expr(v, x)))
            total += len(v) - 1
    if total != dS:
        return None
    return rational_part, logs
