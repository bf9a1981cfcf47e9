"""Christoffel symbols, Riemann tensor, and the curvature identity checks.

Indices are 0-based inside the library; file formats and reports use 1-based.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import SingularMetricError
from .expr import (
    ONE, ZERO, Chart, CompiledExprs, add, as_expr, diff, is_zero, mul, power,
    sample_points, simplify, zero_mask,
)


HALF = as_expr(0.5)


def _canon(e, do_simplify):
    e = as_expr(e)
    return simplify(e) if do_simplify else e


@dataclass(frozen=True, eq=False)
class ChristoffelSet:
    """Symmetric connection coefficients ``Γ^i_{jk}`` stored for ``j <= k``."""

    chart: Chart
    table: dict = field(repr=False)

    @classmethod
    def from_entries(cls, chart, entries, canonicalize=True):
        """Build from a (possibly partial) mapping ``(i, j, k) -> Expr``.

        Missing entries are zero. When both orderings of the lower pair are
        supplied the later one wins; callers that care check agreement first.
        """
        n = chart.n
        table = {(i, j, k): ZERO for i in range(n) for j in range(n) for k in range(j, n)}
        for (i, j, k), e in entries.items():
            if not all(0 <= x < n for x in (i, j, k)):
                raise IndexError(f"Christoffel index {(i + 1, j + 1, k + 1)} out of range")
            table[(i, min(j, k), max(j, k))] = _canon(e, canonicalize)
        return cls(chart, table)

    @property
    def n(self):
        return self.chart.n

    def __getitem__(self, ijk):
        i, j, k = ijk
        return self.table[(i, j, k) if j <= k else (i, k, j)]

    def items(self):
        return sorted(self.table.items())

    def nonzero(self):
        return [(key, e) for key, e in self.items() if e != ZERO]

    def replace(self, ijk, expr):
        i, j, k = ijk
        table = dict(self.table)
        table[(i, min(j, k), max(j, k))] = as_expr(expr)
        return ChristoffelSet(self.chart, table)

    def numeric(self):
        """Compiled evaluator returning an array ``G[l, j, k] = Γ^l_{jk}``."""
        n = self.n
        keys = sorted(self.table)
        comp = CompiledExprs([self.table[k] for k in keys], symbols=self.chart.coords)

        def evaluate(point):
            vals = comp.call(*[float(x) for x in point])
            G = np.empty((n, n, n))
            for (i, j, k), v in zip(keys, vals):
                G[i, j, k] = v
                G[i, k, j] = v
            return G

        return evaluate


@dataclass(frozen=True, eq=False)
class RiemannTensor:
    """``R^i_{jkl}`` stored for ``k < l``; the rest follows by skew symmetry."""

    chart: Chart
    table: dict = field(repr=False)

    @property
    def n(self):
        return self.chart.n

    def __getitem__(self, ijkl):
        i, j, k, l = ijkl
        if k == l:
            return ZERO
        if k < l:
            return self.table[(i, j, k, l)]
        return mul(-1, self.table[(i, j, l, k)])

    def items(self):
        return sorted(self.table.items())

    def replace(self, ijkl, expr):
        table = dict(self.table)
        i, j, k, l = ijkl
        if k < l:
            table[(i, j, k, l)] = as_expr(expr)
        else:
            table[(i, j, l, k)] = mul(-1, as_expr(expr))
        return RiemannTensor(self.chart, table)


@dataclass(frozen=True, eq=False)
class MetricTensor:
    """Symmetric ``g_ij`` stored for ``i <= j`` plus any unresolved constants."""

    chart: Chart
    table: dict = field(repr=False)
    constants: tuple = ()

    @classmethod
    def from_entries(cls, chart, entries, constants=(), canonicalize=True):
        n = chart.n
        table = {(i, j): ZERO for i in range(n) for j in range(i, n)}
        for (i, j), e in entries.items():
            if not (0 <= i < n and 0 <= j < n):
                raise IndexError(f"metric index {(i + 1, j + 1)} out of range")
            table[(min(i, j), max(i, j))] = _canon(e, canonicalize)
        return cls(chart, table, tuple(constants))

    @property
    def n(self):
        return self.chart.n

    def __getitem__(self, ij):
        i, j = ij
        return self.table[(i, j) if i <= j else (j, i)]

    def matrix(self):
        return [[self[i, j] for j in range(self.n)] for i in range(self.n)]

    def items(self):
        return sorted(self.table.items())

    def evaluator(self, constant_values=None):
        """Compiled ``point -> (n, n) array``; constants default to 1."""
        n = self.n
        values = {c: 1.0 for c in self.constants}
        if constant_values:
            values.update(constant_values)
        symbols = tuple(self.chart.coords) + tuple(values)
        keys = sorted(self.table)
        comp = CompiledExprs([self.table[k] for k in keys], symbols=symbols)
        extra = [float(values[c]) for c in values]

        def evaluate(point):
            vals = comp.call(*[float(x) for x in point], *extra)
            G = np.empty((n, n))
            for (i, j), v in zip(keys, vals):
                G[i, j] = G[j, i] = v
            return G

        return evaluate

    def scaled(self, factor):
        return MetricTensor(self.chart, {k: mul(factor, e) for k, e in self.table.items()},
                            self.constants)


# ------------------------------------------------------------- linear algebra

def determinant(matrix):
    """Division-free determinant by dynamic programming over column subsets.

    Zero entries are skipped, so sparse (e.g. diagonal) matrices stay products.
    """
    n = len(matrix)
    level = {0: ONE}
    for r in range(n):
        nxt = {}
        for mask, val in level.items():
            for c in range(n):
                if mask & (1 << c):
                    continue
                a = matrix[r][c]
                if a == ZERO:
                    continue
                # inversions: used columns to the right of c
                sign = -1 if bin(mask >> (c + 1)).count("1") % 2 else 1
                nxt.setdefault(mask | (1 << c), []).append(mul(sign, a, val))
        level = {m: add(*terms) for m, terms in nxt.items()}
        level = {m: v for m, v in level.items() if v != ZERO}
        if not level:
            return ZERO
    return level.get((1 << n) - 1, ZERO)


def cofactor(matrix, i, j):
    minor = [[matrix[r][c] for c in range(len(matrix)) if c != j]
             for r in range(len(matrix)) if r != i]
    d = determinant(minor) if minor else ONE
    return d if (i + j) % 2 == 0 else mul(-1, d)


def check_invertible(metric, seed=42, points=5):
    """Raise SingularMetricError if ``det g`` is probabilistically zero on the box."""
    det = determinant(metric.matrix())
    if det == ZERO or is_zero(det, metric.chart, trials=points, seed=seed):
        raise SingularMetricError("metric determinant vanishes on the sample box")
    return det


def inverse_metric(metric, seed=42, exact=True):
    """Symbolic ``g^{ij}`` as adjugate over determinant.

    With ``exact=False`` entries are left unsimplified, which keeps large
    metrics tractable for numeric work.
    """
    det = check_invertible(metric, seed)
    inv_det = power(det, -1)
    M = metric.matrix()
    n = metric.n
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            e = mul(cofactor(M, j, i), inv_det)
            inv[i][j] = inv[j][i] = simplify(e) if exact else e
    return inv


# -------------------------------------------------------------- connections

def christoffel_from_metric(metric, seed=42, exact=True):
    """``Γ^i_{jk} = ½ g^{im} (∂_k g_jm + ∂_j g_km − ∂_m g_jk)``."""
    chart = metric.chart
    n = chart.n
    x = chart.coords
    dg = {(i, j, k): diff(metric[i, j], x[k])
          for i in range(n) for j in range(n) for k in range(n)}
    inv = inverse_metric(metric, seed, exact)
    entries = {}
    for j in range(n):
        for k in range(j, n):
            first = [mul(HALF, add(dg[j, m, k], dg[k, m, j], mul(-1, dg[j, k, m])))
                     for m in range(n)]
            for i in range(n):
                entries[(i, j, k)] = add(*[mul(inv[i][m], first[m]) for m in range(n)
                                           if inv[i][m] != ZERO and first[m] != ZERO])
    return ChristoffelSet.from_entries(chart, entries, canonicalize=exact)


def riemann(gamma, exact=True):
    """``R^i_{jkl} = ∂_k Γ^i_{jl} − ∂_l Γ^i_{jk} + Γ^i_{mk} Γ^m_{jl} − Γ^i_{ml} Γ^m_{jk}``."""
    chart = gamma.chart
    n = chart.n
    x = chart.coords
    dG = {}
    for key, e in gamma.table.items():
        for a in range(n):
            dG[key + (a,)] = diff(e, x[a])

    def d(i, j, k, a):
        return dG[(i, j, k, a) if j <= k else (i, k, j, a)]

    table = {}
    for i in range(n):
        for j in range(n):
            for k, l in combinations(range(n), 2):
                terms = [d(i, j, l, k), mul(-1, d(i, j, k, l))]
                for m in range(n):
                    terms.append(mul(gamma[i, m, k], gamma[m, j, l]))
                    terms.append(mul(-1, gamma[i, m, l], gamma[m, j, k]))
                e = add(*terms)
                table[(i, j, k, l)] = simplify(e) if exact else e
    return RiemannTensor(chart, table)


def lower_riemann(R, metric):
    """Covariant ``R_{ijkl} = g_{im} R^m_{jkl}`` for every index tuple."""
    n = R.n
    out = {}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    out[(i, j, k, l)] = add(*[mul(metric[i, m], R[m, j, k, l]) for m in range(n)])
    return out


def is_flat(R, seed=42, trials=12):
    """True iff every stored component passes the zero test."""
    return all(zero_mask([e for _, e in R.items()], R.chart, trials=trials, seed=seed))


def bianchi_violations(R, seed=42, trials=12):
    """Index tuples ``(i, j, k, l)`` whose cyclic sum fails the zero test.

    Only ``j < k < l`` are checked: with a repeated index the cyclic sum
    vanishes by skew symmetry alone.
    """
    n = R.n
    keys = []
    sums = []
    for i in range(n):
        for j, k, l in combinations(range(n), 3):
            keys.append((i, j, k, l))
            sums.append(add(R[i, j, k, l], R[i, k, l, j], R[i, l, j, k]))
    mask = zero_mask(sums, R.chart, trials=trials, seed=seed)
    return [key for key, ok in zip(keys, mask) if not ok]


def bianchi_check(R, seed=42, trials=12):
    return not bianchi_violations(R, seed, trials)


def metric_from_numeric_check(metric, seed=42, count=5):
    """Largest ``|det g|`` over a few sample points (diagnostic helper)."""
    ev = metric.evaluator()
    pts = sample_points(metric.chart, count, seed)
    return max(abs(np.linalg.det(ev(p))) for p in pts)
