"""Linear relations on the metric from the covariant Riemann symmetries.

For a metric connection the lowered tensor ``R_ijkl = g_im R^m_jkl`` is skew in
``(i, j)`` and symmetric under exchange of the pairs ``(ij)`` and ``(kl)``.
With ``R`` known these are homogeneous linear equations in the ``g_ij``.

Candidate rows are numbered from 1 in a fixed order:

1. skew relations with ``i = j``: ``g_im R^m_ikl = 0``, ordered by ``(i, k<l)``;
2. pair exchange: ``g_im R^m_jkl - g_km R^m_lij = 0`` over ordered pairs
   ``(i<j) != (k<l)``;
3. skew relations with ``i < j``: ``g_im R^m_jkl + g_jm R^m_ikl = 0``.

For ``n = 3`` the first two families are 9 and 6 rows, so row numbers in an
equation-choice override refer to the same equations as the classic
``{4, 5, 9, 10, 11}`` selection.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import IndeterminateError, InconsistentRelationsError
from .expr import (
    ONE, ZERO, PointEvaluator, add, mul, neg, quotient, simplify, zero_mask,
)
from .geometry import determinant

RANK_POINTS = 8
RANK_RTOL = 1e-9


def unknowns(n):
    """Independent metric components ``(i, j)``, ``i <= j``, row-major."""
    return tuple((i, j) for i in range(n) for j in range(i, n))


@dataclass(frozen=True, eq=False)
class Relation:
    id: int              # 1-based candidate number
    family: str          # "skew-diagonal", "exchange" or "skew"
    indices: tuple       # 0-based (i, j, k, l)
    coeffs: tuple        # one Expr per unknown

    def label(self):
        i, j, k, l = (x + 1 for x in self.indices)
        return f"{self.family}({i},{j},{k},{l})"


@dataclass(frozen=True, eq=False)
class LinearRelations:
    chart: object
    unknowns: tuple
    rows: tuple          # nonzero, deduplicated rows
    candidates: int      # number of candidate rows before dropping
    dropped: tuple = ()  # ids of zero or duplicate rows

    def by_id(self, ids):
        index = {r.id: r for r in self.rows}
        missing = [i for i in ids if not 1 <= i <= self.candidates]
        if missing:
            raise ValueError(f"equation numbers out of range 1..{self.candidates}: {missing}")
        return [index[i] for i in ids if i in index]

    def restricted(self, ids):
        """Relations limited to the given candidate numbers (order preserved)."""
        return LinearRelations(self.chart, self.unknowns, tuple(self.by_id(ids)),
                               self.candidates, self.dropped)


def _row(n, col, terms):
    """Accumulate ``(coefficient, (a, b))`` pairs into a coefficient tuple."""
    acc = [[] for _ in range(len(col))]
    for c, (a, b) in terms:
        if c != ZERO:
            acc[col[(min(a, b), max(a, b))]].append(c)
    return tuple(add(*t) if t else ZERO for t in acc)


def candidate_rows(R):
    """All candidate rows in numbering order, including zero rows."""
    n = R.n
    cols = unknowns(n)
    col = {u: p for p, u in enumerate(cols)}
    pairs = list(combinations(range(n), 2))
    out = []

    def emit(family, idx, terms):
        out.append(Relation(len(out) + 1, family, idx, _row(n, col, terms)))

    for i in range(n):
        for k, l in pairs:
            emit("skew-diagonal", (i, i, k, l),
                 [(R[m, i, k, l], (i, m)) for m in range(n)])
    for (i, j) in pairs:
        for (k, l) in pairs:
            if (i, j) == (k, l):
                continue
            emit("exchange", (i, j, k, l),
                 [(R[m, j, k, l], (i, m)) for m in range(n)]
                 + [(neg(R[m, l, i, j]), (k, m)) for m in range(n)])
    for (i, j) in pairs:
        for k, l in pairs:
            emit("skew", (i, j, k, l),
                 [(R[m, j, k, l], (i, m)) for m in range(n)]
                 + [(R[m, i, k, l], (j, m)) for m in range(n)])
    return out


def build_relations(R, seed=42, trials=12, exact=True):
    """Candidate rows with zero rows and exact duplicates (up to sign) dropped.

    Coefficients are simplified unless ``exact`` is false; rows whose every
    coefficient passes the zero test are removed, but all rows keep their
    candidate number.
    """
    cands = candidate_rows(R)
    coeffs = [simplify(c) if exact else c for r in cands for c in r.coeffs]
    N = len(unknowns(R.n))
    mask = zero_mask([c for c in coeffs if c != ZERO], R.chart, trials=trials, seed=seed) \
        if any(c != ZERO for c in coeffs) else []
    it = iter(mask)
    zero = [True if c == ZERO else next(it) for c in coeffs]
    rows, dropped, seen = [], [], set()
    for r_index, r in enumerate(cands):
        cs = tuple(ZERO if zero[r_index * N + p] else coeffs[r_index * N + p] for p in range(N))
        if all(c == ZERO for c in cs):
            dropped.append(r.id)
            continue
        key = cs
        neg_key = tuple(neg(c) for c in cs)
        if key in seen or neg_key in seen:
            dropped.append(r.id)
            continue
        seen.add(key)
        rows.append(Relation(r.id, r.family, r.indices, cs))
    return LinearRelations(R.chart, unknowns(R.n), tuple(rows), len(cands), tuple(dropped))


# ------------------------------------------------------------------- rank

@dataclass(frozen=True)
class RankInfo:
    rank: int
    pivot_rows: tuple      # relation ids, in pivot order
    pivot_cols: tuple      # unknown indices matched with pivot_rows
    free_cols: tuple       # remaining unknown indices
    point: tuple           # best sample point
    ranks: tuple           # numeric rank at every sample point
    seed: int


def column_preference(unk):
    """Elimination order: off-diagonals, then diagonals from the last down.

    ``g_11`` comes last, so it is the preferred free component.
    """
    off = [p for p, (i, j) in enumerate(unk) if i != j]
    diag = [p for p, (i, j) in enumerate(unk) if i == j]
    return off + diag[::-1]


def _numeric_rank(A):
    if A.size == 0:
        return 0, 1.0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0:
        return 0, 1.0
    r = int(np.sum(s > RANK_RTOL * s[0]))
    return r, float(s[r - 1] / s[0]) if r else 1.0


def symbolic_rank(relations, seed=42, points=RANK_POINTS):
    """Numeric rank over seeded sample points and greedy pivot selection.

    The rank is the maximum over ``points`` samples; the best point has that
    rank and the best conditioning. Pivots are chosen column by column in
    :func:`column_preference` order at the best point: among rows whose
    reduced entry is within a factor 100 of the largest, the sparsest wins
    (ties by magnitude).
    """
    rows = relations.rows
    N = len(relations.unknowns)
    if not rows:
        return RankInfo(0, (), (), tuple(range(N)), (), (), seed)
    flat = [c for r in rows for c in r.coeffs]
    ev = PointEvaluator(flat, relations.chart, seed)
    pts, vals = ev.sample(points, seed)
    best = None
    ranks = []
    for p, v in zip(pts, vals):
        A = v.reshape(len(rows), N)
        r, cond = _numeric_rank(A)
        ranks.append(r)
        if best is None or (r, cond) > best[0]:
            best = ((r, cond), p, A)
    (rank, _), point, A = best
    order = column_preference(relations.unknowns)
    M = A.copy()
    scale = np.max(np.abs(A)) if A.size else 1.0
    available = list(range(len(rows)))
    prow, pcol = [], []
    for c in order:
        if len(pcol) == rank:
            break
        if not available:
            break
        mags = np.array([abs(M[r, c]) for r in available])
        top = float(np.max(mags))
        if top <= 1e-8 * scale:
            continue
        # sparsest acceptable row keeps the pivot block near triangular
        fill = [int(np.sum(np.abs(M[r]) > 1e-10 * scale)) for r in available]
        k = min((k for k in range(len(available)) if mags[k] >= 1e-2 * top),
                key=lambda k: (fill[k], -mags[k]))
        r = available.pop(k)
        prow.append(r)
        pcol.append(c)
        piv = M[r, c]
        for rr in available:
            M[rr, :] -= (M[rr, c] / piv) * M[r, :]
    if len(pcol) != rank:
        raise IndeterminateError("pivot selection did not reach the numeric rank")
    free = tuple(c for c in range(N) if c not in pcol)
    return RankInfo(rank, tuple(rows[r].id for r in prow), tuple(pcol), free,
                    tuple(float(x) for x in point), tuple(ranks), seed)


# ----------------------------------------------------------------- solving

@dataclass(frozen=True, eq=False)
class MetricAnsatz:
    """``g_u = Σ_f H[u][f] g_f`` over the free components ``f``.

    ``blocks`` are the connected groups of unknowns; a block with more than
    one free component is *coupled*. ``zero`` lists components forced to 0.
    """

    chart: object
    unknowns: tuple
    rank: RankInfo
    free: tuple                          # unknown indices
    H: dict = field(repr=False)          # u -> {f: Expr}
    blocks: tuple                        # tuples of unknown indices; first entries free
    zero: tuple
    delta: object = ONE

    def ratio(self, u, f):
        return self.H[u].get(f, ZERO)

    def coupled(self):
        return [b for b in self.blocks if sum(1 for u in b if u in self.free) > 1]


def solve_metric_ratios(relations, rank_info, seed=42, trials=12):
    """Solve the pivot rows for the pivot unknowns by Cramer's rule.

    ``Δ = det(A_pp)`` and each numerator are division-free determinants; the
    single division happens at the end, followed by cancellation.
    """
    unk = relations.unknowns
    N = len(unk)
    if rank_info.rank >= N:
        raise InconsistentRelationsError(
            f"relations have full rank {rank_info.rank}: only g = 0 satisfies them")
    index = {r.id: r for r in relations.rows}
    prow = [index[i] for i in rank_info.pivot_rows]
    pcol = list(rank_info.pivot_cols)
    free = list(rank_info.free_cols)
    H = {f: {f: ONE} for f in free}
    for c in pcol:
        H[c] = {}
    deltas = []
    nums = []
    for rows, cols in _square_components(prow, pcol):
        App = [[r.coeffs[c] for c in cols] for r in rows]
        d = determinant(App)
        deltas.append(d)
        for a, c in enumerate(cols):
            for f in free:
                M = [row[:a] + [neg(r.coeffs[f])] + row[a + 1:] for row, r in zip(App, rows)]
                nums.append((c, f, determinant(M), d))
    delta = mul(*deltas)
    if deltas and (delta == ZERO or any(zero_mask(deltas, relations.chart, trials, seed))):
        raise IndeterminateError("pivot determinant vanishes at the sample points")
    live = [x for x in nums if x[2] != ZERO]
    if live:
        mask = zero_mask([x[2] for x in live], relations.chart, trials, seed)
        live = [x for x, z in zip(live, mask) if not z]
    for c, f, num, d in live:
        H[c][f] = quotient(num, d)
    zero = tuple(c for c in pcol if not H[c])
    blocks = _components(free, H)
    return MetricAnsatz(relations.chart, unk, rank_info, tuple(free), H, blocks, zero, delta)


def _square_components(rows, cols):
    """Split the pivot block into structurally independent square pieces."""
    parent = {("r", i): ("r", i) for i in range(len(rows))}
    parent.update({("c", c): ("c", c) for c in cols})

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, r in enumerate(rows):
        for c in cols:
            if r.coeffs[c] != ZERO:
                a, b = find(("r", i)), find(("c", c))
                if a != b:
                    parent[max(a, b)] = min(a, b)
    groups = {}
    for i in range(len(rows)):
        groups.setdefault(find(("r", i)), ([], []))[0].append(rows[i])
    for c in cols:
        groups.setdefault(find(("c", c)), ([], []))[1].append(c)
    out = []
    for rs, cs in groups.values():
        if len(rs) != len(cs):
            raise IndeterminateError("pivot block is structurally singular")
        out.append((rs, cs))
    return sorted(out, key=lambda rc: rc[1])


def _components(free, H):
    parent = {f: f for f in free}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, row in H.items():
        fs = sorted(row)
        for a, b in zip(fs, fs[1:]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for f in sorted(free):
        groups.setdefault(find(f), []).append(f)
    blocks = []
    for root, fs in sorted(groups.items()):
        members = sorted(u for u, row in H.items() if row and find(next(iter(row))) == root
                         and u not in fs)
        blocks.append(tuple(fs) + tuple(members))
    return tuple(blocks)


def diagonal_ansatz(chart):
    """Every diagonal component free and every off-diagonal one zero."""
    unk = tuple((i, j) for i in range(chart.n) for j in range(i, chart.n))
    free = tuple(p for p, (i, j) in enumerate(unk) if i == j)
    zero = tuple(p for p, (i, j) in enumerate(unk) if i != j)
    H = {p: ({p: ONE} if p in free else {}) for p in range(len(unk))}
    info = RankInfo(len(zero), (), zero, free, (), (), 0)
    return MetricAnsatz(chart, unk, info, free, H, tuple((f,) for f in free), zero, ONE)


def choose_equations(relations, ids):
    """Relations restricted to user-chosen candidate numbers."""
    return relations.restricted(list(ids))
