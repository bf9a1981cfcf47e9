import numpy as np
import pytest

from conftest import load, to_sympy
from geoinverse.errors import SingularMetricError
from geoinverse.expr import ZERO, add, coord, fn, is_zero, mul, power, sample_points, sub, zero_mask
from geoinverse.geometry import (
    MetricTensor, bianchi_check, bianchi_violations, christoffel_from_metric, inverse_metric,
    is_flat, lower_riemann, riemann,
)

METRICS = ["sphere.met", "flat_polar.met", "three_sphere.met", "schwarzschild.met", "rn.met"]


def identity_residuals(metric, exact=True, seed=42, trials=12):
    """Zero-test verdicts for skew symmetry, pair exchange and the first Bianchi identity."""
    gamma = christoffel_from_metric(metric, seed, exact)
    R = riemann(gamma, exact)
    low = lower_riemann(R, metric)
    n = metric.n
    idx = [(i, j, k, l) for i in range(n) for j in range(n) for k in range(n) for l in range(n)]
    skew = [add(low[i, j, k, l], low[j, i, k, l]) for i, j, k, l in idx if i < j or (i == j)]
    exch = [sub(low[i, j, k, l], low[k, l, i, j]) for i, j, k, l in idx if (i, j) < (k, l)]
    bian = [add(low[i, j, k, l], low[i, k, l, j], low[i, l, j, k]) for i, j, k, l in idx
            if j < k < l]
    return {name: zero_mask(exprs, metric.chart, trials=trials, seed=seed)
            for name, exprs in (("skew", skew), ("exchange", exch), ("bianchi", bian))}


@pytest.mark.parametrize("name, exact", [(m, True) for m in METRICS] + [("kerr.met", False)])
def test_lowered_riemann_identities(name, exact):
    for family, mask in identity_residuals(load(name), exact=exact).items():
        assert all(mask), family


def test_sphere_riemann_sign():
    R = riemann(load("sphere.geo"))
    theta = coord("theta")
    assert R[0, 1, 0, 1] == power(fn("sin", theta), 2)
    assert R[1, 0, 0, 1] == mul(-1, R[1, 0, 1, 0])
    assert R[0, 0, 0, 1] == ZERO


def test_riemann_skew_is_structural(sphere_gamma):
    R = riemann(sphere_gamma)
    for i in range(2):
        for j in range(2):
            assert R[i, j, 0, 0] == ZERO
            assert R[i, j, 1, 0] == mul(-1, R[i, j, 0, 1])


def test_flat_cases(polar_gamma):
    assert is_flat(riemann(polar_gamma))
    assert is_flat(riemann(load("flat3d.gam")))
    assert not is_flat(riemann(load("sphere.geo")))


@pytest.mark.parametrize("name", ["sphere.met", "schwarzschild.met", "three_sphere.met"])
def test_christoffel_matches_sympy(name):
    sympy = pytest.importorskip("sympy")
    g = load(name)
    n = g.n
    xs = [sympy.Symbol(s, real=True) for s in g.chart.names]
    G = sympy.Matrix(n, n, lambda i, j: to_sympy(g[i, j]))
    Ginv = G.inv()
    gamma = christoffel_from_metric(g)
    f = sympy.lambdify(xs, [sympy.Rational(1, 2) * sum(
        Ginv[i, m] * (sympy.diff(G[j, m], xs[k]) + sympy.diff(G[k, m], xs[j])
                      - sympy.diff(G[j, k], xs[m])) for m in range(n)) - to_sympy(e)
        for (i, j, k), e in gamma.items()])
    for p in sample_points(g.chart, 5, 3):
        assert np.max(np.abs(f(*p))) < 1e-10


@pytest.mark.parametrize("name", ["sphere.met", "three_sphere.met", "rn.met"])
def test_connection_is_scale_invariant(name):
    g = load(name)
    a = christoffel_from_metric(g)
    b = christoffel_from_metric(g.scaled(7))
    assert all(is_zero(sub(a.table[k], b.table[k]), g.chart) for k in a.table)


def test_riemann_matches_sympy_for_three_sphere():
    sympy = pytest.importorskip("sympy")
    gamma = load("three_sphere.gam")
    xs = [sympy.Symbol(s, real=True) for s in gamma.chart.names]
    n = gamma.n
    Gs = {(i, j, k): to_sympy(gamma[i, j, k]) for i in range(n) for j in range(n) for k in range(n)}
    R = riemann(gamma)
    exprs = []
    for (i, j, k, l), e in R.items():
        ref = (sympy.diff(Gs[i, j, l], xs[k]) - sympy.diff(Gs[i, j, k], xs[l])
               + sum(Gs[i, m, k] * Gs[m, j, l] - Gs[i, m, l] * Gs[m, j, k] for m in range(n)))
        exprs.append(ref - to_sympy(e))
    f = sympy.lambdify(xs, exprs)
    for p in sample_points(gamma.chart, 5, 9):
        assert np.max(np.abs(f(*p))) < 1e-10


def test_bianchi_holds_for_symmetric_connections():
    for name in ["sphere.geo", "perturbed_sphere.gam", "cyclic_nonmetric.gam", "three_sphere.gam"]:
        assert bianchi_check(riemann(load(name)))


def test_bianchi_violation_detected():
    R = riemann(load("three_sphere.gam"))
    bad = R.replace((0, 1, 0, 2), add(R[0, 1, 0, 2], 1))
    assert bianchi_violations(bad) == [(0, 0, 1, 2)]


def test_inverse_metric_requires_invertibility():
    g = load("sphere.met")
    singular = MetricTensor.from_entries(g.chart, {(0, 0): 1})
    with pytest.raises(SingularMetricError):
        inverse_metric(singular)
    inv = inverse_metric(g)
    assert is_zero(sub(mul(inv[1][1], g[1, 1]), 1), g.chart)


def fd_christoffel(metric, p, h=1e-4):
    """Connection from fourth-order central differences of the metric values."""
    ev = metric.evaluator()
    n = metric.n
    dg = np.empty((n, n, n))
    for k in range(n):
        def at(o):
            q = np.array(p, float)
            q[k] += o * h
            return ev(q)
        dg[k] = (at(-2) - 8 * at(-1) + 8 * at(1) - at(2)) / (12 * h)
    first = 0.5 * (np.einsum("kjl->jlk", dg) + np.einsum("jkl->jlk", dg) - np.einsum("ljk->jlk", dg))
    return np.einsum("il,jlk->ijk", np.linalg.inv(ev(p)), first)


@pytest.mark.parametrize("name", ["kerr.met", "rn.met"])
def test_unsimplified_connection_matches_finite_differences(name):
    g = load(name)
    G = christoffel_from_metric(g, exact=False).numeric()
    for p in sample_points(g.chart, 5, 5):
        ref = fd_christoffel(g, p)
        assert np.max(np.abs(G(p) - ref)) < 1e-8 * max(1.0, np.max(np.abs(ref)))
