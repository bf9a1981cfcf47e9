"""End-to-end classification and back-substitution of reconstructed metrics."""

import time
from dataclasses import dataclass, field

import numpy as np

from .ansatz import (
    build_relations, choose_equations, diagonal_ansatz, solve_metric_ratios, symbolic_rank,
)
from .errors import (
    ChartMismatchError, ConstantResolutionError, DomainError, IndeterminateError,
    InconsistentRelationsError, IntegrabilityError, PipelineError, SingularMetricError,
)
from .expr import PointEvaluator, add, neg, node_count, sample_points, zero_mask
from .geometry import (
    bianchi_violations, christoffel_from_metric, is_flat, riemann,
)
from .metricpde import (
    DEFAULT_STEPS, PointwiseMetric, build_pde_system, check_path_independence,
    consistent_initial_value, solve_symbolic,
)

VERDICTS = ("Flat", "Geodesic", "NotGeodesic", "Inconclusive")
FAILED_CHECKS = ("RelationsInconsistent", "IntegrabilityFailed", "PathDependence",
                 "BackSubstitutionFailed")
NUMERIC_TOL = 1e-6
PATH_TOL = 1e-6
PATH_TARGETS = 4
LARGE_CONNECTION = 1500     # total nodes above which symbolic stages are skipped


# ------------------------------------------------------------ verification

@dataclass(frozen=True)
class EntryResidual:
    index: tuple             # 0-based (i, j, k) with j <= k
    max_residual: float
    exact: object = None     # zero test verdict on the symbolic difference, if any

    def label(self):
        i, j, k = self.index
        return f"{i + 1},{j + 1},{k + 1}"


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    tol: float
    method: str              # "symbolic" or "numeric"
    max_residual: float
    entries: tuple
    points: tuple = field(repr=False)
    seed: int = 42
    worst: tuple = ()        # (entry label, point) of the largest residual


def _check_charts(metric_chart, gamma_chart):
    if tuple(metric_chart.names) != tuple(gamma_chart.names):
        raise ChartMismatchError(
            f"coordinate lists differ: {', '.join(metric_chart.names)} vs "
            f"{', '.join(gamma_chart.names)}")


def _residual_report(keys, rec, ref, pts, tol, method, seed, exact=None):
    """``|Γrec − Γ| / max(1, |Γ|)`` per entry, maximized over the points."""
    rel = np.abs(rec - ref) / np.maximum(1.0, np.abs(ref))
    per_entry = rel.max(axis=0)
    worst_entry = int(np.argmax(per_entry))
    worst_point = int(np.argmax(rel[:, worst_entry]))
    entries = tuple(
        EntryResidual(key, float(v), None if exact is None else exact[a])
        for a, (key, v) in enumerate(zip(keys, per_entry)))
    max_res = float(per_entry.max()) if len(per_entry) else 0.0
    worst = (entries[worst_entry].label(), tuple(float(x) for x in pts[worst_point]))
    return VerificationReport(bool(max_res < tol), tol, method, max_res, entries,
                              tuple(tuple(float(x) for x in p) for p in pts), seed, worst)


def verify_metric(g, gamma, points=20, seed=42, tol=1e-9, trials=12):
    """Recompute the connection of ``g`` and compare it with ``gamma``.

    ``g`` is a :class:`MetricTensor` (symbolic comparison plus numeric
    residuals) or a :class:`PointwiseMetric` (finite-difference connection).
    """
    _check_charts(g.chart, gamma.chart)
    chart = gamma.chart
    keys = sorted(gamma.table)
    if isinstance(g, PointwiseMetric):
        ref_eval = PointEvaluator([gamma.table[k] for k in keys], chart, seed)
        pts, ref = ref_eval.sample(points, seed)
        gs = g.many(pts)
        dets = np.abs(np.linalg.det(gs))
        if not np.all(dets > 1e-12 * np.max(np.abs(gs), axis=(1, 2)) ** chart.n):
            raise SingularMetricError("transported metric is singular at a sample point")
        G = g.christoffel(pts)
        rec = np.array([[G[m, i, j, k] for i, j, k in keys] for m in range(len(pts))])
        return _residual_report(keys, rec, ref, pts, tol, "numeric", seed)
    rec_set = christoffel_from_metric(g, seed)
    diffs = [add(rec_set.table[k], neg(gamma.table[k])) for k in keys]
    exact = zero_mask(diffs, chart, trials, seed)
    ev = PointEvaluator([rec_set.table[k] for k in keys] + [gamma.table[k] for k in keys],
                        chart, seed)
    pts, vals = ev.sample(points, seed)
    m = len(keys)
    return _residual_report(keys, vals[:, :m], vals[:, m:], pts, tol, "symbolic", seed, exact)


# ----------------------------------------------------------- classification

@dataclass(frozen=True)
class ClassifyOptions:
    seed: int = 42
    trials: int = 12
    tol: float = 1e-9
    numeric_tol: float = NUMERIC_TOL
    steps: int = DEFAULT_STEPS
    points: int = 20
    normalize_at: object = None
    choose_eqns: object = None
    exact: object = None     # None: decide from the size of the connection


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    seconds: float
    detail: str = ""


@dataclass(frozen=True, eq=False)
class Classification:
    """Exactly one verdict; ``evidence`` is present iff the verdict is NotGeodesic."""

    verdict: str
    metric: object = None            # MetricTensor, PointwiseMetric or None
    constants: tuple = ()            # names of the free constants
    failed_check: object = None
    evidence: object = None
    checks: tuple = ()
    seed: int = 42
    trials: int = 12
    method: object = None            # "symbolic" or "numeric" when a metric is present
    report: object = None            # VerificationReport of the returned metric
    message: str = ""
    normalization: dict = field(default_factory=dict)
    pivot_rows: tuple = ()


class _Run:
    """Collects timed check results while the pipeline advances."""

    def __init__(self):
        self.checks = []

    def timed(self, name, fn, detail=None):
        t0 = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:
            self.checks.append(CheckResult(name, False, time.perf_counter() - t0, str(exc)))
            raise
        d = detail(out) if detail else ""
        self.checks.append(CheckResult(name, True, time.perf_counter() - t0, d))
        return out

    def fail(self, name, seconds, detail):
        self.checks.append(CheckResult(name, False, seconds, detail))


def _relation_evidence(relations, info):
    A = PointEvaluator([c for r in relations.rows for c in r.coeffs], relations.chart,
                       info.seed)(info.point).reshape(len(relations.rows), -1)
    s = np.linalg.svd(A, compute_uv=False)
    return {"location": "relations", "rank": info.rank, "unknowns": A.shape[1],
            "min_singular_value": float(s[-1] / max(s[0], 1e-300))}


def _metric_constants(metric):
    return tuple(c.name for c in getattr(metric, "constants", ()))


def _not_geodesic(run, check, evidence, message, opts):
    return Classification("NotGeodesic", failed_check=check, evidence=evidence,
                          checks=tuple(run.checks), seed=opts.seed, trials=opts.trials,
                          message=message)


def _try_symbolic(ansatz, gamma, opts, run, label):
    """``(SymbolicSolution | None, PdeSystem)``; integrability errors propagate."""
    pde = run.timed(f"{label}pde", lambda: build_pde_system(ansatz, gamma, opts.seed,
                                                             opts.trials),
                    lambda p: "coupled" if p.coupled else f"{len(p.constraints)} constraints")
    if pde.coupled:
        return None, pde
    sol = run.timed(f"{label}quadrature",
                    lambda: solve_symbolic(pde, opts.seed, opts.trials, opts.normalize_at),
                    lambda s: "solved" if s is not None else "unsolved")
    return sol, pde


def _verify(run, metric, gamma, opts, tol):
    return run.timed("back_substitution",
                     lambda: verify_metric(metric, gamma, opts.points, opts.seed, tol,
                                           opts.trials),
                     lambda r: f"max residual {r.max_residual:.3e}")


def _flat(gamma, opts, run, exact=True):
    """Flat branch: diagonal symbolic metric if quadrature works, else pointwise."""
    sol = None
    if exact:
        try:
            sol, _ = _try_symbolic(diagonal_ansatz(gamma.chart), gamma, opts, run, "flat_")
        except (IntegrabilityError, ConstantResolutionError, DomainError):
            sol = None
    if sol is not None:
        report = _verify(run, sol.metric, gamma, opts, opts.tol)
        if report.passed:
            return Classification("Flat", sol.metric, _metric_constants(sol.metric),
                                  checks=tuple(run.checks), seed=opts.seed,
                                  trials=opts.trials, method="symbolic", report=report,
                                  normalization=sol.normalization)
    pm = PointwiseMetric(gamma, np.eye(gamma.n), steps=opts.steps, seed=opts.seed)
    report = _verify(run, pm, gamma, opts, opts.numeric_tol)
    return Classification("Flat", pm, checks=tuple(run.checks), seed=opts.seed,
                          trials=opts.trials, method="numeric", report=report,
                          message="flat; metric available pointwise")


def _numeric(gamma, relations, opts, run):
    chart = gamma.chart
    base = chart.center()
    t0 = time.perf_counter()
    g0, res = consistent_initial_value(gamma, relations, base, opts.seed, opts.steps)
    if g0 is None:
        run.fail("initial_value", time.perf_counter() - t0,
                 "no initial metric keeps the relations under transport")
        return None, {"location": "initial value", "residual": "transported relations",
                      "max_abs": float(res)}
    if abs(np.linalg.det(g0)) < 1e-12:
        run.fail("initial_value", time.perf_counter() - t0, "initial metric is singular")
        return None, {"location": "initial value", "residual": "det g0", "max_abs": 0.0}
    run.checks.append(CheckResult("initial_value", True, time.perf_counter() - t0, ""))
    t0 = time.perf_counter()
    worst, where = 0.0, None
    for p in _path_targets(chart, opts.seed):
        r = check_path_independence(gamma, base, g0, p, opts.seed, opts.steps)
        if r > worst:
            worst, where = r, p
    if worst > PATH_TOL:
        run.fail("path_independence", time.perf_counter() - t0, f"residual {worst:.3e}")
        return None, {"location": ",".join(f"{x:.6g}" for x in where),
                      "residual": "straight vs staircase transport", "max_abs": worst}
    run.checks.append(CheckResult("path_independence", True, time.perf_counter() - t0,
                                  f"residual {worst:.3e}"))
    return PointwiseMetric(gamma, g0, base, opts.steps, opts.seed), None


def _path_targets(chart, seed):
    return sample_points(chart, PATH_TARGETS, seed + 7)


def classify(gamma, options=None):
    """Run the pipeline and return a :class:`Classification`.

    Stages in order: riemann, bianchi (sanity), flatness, relations, ratios,
    metricity PDE, quadrature or transport, back-substitution. The first
    failing stage names the failed check.
    """
    opts = options or ClassifyOptions()
    run = _Run()
    try:
        return _classify(gamma, opts, run)
    except IndeterminateError as exc:
        return Classification("Inconclusive", checks=tuple(run.checks), seed=opts.seed,
                              trials=opts.trials, message=str(exc))


def _classify(gamma, opts, run):
    exact = opts.exact
    if exact is None:
        exact = sum(node_count(e) for _, e in gamma.items()) <= LARGE_CONNECTION
    R = run.timed("riemann", lambda: riemann(gamma, exact),
                  lambda _: "simplified" if exact else "unsimplified")
    bad = run.timed("bianchi", lambda: bianchi_violations(R, opts.seed, opts.trials),
                    lambda v: f"{len(v)} violations")
    if bad:
        raise PipelineError(
            f"first Bianchi identity fails at {[tuple(x + 1 for x in b) for b in bad]}; "
            "the connection should be symmetric")
    flat = run.timed("flatness", lambda: is_flat(R, opts.seed, opts.trials),
                     lambda f: "flat" if f else "curved")
    if flat:
        return _flat(gamma, opts, run, exact)
    relations = run.timed("relations", lambda: build_relations(R, opts.seed, opts.trials,
                                                               exact),
                          lambda r: f"{len(r.rows)} of {r.candidates} rows")
    if opts.choose_eqns:
        relations = choose_equations(relations, opts.choose_eqns)
    info = run.timed("rank", lambda: symbolic_rank(relations, opts.seed),
                     lambda i: f"rank {i.rank}")
    t0 = time.perf_counter()
    N = len(relations.unknowns)
    if info.rank >= N:
        msg = f"relations have full rank {info.rank}: only g = 0 satisfies them"
        run.fail("ratios", time.perf_counter() - t0, msg)
        return _not_geodesic(run, "RelationsInconsistent", _relation_evidence(relations, info),
                             msg, opts)
    if not exact:
        run.checks.append(CheckResult("ratios", True, time.perf_counter() - t0,
                                      f"{N - info.rank} free components (numeric)"))
        return _finish_numeric(gamma, relations, info, opts, run)
    try:
        ansatz = solve_metric_ratios(relations, info, opts.seed, opts.trials)
    except InconsistentRelationsError as exc:
        run.fail("ratios", time.perf_counter() - t0, str(exc))
        return _not_geodesic(run, "RelationsInconsistent", _relation_evidence(relations, info),
                             str(exc), opts)
    run.checks.append(CheckResult("ratios", True, time.perf_counter() - t0,
                                  f"{len(ansatz.free)} free components"))
    try:
        sol, pde = _try_symbolic(ansatz, gamma, opts, run, "")
    except (IntegrabilityError, ConstantResolutionError) as exc:
        return _not_geodesic(run, "IntegrabilityFailed", exc.evidence, str(exc), opts)
    if sol is not None:
        try:
            report = _verify(run, sol.metric, gamma, opts, opts.tol)
        except SingularMetricError as exc:
            return _not_geodesic(run, "BackSubstitutionFailed",
                                 {"location": "metric", "residual": "det g", "max_abs": 0.0},
                                 str(exc), opts)
        if not report.passed:
            return _not_geodesic(run, "BackSubstitutionFailed", _report_evidence(report),
                                 "reconstructed metric does not reproduce the connection",
                                 opts)
        return Classification("Geodesic", sol.metric, _metric_constants(sol.metric),
                              checks=tuple(run.checks), seed=opts.seed, trials=opts.trials,
                              method="symbolic", report=report,
                              normalization=sol.normalization, pivot_rows=info.pivot_rows)
    return _finish_numeric(gamma, relations, info, opts, run)


def _finish_numeric(gamma, relations, info, opts, run):
    pm, evidence = _numeric(gamma, relations, opts, run)
    if pm is None:
        return _not_geodesic(run, "PathDependence", evidence,
                             "transported metric depends on the path", opts)
    try:
        report = _verify(run, pm, gamma, opts, opts.numeric_tol)
    except SingularMetricError as exc:
        return _not_geodesic(run, "BackSubstitutionFailed",
                             {"location": "metric", "residual": "det g", "max_abs": 0.0},
                             str(exc), opts)
    if not report.passed:
        return _not_geodesic(run, "BackSubstitutionFailed", _report_evidence(report),
                             "transported metric does not reproduce the connection", opts)
    return Classification("Geodesic", pm, checks=tuple(run.checks), seed=opts.seed,
                          trials=opts.trials, method="numeric", report=report,
                          message="metric available pointwise", pivot_rows=info.pivot_rows)


def _report_evidence(report):
    label, point = report.worst
    return {"location": f"Gamma {label} at " + ",".join(f"{x:.6g}" for x in point),
            "residual": "relative connection residual", "max_abs": report.max_residual}
