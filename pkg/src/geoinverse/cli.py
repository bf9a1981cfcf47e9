"""Command-line front end: ``geoinverse {reconstruct,check,verify,flatness}``.

Exit codes: 0 Geodesic or Flat (verify: pass), 2 NotGeodesic (verify: fail,
flatness: curved), 3 Inconclusive, 1 usage, parse or internal errors.
"""

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from .errors import ChartMismatchError, GeoInverseError, IndeterminateError, ParseError
from .expr import to_text
from .geometry import is_flat, riemann
from .metricpde import DEFAULT_STEPS, PointwiseMetric
from .parse import parse_christoffel, parse_metric, parse_system, render_metric
from .verify import ClassifyOptions, classify, verify_metric

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_NOT_GEODESIC, EXIT_INCONCLUSIVE = 0, 1, 2, 3
_VERDICT_EXIT = {"Geodesic": EXIT_OK, "Flat": EXIT_OK, "NotGeodesic": EXIT_NOT_GEODESIC,
                 "Inconclusive": EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


def load_schema():
    """The JSON schema every ``--format json`` report validates against."""
    text = resources.files("geoinverse").joinpath("schema/report.schema.json").read_text("utf-8")
    return json.loads(text)


# ------------------------------------------------------------------ inputs

def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load_connection(path):
    """``(chart, ChristoffelSet)`` from a ``.geo`` or ``.gam`` file."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".geo":
        return parse_system(_read(path))
    if ext == ".gam":
        return parse_christoffel(_read(path))
    raise UsageError(f"{path}: expected a .geo or .gam file")


def load_metric(path, seed):
    if os.path.splitext(path)[1].lower() != ".met":
        raise UsageError(f"{path}: expected a .met file")
    return parse_metric(_read(path), seed)


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text):
    v = int(text)
    if not -2 ** 63 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("must fit in 64 bits")
    return v


def _id_list(text):
    try:
        ids = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated relation numbers") from None
    if not ids or min(ids) < 1:
        raise argparse.ArgumentTypeError("relation numbers start at 1")
    return ids


def _normalize_point(text, chart):
    """``at=1.2,0.5`` or ``theta=1.2,phi=0.5`` -> coordinate array."""
    body = text[3:] if text.startswith("at=") else text
    parts = [p.strip() for p in body.split(",") if p.strip()]
    if parts and all("=" in p for p in parts):
        values = {}
        for p in parts:
            name, _, v = p.partition("=")
            values[name.strip()] = v
        missing = [n for n in chart.names if n not in values]
        unknown = [n for n in values if n not in chart.names]
        if missing or unknown:
            raise UsageError(f"--normalize must name every coordinate of {', '.join(chart.names)}")
        parts = [values[n] for n in chart.names]
    if len(parts) != chart.n:
        raise UsageError(f"--normalize needs {chart.n} coordinates")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise UsageError(f"--normalize: cannot read {text!r}") from None


# ----------------------------------------------------------------- reports

def _checks(classification, timings):
    out = []
    for c in classification.checks:
        item = {"name": c.name, "passed": c.passed, "detail": c.detail}
        if timings:
            item["seconds"] = round(c.seconds, 6)
        out.append(item)
    return out


def _verification(report):
    if report is None:
        return None
    return {
        "method": report.method,
        "tol": report.tol,
        "passed": report.passed,
        "max_residual": report.max_residual,
        "points": len(report.points),
        "entries": [{"gamma": e.label(), "max_residual": e.max_residual, "exact": e.exact}
                    for e in report.entries],
    }


def _metric_json(metric):
    if metric is None:
        return None, None
    if isinstance(metric, PointwiseMetric):
        return None, {"base": [float(x) for x in metric.base],
                      "g0": [[float(x) for x in row] for row in metric.g0],
                      "steps": metric.steps}
    return {f"{i + 1},{j + 1}": to_text(e) for (i, j), e in metric.items() if e != 0}, None


def classification_report(command, path, chart, classification, opts, timings):
    g, pointwise = _metric_json(classification.metric)
    report = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "input": path,
        "seed": classification.seed,
        "trials": classification.trials,
        "tol": opts.tol,
        "coords": list(chart.names),
        "verdict": classification.verdict,
        "failed_check": classification.failed_check,
        "evidence": classification.evidence,
        "message": classification.message,
        "method": classification.method,
        "checks": _checks(classification, timings),
        "verification": _verification(classification.report),
    }
    if command == "reconstruct":
        report["g"] = g
        report["pointwise"] = pointwise
        report["free_constants"] = list(classification.constants)
        report["normalization"] = {k: float(v)
                                   for k, v in sorted(classification.normalization.items())}
        report["pivot_relations"] = list(classification.pivot_rows)
    return report


def _fmt(v):
    return f"{v:.3e}" if isinstance(v, float) else str(v)


def text_report(report):
    lines = []
    head = f"{report['command']}: {report.get('input', '')}"
    lines.append(head)
    if "verdict" in report:
        lines.append(f"verdict: {report['verdict']}")
    if report.get("failed_check"):
        lines.append(f"failed check: {report['failed_check']}")
    if report.get("message"):
        lines.append(f"message: {report['message']}")
    ev = report.get("evidence")
    if ev:
        lines.append("evidence: " + ", ".join(f"{k}={_fmt(v)}" for k, v in ev.items()))
    if report.get("g"):
        lines.append("metric:")
        for k, e in report["g"].items():
            lines.append(f"  g {k} = {e}")
        if report.get("free_constants"):
            lines.append("free constants: " + ", ".join(report["free_constants"]))
    if report.get("pointwise"):
        pw = report["pointwise"]
        lines.append("metric available pointwise by transport from "
                     + ", ".join(f"{x:.6g}" for x in pw["base"]))
    if "flat" in report:
        lines.append(f"flat: {report['flat']}")
    for c in report.get("checks", []):
        t = f" ({c['seconds']:.3f}s)" if "seconds" in c else ""
        mark = "pass" if c["passed"] else "FAIL"
        lines.append(f"  [{mark}] {c['name']}{t} {c['detail']}".rstrip())
    ver = report.get("verification")
    if ver:
        lines.append(f"back-substitution ({ver['method']}): max residual "
                     f"{ver['max_residual']:.3e}, tol {ver['tol']:.1e}, "
                     + ("pass" if ver["passed"] else "fail"))
        if report["command"] == "verify":
            for e in ver["entries"]:
                lines.append(f"  gamma {e['gamma']}: {e['max_residual']:.3e}")
    lines.append(f"seed {report['seed']}, trials {report['trials']}")
    return "\n".join(lines) + "\n"


def emit(report, args):
    if args.format == "json":
        text = json.dumps(report, indent=2, sort_keys=False) + "\n"
    else:
        text = text_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def _options(args, chart):
    point = _normalize_point(args.normalize, chart) if args.normalize else None
    return ClassifyOptions(seed=args.seed, trials=args.trials, tol=args.tol, steps=args.steps,
                           normalize_at=point, choose_eqns=args.choose_eqns)


def cmd_reconstruct(args):
    chart, gamma = load_connection(args.input)
    opts = _options(args, chart)
    c = classify(gamma, opts)
    report = classification_report("reconstruct", args.input, chart, c, opts, args.timings)
    if args.metric_out and c.metric is not None and not isinstance(c.metric, PointwiseMetric):
        with open(args.metric_out, "w", encoding="utf-8") as fh:
            fh.write(render_metric(c.metric))
    emit(report, args)
    return _VERDICT_EXIT[c.verdict]


def cmd_check(args):
    chart, gamma = load_connection(args.input)
    opts = _options(args, chart)
    c = classify(gamma, opts)
    emit(classification_report("check", args.input, chart, c, opts, args.timings), args)
    return _VERDICT_EXIT[c.verdict]


def cmd_verify(args):
    chart_g, metric = load_metric(args.metric, args.seed)
    chart, gamma = load_connection(args.input)
    if tuple(chart_g.names) != tuple(chart.names):
        raise ChartMismatchError(f"coordinate lists differ: {', '.join(chart_g.names)} "
                                 f"vs {', '.join(chart.names)}")
    rep = verify_metric(metric, gamma, args.points, args.seed, args.tol, args.trials)
    report = {
        "schema": SCHEMA_VERSION,
        "command": "verify",
        "input": args.input,
        "metric": args.metric,
        "seed": args.seed,
        "trials": args.trials,
        "tol": args.tol,
        "coords": list(chart.names),
        "passed": rep.passed,
        "worst": {"gamma": rep.worst[0], "point": list(rep.worst[1])},
        "verification": _verification(rep),
    }
    emit(report, args)
    return EXIT_OK if rep.passed else EXIT_NOT_GEODESIC


def cmd_flatness(args):
    chart, gamma = load_connection(args.input)
    R = riemann(gamma)
    entries = [(k, e) for k, e in R.items()]
    flat = is_flat(R, args.seed, args.trials)
    report = {
        "schema": SCHEMA_VERSION,
        "command": "flatness",
        "input": args.input,
        "seed": args.seed,
        "trials": args.trials,
        "coords": list(chart.names),
        "flat": flat,
        "riemann": {f"{i + 1},{j + 1},{k + 1},{l + 1}": to_text(e)
                    for (i, j, k, l), e in entries if e != 0},
    }
    emit(report, args)
    return EXIT_OK if flat else EXIT_NOT_GEODESIC


# -------------------------------------------------------------------- main

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=42, help="seed for all sampling (default 42)")
    common.add_argument("--trials", type=_positive_int, default=12,
                        help="zero-test sample count (default 12)")
    common.add_argument("--tol", type=_positive_float, default=1e-9,
                        help="back-substitution tolerance (default 1e-9)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--timings", action="store_true",
                        help="include per-check timings (makes output run-dependent)")
    pipeline = argparse.ArgumentParser(add_help=False)
    pipeline.add_argument("--steps", type=_positive_int, default=DEFAULT_STEPS,
                          help="transport steps per unit coordinate length")
    pipeline.add_argument("--normalize", metavar="at=X1,X2,...",
                          help="point at which each named constant makes its block equal 1")
    pipeline.add_argument("--choose-eqns", type=_id_list, metavar="N,N,...",
                          help="restrict the curvature relations to these numbers")

    parser = argparse.ArgumentParser(
        prog="geoinverse",
        description="Reconstruct a metric from geodesic equations or Christoffel symbols.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("reconstruct", parents=[common, pipeline],
                       help="classify and emit the metric")
    p.add_argument("input", help=".geo or .gam file")
    p.add_argument("--metric-out", help="also write the symbolic metric as a .met file")
    p.set_defaults(func=cmd_reconstruct)
    p = sub.add_parser("check", parents=[common, pipeline], help="classify only")
    p.add_argument("input", help=".geo or .gam file")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("verify", parents=[common],
                       help="back-substitute a metric into a system")
    p.add_argument("metric", help=".met file")
    p.add_argument("input", help=".geo or .gam file")
    p.add_argument("--points", type=_positive_int, default=20, help="sample points (default 20)")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("flatness", parents=[common], help="test whether the curvature vanishes")
    p.add_argument("input", help=".geo or .gam file")
    p.set_defaults(func=cmd_flatness)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    where = getattr(args, "input", "")
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"geoinverse: {where}: {exc}\n")
    except UsageError as exc:
        sys.stderr.write(f"geoinverse: {exc}\n")
    except ChartMismatchError as exc:
        sys.stderr.write(f"geoinverse: chart mismatch: {exc}\n")
    except IndeterminateError as exc:
        sys.stderr.write(f"geoinverse: inconclusive: {exc}\n")
        return EXIT_INCONCLUSIVE
    except GeoInverseError as exc:
        sys.stderr.write(f"geoinverse: {type(exc).__name__}: {exc}\n")
    except OSError as exc:
        sys.stderr.write(f"geoinverse: {exc}\n")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
