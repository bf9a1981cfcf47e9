"""Reconstruct a metric from its geodesic equations, or show that none exists."""

from .ansatz import build_relations, solve_metric_ratios, symbolic_rank
from .errors import (
    ChartMismatchError, GeoInverseError, IndeterminateError, IntegrabilityError, ParseError,
    SingularMetricError,
)
from .geometry import (
    ChristoffelSet, MetricTensor, RiemannTensor, bianchi_check, christoffel_from_metric,
    is_flat, riemann,
)
from .metricpde import (
    build_pde_system, check_path_independence, solve_symbolic, transport_numeric,
)
from .parse import parse_christoffel, parse_metric, parse_system
from .verify import Classification, ClassifyOptions, classify, verify_metric

__version__ = "0.1.0"

__all__ = [
    "ChristoffelSet", "MetricTensor", "RiemannTensor", "Classification", "ClassifyOptions",
    "GeoInverseError", "ParseError", "IndeterminateError", "IntegrabilityError",
    "SingularMetricError", "ChartMismatchError",
    "parse_system", "parse_christoffel", "parse_metric",
    "christoffel_from_metric", "riemann", "is_flat", "bianchi_check",
    "build_relations", "symbolic_rank", "solve_metric_ratios",
    "build_pde_system", "solve_symbolic", "transport_numeric", "check_path_independence",
    "classify", "verify_metric",
]
