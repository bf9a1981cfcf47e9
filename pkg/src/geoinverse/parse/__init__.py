"""Text formats for geodesic systems, Christoffel tables and metrics."""

from .exprparse import parse_expr
from .files import (
    FORMAT_VERSION, parse_christoffel, parse_metric, parse_system,
    render_christoffel, render_metric, render_system,
)

__all__ = [
    "FORMAT_VERSION", "parse_expr", "parse_system", "parse_christoffel", "parse_metric",
    "render_system", "render_christoffel", "render_metric",
]
