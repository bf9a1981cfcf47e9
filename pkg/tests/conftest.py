from pathlib import Path

import pytest

from geoinverse.parse import parse_christoffel, parse_metric, parse_system

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def corpus_text(name):
    return (CORPUS / name).read_text(encoding="utf-8")


def load(name):
    """Parsed corpus file: a ChristoffelSet for .geo/.gam, a MetricTensor for .met."""
    text = corpus_text(name)
    if name.endswith(".geo"):
        return parse_system(text)[1]
    if name.endswith(".gam"):
        return parse_christoffel(text)[1]
    return parse_metric(text)[1]


def to_sympy(e):
    """Independent oracle view of an expression."""
    import sympy
    from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

    from geoinverse.expr import to_text
    names = {s.name: sympy.Symbol(s.name, real=True) for s in e.symbols}
    return parse_expr(to_text(e), local_dict=names,
                      transformations=standard_transformations + (convert_xor,))


@pytest.fixture
def sphere_gamma():
    return load("sphere.geo")


@pytest.fixture
def polar_gamma():
    return load("flat_polar.gam")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=str):
        terminalreporter.write_line(mod.RESULTS[key])
