import numpy as np
import pytest

from mongehj.expressions import Constant, Expression, ExpressionError, Table, parse_function
from mongehj.graph import MetricGraph, sample_mesh


def test_constants_and_numeric_strings():
    assert isinstance(parse_function(2), Constant)
    assert parse_function("2.5")(np.array([0]), np.array([0.1]), 0.0) == pytest.approx(2.5)
    assert not parse_function(1.0).time_dependent


def test_expression_variables():
    g = MetricGraph.star([1.0, 2.0])
    f = parse_function("x * len + e + t", g)
    out = f(np.array([0, 1]), np.array([0.5, 0.5]), 0.25)
    assert out == pytest.approx([0.5 + 0 + 0.25, 1.0 + 1 + 0.25])
    assert f.time_dependent


def test_piecewise_and_helpers():
    f = parse_function("where(x < 0.5, min(x, 0.2), max(abs(x - 1), 0.1))")
    out = f(np.zeros(3, int), np.array([0.1, 0.4, 0.7]), 0.0)
    assert out == pytest.approx([0.1, 0.2, 0.3])
    assert not f.time_dependent


def test_per_edge_overrides():
    g = MetricGraph.star([1.0, 1.0])
    f = parse_function({"expr": "x", "edges": {"1": "2*x"}}, g)
    assert f(np.array([0, 1]), np.array([0.3, 0.3]), 0.0) == pytest.approx([0.3, 0.6])


@pytest.mark.parametrize("src", ["__import__('os')", "x.real", "foo(x)", "[x]", "x if", "lambda: 1"])
def test_rejected_expressions(src):
    with pytest.raises(ExpressionError):
        parse_function(src)


def test_table_interpolates_and_needs_mesh():
    g = MetricGraph.segment()
    m = sample_mesh(g, 0.5)
    vals = m.offset * 2
    f = parse_function({"table": vals.tolist()}, g, m)
    assert isinstance(f, Table)
    assert f(np.array([0]), np.array([0.25]), 0.0) == pytest.approx([0.5])
    with pytest.raises(ExpressionError):
        parse_function({"table": [1, 2, 3]})
    with pytest.raises(ExpressionError):
        parse_function({"table": [1, 2]}, g, m)


def test_spec_round_trip():
    f = Expression("sin(x) + t")
    g = parse_function(f.to_spec())
    x = np.linspace(0, 1, 5)
    assert g(np.zeros(5, int), x, 0.3) == pytest.approx(f(np.zeros(5, int), x, 0.3))


def test_uninterpretable_spec():
    with pytest.raises(ExpressionError):
        parse_function([1, 2])
    with pytest.raises(ExpressionError):
        parse_function(True)
