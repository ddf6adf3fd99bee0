import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ibcfem.expressions import ExpressionError, parse_expression


@pytest.mark.parametrize(
    "text,x,y,expected",
    [
        ("1", 0.3, 0.7, 1.0),
        ("x", 0.3, 0.7, 0.3),
        ("-4*x*y + 2*x", 0.5, 0.25, -4 * 0.5 * 0.25 + 1.0),
        ("2/3*x*y^3 - x*y^2 + 5/6", 0.5, 0.5, 2 / 3 * 0.5 * 0.125 - 0.5 * 0.25 + 5 / 6),
        ("y^3 - y^2", 2.0, 2.0, 4.0),
        ("2^3^2", 0, 0, 512.0),
        ("-x^2", 3.0, 0.0, -9.0),
        ("sin(x)*cos(pi*y) + 1", 0.4, 0.3, math.sin(0.4) * math.cos(math.pi * 0.3) + 1),
        ("x**2", 1.5, 0, 2.25),
        ("(1 + 2/pi^2)", 0, 0, 1 + 2 / math.pi**2),
    ],
)
def test_examples(text, x, y, expected):
    assert float(parse_expression(text)(x, y)) == pytest.approx(expected, rel=1e-15, abs=1e-15)


def test_broadcasts_constants():
    f = parse_expression("2.5")
    out = f(np.zeros((3, 4)), np.zeros((3, 4)))
    assert out.shape == (3, 4) and np.all(out == 2.5)
    assert f.source == "2.5"


@pytest.mark.parametrize(
    "bad",
    ["", "   ", "z + 1", "exp(x)", "x +", "__import__('os')", "sin(x, y)", "x if y else 1", "[x]",
     "x.real", "1/(x-0.25)", "True", "'a'", "sin(x=1)", "lambda: 1", "x % 2"],
)
def test_rejections(bad):
    with pytest.raises(ExpressionError):
        parse_expression(bad)


def test_non_finite_at_evaluation():
    f = parse_expression("1/(x - 0.9)")
    with pytest.raises(ExpressionError):
        f(np.array([0.9]), np.array([0.0]))


# reference: the same tree rendered for math-module evaluation
leaf = st.one_of(
    st.sampled_from(["x", "y", "pi"]),
    st.floats(0.0, 10.0, allow_nan=False).map(lambda v: f"{v!r}"),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda c: f"(-{c})"),
        children.map(lambda c: f"({c})^2"),
    )


@given(expr=st.recursive(leaf, _extend, max_leaves=12), x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_matches_python_evaluation(expr, x, y):
    ref = eval(expr.replace("^", "**"), {"sin": math.sin, "cos": math.cos, "pi": math.pi, "x": x, "y": y})
    if not math.isfinite(ref) or abs(ref) > 1e100:
        return
    try:
        f = parse_expression(expr)
    except ExpressionError:
        return  # probe overflowed
    got = float(f(x, y))
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)
