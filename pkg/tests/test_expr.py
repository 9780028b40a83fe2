import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finsler_lab import expr as E
from finsler_lab import jet as J
from finsler_lab.errors import ExprSyntaxError, JetDomainError, UnknownIdentifierError

VARS = ["x1", "x2", "y1", "y2"]


def p(text, allowed=VARS):
    return E.parse(text, allowed)


def test_norm_ast():
    y1, y2, two = E.Var("y1"), E.Var("y2"), E.Const(2.0)
    expected = E.Call("sqrt", (E.BinOp("+", E.BinOp("^", y1, two), E.BinOp("^", y2, two)),))
    assert p("sqrt(y1^2 + y2^2)") == expected


def test_trailing_operator_offset():
    with pytest.raises(ExprSyntaxError) as info:
        p("y1 + ")
    assert info.value.offset == 5


@pytest.mark.parametrize("text, offset", [("", 0), ("y1 * (y2", 8), ("y1 $ y2", 3), ("3 4", 2)])
def test_syntax_error_offsets(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        p(text)
    assert info.value.offset == offset


def test_unknown_names():
    with pytest.raises(UnknownIdentifierError) as info:
        p("y1 + z")
    assert info.value.offset == 5
    with pytest.raises(UnknownIdentifierError):
        p("tan(y1)")


def test_function_arity():
    with pytest.raises(ExprSyntaxError):
        p("sqrt(y1, y2)")
    with pytest.raises(ExprSyntaxError):
        p("pow(y1)")
    assert E.evaluate(p("pow(y1, 3)"), {"y1": 2.0}) == 8.0


@pytest.mark.parametrize("text, value", [
    ("-2^2", -4.0), ("2^-1", 0.5), ("2^3^2", 512.0), ("1 - 2 - 3", -4.0),
    ("8 / 4 / 2", 1.0), ("2 * pi", 2 * math.pi), ("+3", 3.0), ("1.5e1", 15.0),
])
def test_precedence_and_associativity(text, value):
    assert E.evaluate(p(text), {}) == pytest.approx(value)


def test_norm_value_and_gradient():
    ys = J.lift_point([3.0, 4.0])
    f = E.evaluate(p("sqrt(y1^2 + y2^2)"), {"y1": ys[0], "y2": ys[1]})
    assert f.value == pytest.approx(5.0)
    assert np.allclose(J.gradient(f), [0.6, 0.8])


def test_mixed_partial_of_product():
    us = J.lift_point([2.0, 3.0])
    f = E.evaluate(E.parse("u1*u2", ["u1", "u2"]), {"u1": us[0], "u2": us[1]})
    assert f.value == 6.0
    assert J.extract(f, (1, 1)) == 1.0
    assert J.extract(f, (2, 0)) == 0.0


def test_float_and_jet_paths_agree():
    e = p("exp(x1) * cos(y1) / (2 + sin(x2*y2)) - log(1 + y1^2)")
    vals = {"x1": 0.3, "x2": -0.7, "y1": 1.1, "y2": 0.4}
    jets = dict(zip(VARS, J.lift_point(list(vals.values()))))
    assert E.evaluate(e, jets).value == pytest.approx(E.evaluate(e, vals), rel=1e-14)


def test_jet_derivatives_match_finite_differences():
    e = p("sqrt(y1^2 + y2^2) + 0.3*y1")
    for y in ([1.0, 0.5], [-0.2, 2.0], [0.7, -0.7]):
        jets = J.lift_point(y)
        f = E.evaluate(e, {"y1": jets[0], "y2": jets[1]})
        h = 1e-5
        for i in range(2):
            yp, ym = list(y), list(y)
            yp[i] += h
            ym[i] -= h
            fd = (E.evaluate(e, dict(zip(["y1", "y2"], yp))) - E.evaluate(e, dict(zip(["y1", "y2"], ym)))) / (2 * h)
            assert J.gradient(f)[i] == pytest.approx(fd, rel=1e-7)


def test_domain_errors_carry_location():
    e = p("1 + sqrt(x1 - 5)")
    with pytest.raises(JetDomainError, match="offset 4"):
        E.evaluate(e, {"x1": 1.0})
    with pytest.raises(JetDomainError):
        E.evaluate(p("log(x1)"), {"x1": J.lift_variable(-1.0, 0, 1)})
    with pytest.raises(JetDomainError):
        E.evaluate(p("1 / x1"), {"x1": 0.0})


def test_unbound_variable():
    with pytest.raises(UnknownIdentifierError):
        E.evaluate(p("x1 + y1"), {"x1": 1.0})


def test_variables():
    assert E.variables(p("x1*sin(y2) + 3")) == {"x1", "y2"}


leaves = st.one_of(
    st.floats(0.0, 1e6, allow_nan=False).map(E.Const),
    st.sampled_from(VARS).map(E.Var),
)


def _extend(children):
    return st.one_of(
        children.map(E.Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: E.BinOp(*t)),
        st.tuples(st.sampled_from(["sqrt", "sin", "cos", "exp", "log"]), children)
          .map(lambda t: E.Call(t[0], (t[1],))),
        st.tuples(children, children).map(lambda t: E.Call("pow", t)),
    )


@given(st.recursive(leaves, _extend, max_leaves=12))
def test_print_parse_round_trip(tree):
    text = E.to_string(tree)
    assert p(text) == tree
    assert E.to_string(p(text)) == text
