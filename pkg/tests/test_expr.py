import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ma_radial import expr
from ma_radial.expr import ExpressionSyntaxError, evaluate, parse, to_text


@pytest.mark.parametrize(
    "text, x, expected",
    [
        ("x^2", 2.0, 4.0),
        ("x^2/(1+x^2)", 1.0, 0.5),
        ("2^3^2", 0.0, 512.0),
        ("-x^2", 3.0, -9.0),
        ("1 - 2 - 3", 0.0, -4.0),
        ("8 / 4 / 2", 0.0, 1.0),
        ("exp(log(x))", 5.0, 5.0),
        ("sqrt(x) * 2", 9.0, 6.0),
        ("1.5e1 + .5", 0.0, 15.5),
        ("x^-1", 4.0, 0.25),
    ],
)
def test_evaluate(text, x, expected):
    assert evaluate(parse(text), x) == pytest.approx(expected, rel=1e-14)


def test_vectorized():
    x = np.linspace(0.0, 3.0, 7)
    np.testing.assert_allclose(evaluate(parse("x*x + 1"), x), x * x + 1)
    np.testing.assert_allclose(evaluate(parse("3"), x), np.full_like(x, 3.0))


@pytest.mark.parametrize(
    "text, offset",
    [("x^^2", 2), ("x +", 3), ("(x", 2), ("x $ 1", 2), ("foo(x)", 0), ("x 2", 2), ("exp x", 4), ("", 0)],
)
def test_syntax_errors_carry_offset(text, offset):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset


def test_unknown_identifier_message():
    with pytest.raises(ExpressionSyntaxError, match="unknown identifier 'y'"):
        parse("x + y")


# -- round trip ----------------------------------------------------------------

_leaf = st.one_of(
    st.just(expr.Var()),
    st.floats(min_value=0.1, max_value=5.0, allow_nan=False).map(expr.Num),
)


def _extend(children):
    return st.one_of(
        st.builds(expr.Binary, st.sampled_from("+-*/"), children, children),
        st.builds(expr.Unary, st.just("-"), children),
        st.builds(lambda a: expr.Call("sqrt", expr.Binary("*", a, a)), children),
        st.builds(lambda a: expr.Binary("^", a, expr.Num(2.0)), children),
    )


trees = st.recursive(_leaf, _extend, max_leaves=8)


@settings(max_examples=150, deadline=None)
@given(trees)
def test_print_then_parse_round_trip(tree):
    again = parse(to_text(tree))
    x = np.random.default_rng(0).uniform(0.1, 4.0, size=100)
    with np.errstate(all="ignore"):
        a = evaluate(tree, x)
        b = evaluate(again, x)
    ok = np.isfinite(a)
    np.testing.assert_array_equal(np.isfinite(b), ok)
    np.testing.assert_allclose(b[ok], a[ok], rtol=1e-12, atol=0)
