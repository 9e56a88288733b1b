"""Parser, printer and jet evaluation of seed expressions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scforge import expr as ex
from scforge.errors import DomainError, ExprSyntaxError, UnknownIdentifier

# the parser only produces non-negative literals: "-2" is Neg(Num(2.0))
leaves = st.one_of(
    st.sampled_from(["u", "v", "pi", "e"]).map(ex.Var),
    st.floats(min_value=0, max_value=5, allow_nan=False, width=64).map(lambda x: ex.Num(abs(x))),
)


def _extend(children):
    return st.one_of(
        children.map(ex.Neg),
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: ex.BinOp(*t)),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda t: ex.Call(*t)),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


class TestRoundTrip:
    """Printing is fully parenthesized, so print/parse returns the same tree."""

    @settings(max_examples=200, deadline=None)
    @given(trees)
    def test_print_parse_identity(self, tree):
        assert ex.parse(ex.to_string(tree)) == tree

    @settings(max_examples=100, deadline=None)
    @given(trees)
    def test_printing_is_idempotent(self, tree):
        text = ex.to_string(tree)
        assert ex.to_string(ex.parse(text)) == text


class TestJets:
    """Jet derivatives agree with central differences."""

    @settings(max_examples=60, deadline=None)
    @given(trees, st.floats(0.1, 0.9), st.floats(0.1, 0.9))
    def test_first_and_second_derivatives(self, tree, u, v):
        jt = ex.eval_jet(tree, u, v)
        f = lambda a, b: float(ex.evaluate(tree, a, b))
        h = 1e-4
        scale = 1.0 + max(abs(float(p)) for p in jt.parts())
        fd = {
            "du": (f(u + h, v) - f(u - h, v)) / (2 * h),
            "dv": (f(u, v + h) - f(u, v - h)) / (2 * h),
            "duu": (f(u + h, v) - 2 * f(u, v) + f(u - h, v)) / h**2,
            "dvv": (f(u, v + h) - 2 * f(u, v) + f(u, v - h)) / h**2,
            "duv": (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4 * h * h),
        }
        for name, approx in fd.items():
            assert abs(float(getattr(jt, name)) - approx) <= 1e-4 * scale, name

    def test_known_derivatives(self):
        jt = ex.eval_jet("exp(3*u + v/3)", 0.2, 0.7)
        val = math.exp(0.6 + 0.7 / 3)
        assert jt.val == pytest.approx(val, rel=1e-15)
        assert jt.du == pytest.approx(3 * val, rel=1e-15)
        assert jt.dv == pytest.approx(val / 3, rel=1e-15)
        assert jt.duv == pytest.approx(val, rel=1e-14)
        assert jt.duu == pytest.approx(9 * val, rel=1e-14)

    def test_arrays_broadcast(self):
        u = np.linspace(0, 1, 5)
        jt = ex.eval_jet("sin(u)*v", u[:, None], np.linspace(1, 2, 3)[None, :])
        assert jt.val.shape == (5, 3)
        np.testing.assert_allclose(jt.du, np.cos(u)[:, None] * np.linspace(1, 2, 3)[None, :])

    def test_variable_power(self):
        jt = ex.eval_jet("u^v", 2.0, 3.0)
        assert jt.val == pytest.approx(8.0)
        assert jt.dv == pytest.approx(8.0 * math.log(2.0))

    def test_domain_error(self):
        with pytest.raises(DomainError):
            ex.eval_jet("log(u - 1)", 0.5, 0.0)
        with pytest.raises(DomainError):
            ex.eval_jet("1/(u - v)", 0.5, 0.5)


class TestGrammar:
    """Precedence, associativity and error reporting."""

    @pytest.mark.parametrize("text, value", [
        ("-u^2", -4.0),
        ("2^3^2", 512.0),
        ("1 - 2 - 3", -4.0),
        ("8/4/2", 1.0),
        ("+u", 2.0),
        ("2*pi", 2 * math.pi),
        ("e", math.e),
        ("1.5e1", 15.0),
    ])
    def test_values(self, text, value):
        assert float(ex.evaluate(ex.parse(text), 2.0, 0.0)) == pytest.approx(value)

    @pytest.mark.parametrize("text, position", [("2u", 1), ("u +", 3), ("(u", 2), ("u)", 1), ("", 0)])
    def test_syntax_error_position(self, text, position):
        with pytest.raises(ExprSyntaxError) as info:
            ex.parse(text)
        assert info.value.position == position

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifier) as info:
            ex.parse("u + tan(v)")
        assert info.value.name == "tan"
        assert info.value.position == 4

    def test_constant_detection(self):
        assert ex.parse("2*pi + 1").is_constant()
        assert not ex.parse("sin(v)").is_constant()
        assert ex.parse("u*v + 1").variables() == frozenset({"u", "v"})
