from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singsurf.polynomial import Polynomial, PolynomialParseError, gradient, parse_polynomial

XYZ = ("x", "y", "z")


def test_parse_reads_terms():
    p = parse_polynomial("x^2+y^2-z^2")
    assert p.terms == {(2, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): -1}


def test_parse_zero_is_empty():
    assert parse_polynomial("0").terms == {}
    assert parse_polynomial("x - x").is_zero()


def test_square_of_sum():
    p = parse_polynomial("(x+y)^2", ("x", "y"))
    assert p(1, 2) == 9
    assert p == parse_polynomial("x^2 + 2*x*y + y^2", ("x", "y"))


def test_rational_literals_and_division():
    p = parse_polynomial("x/3 + 0.25*y + 2x", ("x", "y"))
    assert p.terms == {(1, 0): Fraction(7, 3), (0, 1): Fraction(1, 4)}


@pytest.mark.parametrize(
    "text, position, fragment",
    [
        ("x^2 + w", 6, "unknown variable"),
        ("x^-2", 3, "negative exponent"),
        ("x^(1/2)", 4, "fractional exponent"),
        ("x^1.5", 2, "fractional exponent"),
        ("x + * y", 4, "unexpected"),
        ("(x + y", 6, "expected ')'"),
        ("x $ y", 2, "unexpected character"),
        ("x / y", 2, "non-constant"),
    ],
)
def test_parse_errors_carry_position(text, position, fragment):
    with pytest.raises(PolynomialParseError) as info:
        parse_polynomial(text)
    assert info.value.position == position
    assert fragment in str(info.value)


def test_gradient_examples():
    cone = parse_polynomial("x^2+y^2-z^2")
    assert gradient(cone, (1, 0, 1)) == (2, 0, -2)
    assert gradient(parse_polynomial("5"), (3, -1, 7)) == (0, 0, 0)
    assert gradient(parse_polynomial("x^2+y^2-z^4"), (0, 0, 0)) == (0, 0, 0)
    with pytest.raises(ValueError):
        gradient(cone, (1, 2))


def test_float_evaluation_matches_exact():
    p = parse_polynomial("3x^2 y - z^5 + 1/7")
    pts = np.array([[0.5, -1.25, 2.0], [1.0, 1.0, 1.0]])
    exact = [float(p.evaluate([Fraction(v) for v in row])) for row in pts]
    assert np.allclose(p.eval_float(pts), exact, rtol=1e-15)


def test_compose_is_substitution():
    p = parse_polynomial("x^2 - y^3", ("x", "y"))
    x = Polynomial.variable(("x", "y"), "x")
    y = Polynomial.variable(("x", "y"), "y")
    assert p.compose([x, x * y]) == parse_polynomial("x^2 - x^3 y^3", ("x", "y"))


small_ints = st.integers(min_value=-5, max_value=5)
monomials = st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
polys = st.dictionaries(monomials, small_ints.filter(bool), max_size=6).map(lambda t: Polynomial(XYZ, t))


@given(polys)
@settings(max_examples=200, deadline=None)
def test_print_parse_roundtrip(p):
    q = parse_polynomial(p.to_string())
    assert q.terms == p.terms
    assert parse_polynomial(q.to_string()).terms == q.terms


@given(polys, st.tuples(small_ints, small_ints, small_ints))
@settings(max_examples=100, deadline=None)
def test_no_zero_coefficients_and_exact_eval(p, pt):
    assert all(c != 0 for c in p.terms.values())
    direct = sum(c * pt[0] ** e[0] * pt[1] ** e[1] * pt[2] ** e[2] for e, c in p.terms.items())
    assert p.evaluate(pt) == direct


@given(polys, polys, st.tuples(small_ints, small_ints, small_ints))
@settings(max_examples=100, deadline=None)
def test_product_rule(p, q, pt):
    lhs = (p * q).derivative(0).evaluate(pt)
    rhs = p.derivative(0).evaluate(pt) * q.evaluate(pt) + p.evaluate(pt) * q.derivative(0).evaluate(pt)
    assert lhs == rhs
