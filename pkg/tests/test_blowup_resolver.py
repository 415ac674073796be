import random
from fractions import Fraction
from importlib import resources

import pytest

from singsurf.blowup_resolver import (
    ResolutionError,
    blowup_point,
    link_alpha,
    monomialize,
    predict_alpha,
    resolve_surface_germ,
    verify_consistency,
)
from singsurf.polynomial import parse_polynomial
from singsurf.surface_model import catalog_get, catalog_names


def P(expr):
    return parse_polynomial(expr, ("x", "y"))


def rational_samples(n=5, seed=7):
    rng = random.Random(seed)
    return [(Fraction(rng.randint(-9, 9), rng.randint(1, 7)), Fraction(rng.randint(-9, 9), rng.randint(1, 7)))
            for _ in range(n)]


def test_blowup_point_examples():
    c0, c1 = blowup_point(P("x^2+y^2"))
    assert c0 == P("x^2*(1+y^2)")
    assert c1 == P("y^2*(x^2+1)")
    assert blowup_point(P("x*y"))[0] == P("x^2*y")
    assert blowup_point(P("x^2-y^3"))[0] == P("x^2*(1-x*y^3)")


def test_blowup_point_translated_center():
    Q = P("(x-1)^2 + (y-2)^2")
    assert blowup_point(Q, (1, 2))[0] == P("x^2*(1+y^2)")


def test_monomial_germ_is_depth_zero():
    rep = monomialize(P("x^2*y^3"))
    assert rep.depth == 0
    assert rep.points[0].exponents == (2, 3)
    assert rep.alpha == Fraction(1, 5)


def test_sum_of_squares():
    rep = monomialize(P("x^2+y^2"))
    assert rep.depth == 1
    exps = {p.exponents for p in rep.points if p.kind != "generic"}
    assert exps == {(2, 0), (0, 2)}
    assert rep.lattice_m == 2
    assert all(e % 2 == 0 for p in rep.points for e in p.exponents)


def test_squared_sum_of_squares_doubles():
    rep = monomialize(P("(x^2+y^2)^2"))
    assert rep.depth <= 5
    assert {p.exponents for p in rep.points if p.kind != "generic"} == {(4, 0), (0, 4)}
    assert rep.lattice_m == 4


def test_cusp_matches_golden_trace():
    rep = monomialize(P("x^2-y^3"))
    golden = resources.files("singsurf").joinpath("data/cusp_resolution.txt").read_text()
    assert rep.to_text() == golden
    assert rep.depth == 3
    # multiplicities of the three exceptional curves of the cusp
    assert sorted({p.exponents[0] for p in rep.points if p.kind == "generic"}) == [2, 3, 6]


@pytest.mark.parametrize("expr", ["x^2+y^2", "x^2-y^3", "(x^2+y^2)^2", "x*y", "x^2-2*y^2+y^4", "y^2-x^5"])
def test_substitution_consistency(expr):
    rep = monomialize(P(expr))
    assert verify_consistency(rep, rational_samples())
    for c in rep.charts:
        if c.monomialized:
            assert c.unit_part.constant_term() != 0 or c.status == "transverse"


def test_consistency_detects_tampering():
    rep = monomialize(P("x^2-y^3"))
    c = rep.charts[1]
    rep.charts[1] = type(c)(**{**c.__dict__, "transformed": c.transformed + P("x^5")})
    assert not verify_consistency(rep)


def test_irrational_crossings_are_transverse():
    rep = monomialize(P("x^2-2*y^2"))
    trans = [p for p in rep.points if p.kind == "transverse"]
    assert len(trans) == 2
    assert all(p.exponents == (2, 1) for p in trans)


def test_max_depth_reports_partial_tree():
    with pytest.raises(ResolutionError) as err:
        monomialize(P("x^2-y^3"), max_depth=1)
    assert err.value.partial is not None and err.value.partial.charts


def test_rejects_bad_germs():
    with pytest.raises(ValueError):
        monomialize(P("0"))
    with pytest.raises(ValueError):
        monomialize(P("1+x"))


def test_predict_alpha_examples():
    assert predict_alpha([(2, 0), (1, 1)]) == Fraction(1, 2)
    assert predict_alpha([(1, 0)]) == 1
    assert predict_alpha(monomialize(P("x"))) == 1
    with pytest.raises(ValueError):
        predict_alpha([])


@pytest.mark.parametrize("a,b", [(1, 1), (1, 2), (2, 3), (3, 5), (0, 2), (4, 0)])
def test_predict_alpha_model_germs(a, b):
    germ = P(f"x^{a}*y^{b}")
    assert predict_alpha(monomialize(germ)) == Fraction(1, a + b)


@pytest.mark.parametrize("name", catalog_names())
def test_catalog_germs_resolve_with_even_r2(name):
    rep = resolve_surface_germ(catalog_get(name))
    assert rep.depth <= 12
    assert verify_consistency(rep, rational_samples(3))
    for p in rep.points:
        assert all(e % 2 == 0 for e in p.tracked[0]), (name, p)
    assert link_alpha(rep) > 0
