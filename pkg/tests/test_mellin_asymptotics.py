import json
import math
from fractions import Fraction

import numpy as np
import pytest

from singsurf.mellin_asymptotics import (
    FitError,
    IllConditionedFit,
    MellinPoleSet,
    Pole,
    PoleDescriptor,
    TableMellin,
    case_two_transform,
    decay_check,
    decay_slope,
    differentiated_fit_check,
    find_poles,
    fit_expansion,
    mellin_numeric,
    monomial_mellin_continuation,
    monomial_poles,
    poles_to_terms,
    table_poles,
)

SQRT2PI = math.sqrt(2) * math.pi
R = np.geomspace(1e-3, 0.1, 40)


def horn(r):
    return math.pi * (-1 + np.sqrt(1 + 4 * r * r))


def log_model(r):
    return -math.sqrt(2) * r * np.log(r) + 3 * r


def test_fit_cone():
    fit = fit_expansion(R, SQRT2PI * R)
    g, C, has_log = fit.leading
    assert g == 1 and not has_log
    assert C == pytest.approx(SQRT2PI, rel=1e-12)
    assert fit.fit_residual < 1e-10


def test_fit_log_model():
    fit = fit_expansion(R, log_model(R))
    g, C, has_log = fit.leading
    assert g == 1 and has_log
    assert C == pytest.approx(-math.sqrt(2), rel=1e-9)
    assert fit.coefficient(1, 0) == pytest.approx(3, rel=1e-9)


def test_fit_horn():
    fit = fit_expansion(R, horn(R), n_terms=6)
    g, C, has_log = fit.leading
    assert g == 2 and not has_log
    assert C == pytest.approx(2 * math.pi, rel=1e-8)


def test_fit_fractional_lattice():
    l = 2 * R**1.5 + R**2
    fit = fit_expansion(R, l)
    assert fit.lattice_m % 2 == 0
    assert fit.gamma == Fraction(3, 2)
    assert fit.leading[1] == pytest.approx(2, rel=1e-7)


def test_held_out_prediction():
    r_all = np.geomspace(1e-3, 0.1, 61)
    for fn in (horn, log_model, lambda r: SQRT2PI * r * np.sqrt(1 - r * r / 3)):
        l_all = fn(r_all)
        fit = fit_expansion(r_all[::2], l_all[::2], n_terms=5)
        held = r_all[1::2]
        rel = np.abs(fit(held) - fn(held)) / np.abs(fn(held))
        assert np.max(rel) <= 3 * max(fit.fit_residual, 1e-15)


def test_fit_preconditions():
    with pytest.raises(FitError):
        fit_expansion(np.geomspace(0.01, 0.1, 20), np.geomspace(0.01, 0.1, 20))
    with pytest.raises(FitError):
        fit_expansion(R[:6], R[:6], n_terms=4)
    with pytest.raises(FitError):
        fit_expansion(np.r_[R, R[:1]], np.r_[R, R[:1]])
    with pytest.raises(IllConditionedFit):
        fit_expansion(R, horn(R), m=6, n_terms=12)


def test_differentiated_fit():
    fit = fit_expansion(R, SQRT2PI * R)
    assert differentiated_fit_check(R, SQRT2PI * R, fit) < 1e-4
    fit = fit_expansion(R, horn(R), n_terms=6)
    assert differentiated_fit_check(R, horn(R), fit) < 1e-3
    r = np.geomspace(1e-3, 0.1, 80)
    fit = fit_expansion(r, log_model(r))
    assert differentiated_fit_check(r, log_model(r), fit) < 1e-2
    # and the derivative itself has the closed form -sqrt(2)(log r + 1) + 3
    assert np.allclose(fit.derivative(r), -math.sqrt(2) * (np.log(r) + 1) + 3, rtol=1e-8)


def test_expansion_exports():
    fit = fit_expansion(R, log_model(R))
    data = json.loads(fit.to_json())
    assert data["leading"] == {"gamma": "1", "C": pytest.approx(-math.sqrt(2)), "has_log": True}
    assert "lattice_m: 1" in fit.to_text()


@pytest.mark.parametrize("z", [0.5, 1 + 2j, 3 - 1j])
def test_mellin_closed_forms(z):
    r = np.geomspace(1e-3, 1, 60)
    assert mellin_numeric(r, r, z)[0] == pytest.approx(1 / (z + 1), rel=1e-10)
    assert mellin_numeric(r, r * np.log(r), z)[0] == pytest.approx(-1 / (z + 1) ** 2, rel=1e-10)


def test_mellin_cone_truncation():
    r = np.geomspace(1e-3, 0.1, 24)
    z = 0.7
    val, err = mellin_numeric(r, SQRT2PI * r, z)
    assert val == pytest.approx(SQRT2PI * 0.1 ** (z + 1) / (z + 1), rel=1e-4)
    assert err < 1e-8


def test_mellin_requires_continuation_flag():
    r = np.geomspace(1e-3, 1, 30)
    with pytest.raises(ValueError):
        mellin_numeric(r, r, -0.5)
    val, _ = mellin_numeric(r, r, -0.5, continuation=True)
    assert val == pytest.approx(1 / 0.5, rel=1e-9)


def test_horn_table_poles_match_fit():
    r = np.geomspace(0.002, 0.1, 30)
    l = horn(r)
    fit = fit_expansion(r, l)
    poles = table_poles(TableMellin(r, l, fit))
    fitted = sorted({float(t.i) for t in fit.terms})
    located = sorted(-p.z0.real for p in poles.poles)
    assert len(located) == len(fitted)
    assert np.allclose(located, fitted, atol=1e-2)
    assert poles.poles[0].residue.real == pytest.approx(2 * math.pi, rel=1e-3)
    skeleton = poles_to_terms(poles)
    assert skeleton.gamma == 2 and not skeleton.has_log


def test_power_tail_leading_pole():
    # the leading pole survives when the tail is a bare power law matched to the data
    r = np.geomspace(0.002, 0.1, 30)
    poles = table_poles(TableMellin(r, horn(r), tail="power"), (-3, -1))
    assert len(poles.poles) == 1
    assert poles.poles[0].z0.real == pytest.approx(-2, abs=1e-2)


def test_monomial_continuation_residue():
    f = np.vectorize(lambda z: monomial_mellin_continuation([(1, 0)], z))
    (pole,) = find_poles(f, (-1.3, -0.7)).poles
    assert pole.order == 1
    assert pole.residue.real == pytest.approx(2.0, abs=1e-6)
    assert monomial_poles([(1, 0)]).poles[0].residue == 2


def test_monomial_continuation_double_pole():
    f = np.vectorize(lambda z: monomial_mellin_continuation([(1, 0), (1, 0)], z))
    (pole,) = find_poles(f, (-1.3, -0.7)).poles
    assert pole.order == 2
    assert pole.z0.real == pytest.approx(-1, abs=1e-9)
    assert monomial_poles([(1, 0), (1, 0)]).poles[0].order == 2


def test_monomial_continuation_matches_direct_integral():
    # for Re z > -1 the continuation equals the convergent integral
    from scipy import integrate
    from singsurf.mellin_asymptotics import Bump1D

    chi = Bump1D()
    direct = 2 * integrate.quad(lambda y: y**0.3 * chi(y), 0, 1, points=[0.5])[0]
    assert monomial_mellin_continuation([(1, 0)], 0.3).real == pytest.approx(direct, rel=1e-10)


def test_monomial_continuation_at_pole_returns_descriptor():
    d = monomial_mellin_continuation([(1, 0)], -1)
    assert isinstance(d, PoleDescriptor) and d.order == 1
    d = monomial_mellin_continuation([(1, 0), (2, 1)], -1)
    assert d.order == 2


def test_case_two_decays():
    res = decay_slope(case_two_transform, 0.5, [2, 4, 8, 16, 32, 64])
    assert res.passed
    # faster than any power: the local slope keeps steepening
    late = decay_slope(case_two_transform, 0.5, [64, 96, 128, 192, 256])
    assert late.slope < -3 < res.slope


def test_decay_truncated_linear_is_boundary_limited():
    r = np.geomspace(1e-3, 1, 60)
    res = decay_check(r, r, 0.5, [4, 8, 16, 32, 64], taper=None)
    assert res.slope == pytest.approx(-1, abs=0.05)


def test_decay_smooth_high_order():
    r = np.geomspace(1e-3, 1, 200)
    l = r**6 * (1 - r) ** 6
    fit = fit_expansion(r[:120], l[:120], m=1, n_terms=4, allow_log=False, gamma_min=6)
    tm = TableMellin(r, l, fit)
    res = decay_slope(lambda z: tm(z), 1.0, [2, 4, 8, 16, 32])
    assert res.slope <= -2


def test_decay_cone_table():
    r = np.geomspace(1e-3, 0.1, 24)
    assert decay_check(r, SQRT2PI * r, 1.0, [1, 2, 4, 8, 16, 32]).passed


def test_decay_input_validation():
    with pytest.raises(ValueError):
        decay_slope(abs, 0.5, [1, 2, 3])


def test_poles_to_terms_dictionary():
    simple = MellinPoleSet((Pole(-1 + 0j, 1, 2 + 0j, 2 + 0j),))
    sk = poles_to_terms(simple)
    assert [(t.i, t.j) for t in sk.terms] == [(1, 0)]
    double = MellinPoleSet((Pole(-1 + 0j, 2, -1 + 0j, 0.5 + 0j),))
    sk = poles_to_terms(double)
    assert [(t.i, t.j) for t in sk.terms] == [(1, 0), (1, 1)]
    assert sk.has_log and sk.coefficient(1, 1) == 1
    two = MellinPoleSet((Pole(-1 + 0j, 1, 1 + 0j), Pole(-1.5 + 0j, 1, 1 + 0j)))
    assert poles_to_terms(two).lattice_m == 2
    with pytest.raises(ValueError):
        poles_to_terms(MellinPoleSet(()))
