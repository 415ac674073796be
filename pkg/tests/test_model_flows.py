import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singsurf.model_flows import (
    Cutoff,
    ModelError,
    ModelFamily,
    flow_derivative,
    hyperbola_point,
    measure_identity_check,
    psi_r,
    verify_model_bound,
    weighted_length,
)
from singsurf.surface_model import SemiRiemannianMetric2D

DEGENERATE = SemiRiemannianMetric2D.from_strings("y^2", "0", "x^2")


def test_hyperbola_examples():
    assert hyperbola_point(1, 1, 1.0, 0.0) == pytest.approx((1.0, 1.0), rel=1e-12)
    assert hyperbola_point(0, 2, 0.25, 0.3) == pytest.approx((0.3, 0.5), rel=1e-12)
    x = 0.2
    y = math.sqrt(0.08 / x)
    assert y == pytest.approx(0.632455, abs=1e-6)
    assert hyperbola_point(1, 2, 0.08, x - y) == pytest.approx((x, y), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(a=st.integers(1, 5), b=st.integers(1, 5),
       lx=st.floats(-6, 1), ly=st.floats(-6, 1))
def test_hyperbola_roundtrip(a, b, lx, ly):
    x, y = math.exp(lx), math.exp(ly)
    r = x**a * y**b
    xs, ys = hyperbola_point(a, b, r, x - y)
    assert xs == pytest.approx(x, rel=1e-10)
    assert ys == pytest.approx(y, rel=1e-10)


def test_hyperbola_rejects_bad_input():
    with pytest.raises(ModelError):
        hyperbola_point(1, 1, 0.0, 0.1)
    with pytest.raises(ModelError):
        hyperbola_point(0, 0, 1.0, 0.1)


def test_flow_derivative_examples():
    r = 0.09
    t = math.sqrt(r)
    assert flow_derivative(1, 1, t, t) == pytest.approx(1 / (2 * t), rel=1e-14)
    assert np.linalg.norm(psi_r(1, 1, r, 0.0)) == pytest.approx(1 / math.sqrt(2 * r), rel=1e-12)
    assert np.linalg.norm(psi_r(0, 1, 0.3, 0.2)) == pytest.approx(1.0)
    t = 0.7
    assert flow_derivative(2, 3, t, t) == pytest.approx(1 / (5 * t**4), rel=1e-14)
    with pytest.raises(ModelError):
        flow_derivative(1, 1, 0.0, 1.0)


@pytest.mark.parametrize("a,b", [(1, 1), (1, 2), (2, 3), (3, 5)])
@pytest.mark.parametrize("r,s", [(0.3, 0.1), (1e-3, -0.2), (0.05, 0.0)])
def test_flow_derivative_matches_finite_difference(a, b, r, s):
    x, y = hyperbola_point(a, b, r, s)
    expected = flow_derivative(a, b, x, y)
    errs = []
    for dr in (r * 1e-3, r * 5e-4):
        xp, _ = hyperbola_point(a, b, r + dr, s)
        xm, _ = hyperbola_point(a, b, r - dr, s)
        errs.append(abs((xp - xm) / (2 * dr) - expected) / expected)
    assert errs[0] < 1e-5
    # second order: halving dr cuts the error by about 4 (until roundoff dominates)
    assert errs[1] < errs[0] / 3 or errs[0] < 1e-9


@pytest.mark.parametrize("a,b", [(1, 1), (1, 2), (2, 3), (3, 5), (0, 1), (1, 0), (0, 2), (2, 0)])
def test_model_bound(a, b):
    res = verify_model_bound(a, b, n_r=50, n_s=50)
    assert res.passed


def test_model_bound_sharp_values():
    # weighted AM-GM gives sqrt(2)/(a+b) off the axes; axis branches give exactly 1/b
    assert verify_model_bound(1, 1, 50, 51).sup == pytest.approx(1 / math.sqrt(2), rel=1e-9)
    assert verify_model_bound(0, 3, 20, 20).sup == pytest.approx(1 / 3, rel=1e-12)
    assert verify_model_bound(1, 2, 80, 80).sup <= math.sqrt(2) / 3 + 1e-12


def test_cutoff_shape():
    c = Cutoff(0.5, 1.0)
    assert c(0.3, 0.0) == 1.0 and c(0.0, 1.2) == 0.0
    vals = c(np.linspace(0, 1.1, 200), 0.0)
    assert np.all(np.diff(vals) <= 1e-15) and vals.min() >= 0 and vals.max() <= 1
    with pytest.raises(ModelError):
        Cutoff(1.0, 0.5)


def test_axis_family_constant_length():
    # horizontal lines y = r: length tends to the integral of chi along the x axis
    fam = ModelFamily(0, 1)
    assert weighted_length(fam, 1e-9) == pytest.approx(1.5, rel=1e-8)


def test_degenerate_integrand_form():
    # along the first-quadrant branch, |psi_s|_h ds = sqrt(2) r / x dx; without the
    # cutoff taper (chi = 1 on the whole range) the length is sqrt(2) r log(R^2 / r)
    R = 2.0
    fam = ModelFamily(1, 1, DEGENERATE, Cutoff(R, R + 1e-9))
    r = 1e-3
    assert weighted_length(fam, r) == pytest.approx(math.sqrt(2) * r * math.log(R * R / r), rel=1e-7)


def test_degenerate_log_rate():
    fam = ModelFamily(1, 1, DEGENERATE)
    ratios = [weighted_length(fam, r) / (-r * math.log(r)) for r in (1e-4, 1e-8, 1e-12)]
    assert all(abs(b - math.sqrt(2)) < abs(a - math.sqrt(2)) for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(math.sqrt(2), rel=0.05)


def test_mirrored_components():
    fam = ModelFamily(1, 1)
    assert weighted_length(fam, 0.01, mirrored=True) == pytest.approx(4 * weighted_length(fam, 0.01), rel=1e-9)


@pytest.mark.parametrize("metric", [SemiRiemannianMetric2D.euclidean(), DEGENERATE])
def test_measure_identity(metric):
    fam = ModelFamily(1, 1, metric)
    assert measure_identity_check(fam, (0.5, 1.0), (0.5, 1.0)) <= 1e-6
    fam = ModelFamily(2, 3, metric)
    assert measure_identity_check(fam, (0.1, 0.3), (-0.2, 0.4)) <= 1e-6


def test_measure_identity_axis_not_applicable():
    assert measure_identity_check(ModelFamily(1, 0), (0.5, 1.0), (0.5, 1.0)) is None


def test_from_config():
    fam = ModelFamily.from_config({"a": 1, "b": 1, "metric": {"e": "y^2", "g": "x^2"},
                                   "cutoff": {"inner": 0.4, "outer": 0.9}})
    assert fam.metric == DEGENERATE
    assert fam.cutoff == Cutoff(0.4, 0.9)
