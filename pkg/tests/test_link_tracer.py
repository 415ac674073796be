import math

import numpy as np
import pytest
from scipy.optimize import brentq

from singsurf.polynomial import Polynomial
from singsurf.surface_model import AmbientMetric, ImplicitSurfaceSpec, catalog_get
from singsurf.link_tracer import TraceError, TraceOptions, length_table, trace_link

SQRT2PI = math.sqrt(2) * math.pi


def horn_radius(r):
    # z^4 + z^2 = r^2 and rho = z^2
    return (-1 + math.sqrt(1 + 4 * r * r)) / 2


def profile_radius(profile_sq, r):
    """Link radius of the revolution surface rho^2 = profile_sq(z), upper sheet."""
    z = brentq(lambda z: profile_sq(z) + z * z - r * r, 0.0, r, xtol=1e-16, rtol=1e-15)
    return math.sqrt(profile_sq(z))


def test_cone_link():
    curves = trace_link(catalog_get("cone"), 0.1)
    assert len(curves) == 2
    for c in curves:
        assert c.length == pytest.approx(SQRT2PI * 0.1, rel=1e-8)
        assert c.residual <= 1e-10
        assert np.array_equal(c.points[0], c.points[-1])


def test_horn_link():
    curves = trace_link(catalog_get("horn-1-2"), 0.1)
    assert len(curves) == 2
    for c in curves:
        assert c.length == pytest.approx(2 * math.pi * horn_radius(0.1), rel=1e-8)


def test_plane_great_circle():
    curves = trace_link(catalog_get("plane"), 0.1)
    assert len(curves) == 1
    assert curves[0].length == pytest.approx(2 * math.pi * 0.1, rel=1e-8)


def test_points_satisfy_constraints():
    spec = catalog_get("double-sphere")
    for c in trace_link(spec, 0.05):
        pts = c.points
        gn = np.linalg.norm(spec.grad(pts), axis=-1)
        assert np.all(np.abs(spec.f(pts)) / gn <= 1e-10 * 0.05)
        assert np.all(np.abs(np.sum(pts**2, axis=-1) - 0.05**2) <= 1e-10 * 0.05**2)


def test_components_ordered_by_height():
    upper, lower = trace_link(catalog_get("cone"), 0.1)
    assert upper.centroid[2] > 0 > lower.centroid[2]


def test_cone_table_linear():
    table = length_table(catalog_get("cone"), 0.01, 0.1, 8)
    assert table.component_ids == [0, 1]
    assert np.all(np.diff(table.r_grid) < 0)
    for cid in table.component_ids:
        r, l = table.series(cid)
        assert np.allclose(l / r, SQRT2PI, rtol=1e-6, atol=0)


def test_horn_table_quadratic():
    table = length_table(catalog_get("horn-1-2"), 0.002, 0.05, 6)
    r, l = table.series(0)
    ratio = l / r**2
    assert abs(ratio[0] - 2 * math.pi) < abs(ratio[-1] - 2 * math.pi)
    assert ratio[0] == pytest.approx(2 * math.pi, rel=1e-5)


def test_double_sphere_table_against_profile():
    table = length_table(catalog_get("double-sphere"), 0.005, 0.2, 5)
    assert table.component_ids == [0, 1]
    for cid in (0, 1):
        r, l = table.series(cid)
        oracle = [2 * math.pi * profile_radius(lambda z: z * z * (2 - z * z), x) for x in r]
        assert np.allclose(l, oracle, rtol=1e-8)
        assert l[0] / r[0] == pytest.approx(2 * math.pi * math.sqrt(2 / 3), rel=1e-4)


def test_revolution_profile_oracle_horn_sphere():
    spec = catalog_get("double-horn-sphere")
    for r in (0.3, 0.05, 0.01):
        curves = trace_link(spec, r)
        oracle = 2 * math.pi * profile_radius(lambda z: z**4 * (2 - z * z), r)
        for c in curves:
            assert c.length == pytest.approx(oracle, rel=1e-8)


def test_step_halving_converged():
    # Richardson-corrected lengths converge at fourth order in the turning angle
    spec = catalog_get("horn-elliptic")
    lengths = [trace_link(spec, 0.05, TraceOptions(max_angle_deg=a))[0].length for a in (5, 2.5, 1.25)]
    d1, d2 = abs(lengths[1] - lengths[0]), abs(lengths[2] - lengths[1])
    assert d1 <= 1e-7 * lengths[0]
    assert d1 / d2 > 8


def test_rotation_invariance():
    # rotation about the x axis with cos = 3/5, sin = 4/5 keeps coefficients rational
    v = ("x", "y", "z")
    x, y, z = (Polynomial.variable(v, n) for n in v)
    from fractions import Fraction as F

    yr = F(3, 5) * y + F(4, 5) * z
    zr = -F(4, 5) * y + F(3, 5) * z
    cone = catalog_get("cone")
    rotated = ImplicitSurfaceSpec("rotated-cone", cone.defining.compose([x, yr, zr]), (0, 0, 0))
    ref = sorted(c.length for c in trace_link(cone, 0.07))
    rot = sorted(c.length for c in trace_link(rotated, 0.07))
    assert np.allclose(ref, rot, rtol=1e-8)


def test_diagonal_metric_scales_length():
    plane = catalog_get("plane")
    scaled = plane.with_metric(AmbientMetric.diagonal_from_strings(["4", "4", "1"]))
    assert trace_link(scaled, 0.1)[0].length == pytest.approx(4 * math.pi * 0.1, rel=1e-8)


def test_radius_errors():
    spec = catalog_get("cone")
    with pytest.raises(TraceError):
        trace_link(spec, 0.5)
    with pytest.raises(TraceError):
        trace_link(spec, 0.0)


def test_csv_schema_and_determinism():
    spec = catalog_get("cone")
    serial = length_table(spec, 0.02, 0.08, 4)
    parallel = length_table(spec, 0.02, 0.08, 4, jobs=2)
    text = serial.to_csv()
    assert text.splitlines()[0] == "r,component_id,length,residual"
    assert text == parallel.to_csv()
