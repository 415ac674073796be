"""Local metric invariants of real algebraic surfaces with isolated singularities."""

__version__ = "0.1.0"

from .polynomial import Polynomial, PolynomialParseError, gradient, parse_polynomial
from .surface_model import (
    AmbientMetric,
    ImplicitSurfaceSpec,
    SemiRiemannianMetric2D,
    catalog_get,
    catalog_names,
    surface_from_expression,
)
