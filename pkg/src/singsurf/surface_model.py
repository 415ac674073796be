"""Surfaces, ambient metrics and the worked-example catalog."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from typing import Optional, Sequence, Tuple

import numpy as np
import yaml

from .polynomial import PolyBundle, Polynomial, gradient, parse_polynomial

XYZ = ("x", "y", "z")


class UnknownSurfaceError(KeyError):
    pass


class SurfaceSpecError(ValueError):
    pass


@dataclass(frozen=True)
class AmbientMetric:
    """Euclidean metric or a diagonal metric with polynomial entries."""

    kind: str = "euclidean"
    diagonal: Tuple[Polynomial, ...] = ()
    dimension: int = 3

    def __post_init__(self):
        if self.kind not in ("euclidean", "diagonal"):
            raise ValueError(f"unsupported metric kind {self.kind!r}")
        if self.kind == "diagonal" and len(self.diagonal) != self.dimension:
            raise ValueError("diagonal metric needs one entry per coordinate")

    @classmethod
    def diagonal_from_strings(cls, entries: Sequence[str], variables=XYZ) -> "AmbientMetric":
        return cls("diagonal", tuple(parse_polynomial(e, variables) for e in entries), len(entries))

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "euclidean"

    def diag_values(self, points) -> np.ndarray:
        """Diagonal entries at float points, shape ``(..., dimension)``."""
        pts = np.asarray(points, dtype=float)
        if self.is_euclidean:
            return np.ones(pts.shape[:-1] + (self.dimension,))
        return np.stack([d.eval_float(pts) for d in self.diagonal], axis=-1)

    def evaluate(self, point) -> np.ndarray:
        return np.diag(self.diag_values(np.asarray(point, dtype=float)))

    def norm(self, points, vectors) -> np.ndarray:
        """Length of ``vectors`` measured at ``points`` (broadcast over leading axes)."""
        v = np.asarray(vectors, dtype=float)
        if self.is_euclidean:
            return np.linalg.norm(v, axis=-1)
        return np.sqrt(np.sum(self.diag_values(points) * v * v, axis=-1))

    def inner(self, points, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.is_euclidean:
            return np.sum(u * v, axis=-1)
        return np.sum(self.diag_values(points) * u * v, axis=-1)


EUCLIDEAN = AmbientMetric()


@dataclass(frozen=True)
class SemiRiemannianMetric2D:
    """The form ``e dx^2 + 2 f dx dy + g dy^2`` with polynomial entries in (x, y)."""

    e: Polynomial
    f: Polynomial
    g: Polynomial

    @classmethod
    def from_strings(cls, e: str, f: str, g: str) -> "SemiRiemannianMetric2D":
        v = ("x", "y")
        return cls(parse_polynomial(e, v), parse_polynomial(f, v), parse_polynomial(g, v))

    @classmethod
    def euclidean(cls) -> "SemiRiemannianMetric2D":
        return cls.from_strings("1", "0", "1")

    def entries(self, x, y):
        pts = np.stack(np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float)), axis=-1)
        return self.e.eval_float(pts), self.f.eval_float(pts), self.g.eval_float(pts)

    def norm(self, x, y, vx, vy):
        e, f, g = self.entries(x, y)
        q = e * vx * vx + 2 * f * vx * vy + g * vy * vy
        return np.sqrt(np.maximum(q, 0.0))


@dataclass(frozen=True)
class ImplicitSurfaceSpec:
    """A surface ``{defining = 0}`` in R^3 with its base point and metadata."""

    name: str
    defining: Polynomial
    singular_point: Tuple[Fraction, Fraction, Fraction]
    metric: AmbientMetric = EUCLIDEAN
    euler_char: Optional[int] = None
    num_singular_points: Optional[int] = None
    expected_components: Optional[Tuple[Fraction, ...]] = None
    singular: bool = True
    eps0: float = 0.5
    bbox: Optional[Tuple[Tuple[float, float], ...]] = None
    description: str = ""

    def __post_init__(self):
        if self.defining.nvars != 3:
            raise SurfaceSpecError("defining polynomial must have 3 variables")
        p = self.singular_point
        if self.defining.evaluate(p) != 0:
            raise SurfaceSpecError(f"{self.name}: defining polynomial does not vanish at {p}")
        grad_zero = all(g == 0 for g in gradient(self.defining, p))
        if self.singular and not grad_zero:
            raise SurfaceSpecError(f"{self.name}: gradient does not vanish at the singular point")
        if not self.singular and grad_zero:
            raise SurfaceSpecError(f"{self.name}: base point is singular but flagged smooth")

    @property
    def point(self) -> np.ndarray:
        return np.array([float(c) for c in self.singular_point])

    @property
    def is_compact(self) -> bool:
        return self.bbox is not None

    @cached_property
    def _fg_bundle(self) -> PolyBundle:
        return PolyBundle([self.defining, *self.defining.gradient_polys()])

    @cached_property
    def _hess_bundle(self) -> PolyBundle:
        return PolyBundle([h for row in self.defining.hessian_polys() for h in row])

    def f(self, x) -> np.ndarray:
        return self._fg_bundle(x)[..., 0]

    def grad(self, x) -> np.ndarray:
        return self._fg_bundle(x)[..., 1:]

    def f_grad(self, x):
        out = self._fg_bundle(x)
        return out[..., 0], out[..., 1:]

    def hess(self, x) -> np.ndarray:
        out = self._hess_bundle(x)
        return out.reshape(out.shape[:-1] + (3, 3))

    def with_metric(self, metric: AmbientMetric) -> "ImplicitSurfaceSpec":
        return _replace(self, metric=metric)


def _replace(spec, **changes):
    from dataclasses import replace

    return replace(spec, **changes)


def _fraction(v) -> Fraction:
    return Fraction(str(v)) if isinstance(v, float) else Fraction(v)


def _load_catalog() -> dict:
    text = resources.files("singsurf").joinpath("data/catalog.yaml").read_text()
    raw = yaml.safe_load(text)
    entries = {}
    for name, entry in raw.items():
        entries[name] = entry
        for alias in entry.get("aliases", []):
            entries[alias] = entry
    return entries


_CATALOG = None


def catalog_names(include_aliases: bool = False) -> list:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _load_catalog()
    if include_aliases:
        return sorted(_CATALOG)
    canon = []
    for name, entry in _CATALOG.items():
        if name not in entry.get("aliases", []):
            canon.append(name)
    return canon


def spec_from_entry(name: str, entry: dict) -> ImplicitSurfaceSpec:
    point = tuple(_fraction(c) for c in entry.get("point", [0, 0, 0]))
    expected = entry.get("expected_gamma")
    bbox = entry.get("bbox")
    return ImplicitSurfaceSpec(
        name=name,
        defining=parse_polynomial(entry["expression"], XYZ),
        singular_point=point,
        euler_char=entry.get("euler_char"),
        num_singular_points=entry.get("num_singular"),
        expected_components=tuple(_fraction(g) for g in expected) if expected else None,
        singular=bool(entry.get("singular", True)),
        eps0=float(entry.get("eps0", 0.5)),
        bbox=tuple(tuple(float(v) for v in b) for b in bbox) if bbox else None,
        description=entry.get("description", ""),
    )


def catalog_get(name: str) -> ImplicitSurfaceSpec:
    """Return the catalog surface ``name`` with its singularity verified."""
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _load_catalog()
    if name not in _CATALOG:
        raise UnknownSurfaceError(f"unknown catalog surface {name!r}; known: {', '.join(catalog_names())}")
    return spec_from_entry(name, _CATALOG[name])


def surface_from_expression(expr: str, point=(0, 0, 0), eps0: float = 0.5) -> ImplicitSurfaceSpec:
    """Inline surface without topology metadata; singularity is detected, not declared."""
    poly = parse_polynomial(expr, XYZ)
    pt = tuple(_fraction(c) for c in point)
    singular = all(g == 0 for g in gradient(poly, pt))
    return ImplicitSurfaceSpec(name=expr, defining=poly, singular_point=pt, singular=singular, eps0=eps0)


def resolve_surface(name_or_expr: str, eps0: Optional[float] = None) -> ImplicitSurfaceSpec:
    """Catalog lookup first, inline expression otherwise."""
    try:
        spec = catalog_get(name_or_expr)
    except UnknownSurfaceError:
        spec = surface_from_expression(name_or_expr)
    if eps0 is not None:
        spec = _replace(spec, eps0=float(eps0))
    return spec
