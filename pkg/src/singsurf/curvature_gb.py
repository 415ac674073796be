"""Gauss and geodesic curvature of implicit surfaces and Gauss-Bonnet bookkeeping.

Conventions
-----------
Geodesic curvature of a link ``K_r`` is ``kappa = c'' . nu`` where ``c`` is the unit-speed
curve and ``nu`` the unit tangent vector of the surface normal to ``K_r`` that points away
from the base point ``p``.  With this sign a circle of radius ``rho`` around ``p`` in a plane
has ``int kappa = -2 pi`` and the first variation of length reads ``dl/dr = -int kappa / |grad_V rho|``.

For the annulus ``A = {eps <= |x - p| <= eps1}`` the classical identity becomes

    0 = chi(A) = (1/2pi) [ int_A K - int_{K_eps1} kappa + int_{K_eps} kappa ]

because the inward normal of ``A`` is ``-nu`` on the outer boundary and ``+nu`` on the inner one.

Only the Euclidean ambient metric is supported.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .link_tracer import DEFAULT_OPTIONS, LinkCurve, TraceOptions, trace_link
from .surface_model import ImplicitSurfaceSpec

TWO_PI = 2.0 * math.pi


class CurvatureError(ValueError):
    """Bad input: point too close to a critical point, unsupported metric, coarse link."""


class MissingMetadataError(CurvatureError):
    pass


def _require_euclidean(spec: ImplicitSurfaceSpec) -> None:
    if not spec.metric.is_euclidean:
        raise CurvatureError("curvature is only implemented for the Euclidean ambient metric")


def _adjugate(h: np.ndarray) -> np.ndarray:
    c0, c1, c2 = h[..., :, 0], h[..., :, 1], h[..., :, 2]
    return np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=-2)


def gauss_curvature(spec: ImplicitSurfaceSpec, point, grad_tol: float = 1e-9) -> np.ndarray:
    """Gauss curvature of ``{F = 0}`` at ``point`` (vectorized over leading axes).

    Uses ``K = grad F^T adj(Hess F) grad F / |grad F|^4``.
    """
    _require_euclidean(spec)
    x = np.asarray(point, dtype=float)
    g = spec.grad(x)
    gn = np.linalg.norm(g, axis=-1)
    if np.any(gn < grad_tol):
        raise CurvatureError("gradient vanishes (point too close to a critical point)")
    adj = _adjugate(spec.hess(x))
    num = np.einsum("...i,...ij,...j->...", g, adj, g)
    return num / gn**4


@dataclass(frozen=True)
class CurvatureSample:
    point: np.ndarray
    K: float
    area_weight: float


def _link_frame(spec, pts, p, r):
    """Unit normal, tangent, away-pointing conormal and ``|grad_V rho|`` along a link."""
    g = spec.grad(pts)
    n = g / np.linalg.norm(g, axis=-1, keepdims=True)
    u = (pts - p) / r
    un = np.sum(u * n, axis=-1)
    nu = u - un[:, None] * n
    speed = np.linalg.norm(nu, axis=-1)
    nu = nu / speed[:, None]
    t = np.cross(n, nu)
    return n, t, nu, speed


def _arc_weights(closed: np.ndarray) -> np.ndarray:
    """Trapezoid weights at the vertices of a closed polyline (last point = first)."""
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=-1)
    return 0.5 * (seg + np.roll(seg, 1))


def _loop_integral(closed: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """Trapezoid integral on the refined loop, Richardson-corrected with the even subloop."""
    fine = float(np.sum(_arc_weights(closed) * values))
    coarse_pts = closed[0::2]
    coarse = float(np.sum(_arc_weights(coarse_pts) * values[0::2]))
    return (4.0 * fine - coarse) / 3.0, abs(fine - coarse)


def link_curvature_samples(link: LinkCurve, spec: ImplicitSurfaceSpec) -> List[CurvatureSample]:
    """Gauss curvature along a link with the coarea weight ``ds / |grad_V rho|``."""
    pts = link.points[:-1]
    K = gauss_curvature(spec, pts)
    _, _, _, speed = _link_frame(spec, pts, spec.point, link.r)
    w = _arc_weights(link.points) / speed
    return [CurvatureSample(pts[i].copy(), float(K[i]), float(w[i])) for i in range(len(pts))]


def _coarea_density(link: LinkCurve, spec) -> float:
    """``int_{K_r} K / |grad_V rho| ds``, the r-density of ``int K dA``."""
    pts = link.points[:-1]
    K = gauss_curvature(spec, pts)
    _, _, _, speed = _link_frame(spec, pts, spec.point, link.r)
    return _loop_integral(link.points, K / speed)[0]


def geodesic_kappa(link: LinkCurve, spec: ImplicitSurfaceSpec, rel_tol: float = 1e-3) -> Tuple[float, float]:
    """Return ``(int kappa ds, int |kappa| ds)`` over one link component.

    The acceleration of the link is exact: it is the intersection of ``F = 0`` with the
    sphere ``|x - p|^2 = r^2``, so ``c''`` solves ``grad F . c'' = -T^T (Hess F) T``,
    ``(x - p) . c'' = -1`` and ``T . c'' = 0``.  Only the arc-length quadrature depends on
    the polyline; its Richardson error estimate must stay below ``rel_tol``.
    """
    _require_euclidean(spec)
    p = spec.point
    pts = link.points[:-1]
    n, t, nu, _ = _link_frame(spec, pts, p, link.r)
    g = spec.grad(pts)
    H = spec.hess(pts)
    A = np.stack([g, pts - p, t], axis=-2)
    rhs = np.stack([-np.einsum("...i,...ij,...j->...", t, H, t), -np.ones(len(pts)), np.zeros(len(pts))], axis=-1)
    acc = np.linalg.solve(A, rhs[..., None])[..., 0]
    kappa = np.sum(acc * nu, axis=-1)
    signed, err = _loop_integral(link.points, kappa)
    absolute = _loop_integral(link.points, np.abs(kappa))[0]
    if err > rel_tol * max(absolute, 1.0):
        raise CurvatureError(f"link at r={link.r:g} too coarse for curvature (quadrature error {err:.2e})")
    return signed, absolute


# ---------------------------------------------------------------------------
# integrals of K
# ---------------------------------------------------------------------------


def _gl_nodes(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _split_geometric(lo: float, hi: float, max_ratio: float = 2.0) -> np.ndarray:
    k = max(1, int(math.ceil(math.log(hi / lo) / math.log(max_ratio) - 1e-12)))
    return lo * (hi / lo) ** (np.arange(k + 1) / k)


def _annulus_integral(spec, lo, hi, n_nodes, opts, weight=None):
    total = 0.0
    for a, b in zip(*(lambda e: (e[:-1], e[1:]))(_split_geometric(lo, hi))):
        rs, ws = _gl_nodes(a, b, n_nodes)
        for r, w in zip(rs, ws):
            dens = sum(_coarea_density(c, spec) for c in trace_link(spec, float(r), opts))
            total += w * dens * (1.0 if weight is None else float(weight(r)))
    return total


@dataclass(frozen=True)
class KIntegral:
    value: float
    coarse_value: float
    n_nodes: int

    @property
    def error_estimate(self) -> float:
        return abs(self.value - self.coarse_value)


def integrate_K(spec: ImplicitSurfaceSpec, eps: float, eps1: float, n_nodes: int = 8,
                opts: TraceOptions = DEFAULT_OPTIONS) -> KIntegral:
    """``int K dA`` over ``{eps <= |x - p| <= eps1}`` by the coarea formula.

    The area element in the (r, arc length) parametrization of the links is
    ``ds dr / |grad_V rho|``.  The r-integral uses Gauss-Legendre on sub-intervals of
    ratio at most 2; the same rule with half the nodes is the convergence check.
    """
    _require_euclidean(spec)
    if not 0 < eps < eps1 <= spec.eps0:
        raise CurvatureError("need 0 < eps < eps1 <= eps0")
    fine = _annulus_integral(spec, eps, eps1, n_nodes, opts)
    coarse = _annulus_integral(spec, eps, eps1, max(2, n_nodes // 2), opts)
    return KIntegral(fine, coarse, n_nodes)


def blend_weight(r, a: float, b: float):
    """C-infinity step in ``r``: 1 for ``r <= a``, 0 for ``r >= b``."""
    t = np.clip((np.asarray(r, float) - a) / (b - a), 0.0, 1.0)

    def e(s):
        return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)

    return e(1.0 - t) / (e(1.0 - t) + e(t))


def mesh_integral_K(spec: ImplicitSurfaceSpec, h: float, weight=None, newton_steps: int = 3) -> Tuple[float, float]:
    """``int K * weight(|x - p|) dA`` over a marching-cubes mesh of the compact surface.

    Vertices are projected back onto ``F = 0``; each triangle contributes its flat area
    times the vertex mean of the integrand.  Returns ``(integral, mesh area)``.
    """
    from skimage.measure import marching_cubes

    _require_euclidean(spec)
    if spec.bbox is None:
        raise CurvatureError(f"{spec.name}: no bounding box, surface not compact")
    axes = [np.arange(lo, hi + 0.5 * h, h) for lo, hi in spec.bbox]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vol = spec.f(grid)
    verts, faces, _, _ = marching_cubes(vol, level=0.0, spacing=(h, h, h))
    verts = verts + np.array([ax[0] for ax in axes])
    for _ in range(newton_steps):
        f, g = spec.f_grad(verts)
        gg = np.sum(g * g, axis=-1)
        ok = gg > 1e-20
        verts[ok] -= (f[ok] / gg[ok])[:, None] * g[ok]
    dist = np.linalg.norm(verts - spec.point, axis=-1)
    w = np.ones(len(verts)) if weight is None else np.asarray(weight(dist), float)
    vals = np.zeros(len(verts))
    live = w > 0
    vals[live] = gauss_curvature(spec, verts[live]) * w[live]
    tri = verts[faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=-1)
    return float(np.sum(area * vals[faces].mean(axis=1))), float(area.sum())


@dataclass
class GlobalKIntegral:
    """``int_{V_0} K`` split by a radial partition of unity around ``p``."""

    eps: List[float]
    inner: List[float]
    outer: float
    outer_coarse: float
    blend: Tuple[float, float]
    mesh_h: float
    extrapolated_inner: float

    @property
    def value(self) -> float:
        return self.extrapolated_inner + self.outer

    def values_by_eps(self) -> List[float]:
        return [i + self.outer for i in self.inner]

    def to_csv(self, header_comment: Optional[str] = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "int_K", "increment"])
        prev = None
        for e, v in zip(self.eps, self.values_by_eps()):
            w.writerow([repr(float(e)), repr(float(v)), "" if prev is None else repr(float(v - prev))])
            prev = v
        w.writerow(["0", repr(float(self.value)), ""])
        return buf.getvalue()


def _extrapolate(partials: Sequence[float]) -> float:
    """Limit of partial sums whose increments shrink geometrically."""
    s = list(partials)
    if len(s) < 3:
        return s[-1]
    d1, d2 = s[-2] - s[-3], s[-1] - s[-2]
    if d1 == 0 or d2 == 0:
        return s[-1]
    q = d2 / d1
    if not 0 < q < 0.95:
        return s[-1]
    return s[-1] + d2 * q / (1.0 - q)


def global_integral_K(spec: ImplicitSurfaceSpec, n_halvings: int = 8, n_nodes: int = 8,
                      blend: Optional[Tuple[float, float]] = None, mesh_h: float = 0.02,
                      opts: TraceOptions = DEFAULT_OPTIONS) -> GlobalKIntegral:
    """``int K`` over the whole compact surface minus ``p``.

    Near ``p`` (weight ``w``) the coarea integral over traced links is accumulated down to
    ``eps = b / 2^n_halvings`` and extrapolated to ``eps -> 0``; the rest (weight ``1 - w``)
    is integrated on a marching-cubes mesh.
    """
    _require_euclidean(spec)
    a, b = blend if blend is not None else (0.45 * spec.eps0, 0.9 * spec.eps0)
    if not 0 < a < b < spec.eps0:
        raise CurvatureError("blend radii must satisfy 0 < a < b < eps0")

    def w_in(r):
        return blend_weight(r, a, b)

    outer = mesh_integral_K(spec, mesh_h, weight=lambda d: 1.0 - w_in(d))[0]
    outer_coarse = mesh_integral_K(spec, 2 * mesh_h, weight=lambda d: 1.0 - w_in(d))[0]
    eps = [b]
    inner = [0.0]
    hi = b
    for _ in range(n_halvings):
        lo = hi / 2
        inner.append(inner[-1] + _annulus_integral(spec, lo, hi, n_nodes, opts, weight=w_in))
        eps.append(lo)
        hi = lo
    return GlobalKIntegral(eps, inner, outer, outer_coarse, (a, b), mesh_h, _extrapolate(inner))


# ---------------------------------------------------------------------------
# Gauss-Bonnet residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnulusGB:
    eps: float
    eps1: float
    int_K: float
    kappa_inner: float
    kappa_outer: float

    @property
    def residual(self) -> float:
        return abs(self.int_K - self.kappa_outer + self.kappa_inner) / TWO_PI


def annulus_gb(spec: ImplicitSurfaceSpec, eps: float, eps1: float, n_nodes: int = 8,
               opts: TraceOptions = DEFAULT_OPTIONS) -> AnnulusGB:
    k = integrate_K(spec, eps, eps1, n_nodes, opts).value
    k_in = sum(geodesic_kappa(c, spec)[0] for c in trace_link(spec, eps, opts))
    k_out = sum(geodesic_kappa(c, spec)[0] for c in trace_link(spec, eps1, opts))
    return AnnulusGB(eps, eps1, k, k_in, k_out)


def classical_gb_residual(spec: ImplicitSurfaceSpec, eps: float, eps1: float, n_nodes: int = 8,
                          opts: TraceOptions = DEFAULT_OPTIONS) -> float:
    """Gauss-Bonnet defect of the annulus ``{eps <= |x - p| <= eps1}`` (Euler characteristic 0)."""
    return annulus_gb(spec, eps, eps1, n_nodes, opts).residual


@dataclass(frozen=True)
class L2Euler:
    N: int
    R: int
    chi_l2: Fraction
    chi_gb: Fraction

    @property
    def difference(self) -> Fraction:
        return self.chi_l2 - self.chi_gb

    @property
    def consistent(self) -> bool:
        return self.difference == self.N - self.R


def l2_euler(N: int, R: int, curvature_term: float) -> L2Euler:
    """Evaluate ``chi_2 = N + X`` and ``chi = R + X`` in exact arithmetic.

    ``X = (int K - sum l_i) / 2pi`` is converted once to the exact rational value of the
    float, so ``chi_2 - chi = N - R`` holds without rounding.
    """
    X = Fraction(curvature_term)
    return L2Euler(int(N), int(R), N + X, R + X)


def curvature_term(int_K: float, l_sum: float) -> float:
    return (int_K - l_sum) / TWO_PI


def cone_lengths(expansions: Dict[int, "object"]) -> List[float]:
    """Leading coefficients of the components whose leading exponent is 1."""
    out = []
    for cid in sorted(expansions):
        g, C = expansions[cid].leading[0], expansions[cid].leading[1]
        if abs(g - 1) < 1e-9:
            out.append(float(C))
    return out


@dataclass
class GBReport:
    surface: str
    eps: float
    int_K: float
    boundary_kappa: List[float]
    abs_kappa: List[float]
    chi_classical_residual: float
    chi_singular_residual: float
    chi_l2: float
    chi: int
    R: int
    N: int
    l_values: List[float] = field(default_factory=list)
    l2_exact: Optional[L2Euler] = field(default=None, repr=False)
    k_integral: Optional[GlobalKIntegral] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {
            "surface": self.surface,
            "eps": self.eps,
            "int_K": self.int_K,
            "boundary_kappa": list(self.boundary_kappa),
            "abs_kappa": list(self.abs_kappa),
            "chi_classical_residual": self.chi_classical_residual,
            "chi_singular_residual": self.chi_singular_residual,
            "chi_l2": self.chi_l2,
            "chi": self.chi,
            "R": self.R,
            "N": self.N,
            "l_values": list(self.l_values),
        }
        if self.l2_exact is not None:
            d["chi_l2_minus_chi_gb"] = str(self.l2_exact.difference)
            d["l2_consistent"] = self.l2_exact.consistent
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        d = self.to_dict()
        lines = [f"gauss-bonnet report: {self.surface}"]
        for k in ("chi", "R", "N", "int_K", "l_values", "chi_singular_residual", "eps", "boundary_kappa",
                  "abs_kappa", "chi_classical_residual", "chi_l2"):
            lines.append(f"  {k}: {d[k]}")
        if self.l2_exact is not None:
            lines.append(f"  chi_l2 - chi_gb = {self.l2_exact.difference} (N - R = {self.N - self.R})")
        return "\n".join(lines) + "\n"


def _metadata(spec):
    if spec.euler_char is None or spec.num_singular_points is None:
        raise MissingMetadataError(f"{spec.name}: Euler characteristic / singular point count unknown")
    return int(spec.euler_char), int(spec.num_singular_points)


def gauss_bonnet_report(spec: ImplicitSurfaceSpec, expansions: Optional[Dict[int, object]] = None,
                        n_halvings: int = 8, n_nodes: int = 8, mesh_h: float = 0.02,
                        opts: TraceOptions = DEFAULT_OPTIONS) -> GBReport:
    """Close the singular Gauss-Bonnet identity for a compact catalog surface.

    ``expansions`` maps link component ids to fitted length expansions; components with
    leading exponent 1 contribute their leading coefficient ``l_i``.  A smooth base point
    needs none.
    """
    chi, R = _metadata(spec)
    if spec.bbox is None:
        raise MissingMetadataError(f"{spec.name}: not compact, int K over the surface is undefined")
    if spec.singular and not expansions:
        raise CurvatureError("singular base point needs fitted expansions for the link lengths")
    ls = cone_lengths(expansions) if spec.singular else []
    N = len(expansions) if spec.singular else 0
    gk = global_integral_K(spec, n_halvings=n_halvings, n_nodes=n_nodes, mesh_h=mesh_h, opts=opts)
    int_K = gk.value
    eps = gk.eps[-1]
    links = trace_link(spec, eps, opts)
    kap = [geodesic_kappa(c, spec) for c in links]
    classical = classical_gb_residual(spec, eps, gk.blend[0], n_nodes, opts)
    X = curvature_term(int_K, sum(ls))
    singular = abs(chi - R - X)
    l2 = l2_euler(N, R, X)
    return GBReport(spec.name, eps, int_K, [k[0] for k in kap], [k[1] for k in kap], classical, singular,
                    float(l2.chi_l2), chi, R, N, ls, l2, gk)


def metadata_l2_euler(spec: ImplicitSurfaceSpec, N: int) -> L2Euler:
    """``chi_2`` for a surface whose curvature term is taken from its metadata, ``X = chi - R``."""
    chi, R = _metadata(spec)
    X = Fraction(chi - R)
    return L2Euler(int(N), R, N + X, R + X)
