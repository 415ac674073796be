"""Normalized link coordinates ``Phi(r, theta)`` and their distance to the model metric.

``Phi(r, .)`` runs once around one link component at constant speed, starting on a fixed
half-plane through the base point.  The pullback ``Phi^* g = a dr^2 + 2 b dr dtheta + c dtheta^2``
is compared with the model ``dr^2 + (l(r)/2pi)^2 dtheta^2``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .link_tracer import DEFAULT_OPTIONS, TraceOptions, _correct, length_table
from .surface_model import ImplicitSurfaceSpec

NOISE_FLOOR = 1e-7
N_HALF_PLANES = 8


class QiError(ValueError):
    pass


class AnchorError(QiError):
    """No half-plane of the fallback list meets every level of the component cleanly."""


@dataclass
class QiGrid:
    """Samples of ``Phi`` on ``r_levels x theta`` with the pullback metric in each cell.

    ``metric_cells[i, j] = (a, b, c)``; ``r_levels`` is decreasing.  ``points`` is ``None``
    for synthetic grids.
    """

    component_id: int
    r_levels: np.ndarray
    theta_count: int
    points: Optional[np.ndarray]
    metric_cells: np.ndarray
    l_of_r: np.ndarray
    anchor: int = 0

    @property
    def speed(self) -> np.ndarray:
        """``l(r) / 2 pi`` per level."""
        return self.l_of_r / (2 * math.pi)

    def check_invariants(self, center=None, tol: float = 1e-8) -> None:
        a, b, c = np.moveaxis(self.metric_cells, -1, 0)
        if not (np.all(a > 0) and np.all(c > 0) and np.all(a * c - b * b > 0)):
            raise QiError("metric cell not positive definite")
        if self.points is not None and center is not None:
            dist = np.linalg.norm(self.points - center, axis=-1)
            if np.max(np.abs(dist - self.r_levels[:, None]) / self.r_levels[:, None]) > tol:
                raise QiError("grid point off its sphere")

    @classmethod
    def synthetic(cls, r_levels, theta_count: int, l_of_r, a=None, b=None, c=None) -> "QiGrid":
        """Grid with prescribed cells; omitted entries take the model values."""
        r = np.asarray(r_levels, float)
        shape = (len(r), theta_count)
        s = np.asarray(l_of_r, float) / (2 * math.pi)
        A = np.ones(shape) if a is None else np.broadcast_to(np.asarray(a, float), shape)
        C = np.broadcast_to((s * s)[:, None], shape) if c is None else np.broadcast_to(np.asarray(c, float), shape)
        B = np.zeros(shape) if b is None else np.broadcast_to(np.asarray(b, float), shape)
        return cls(-1, r, theta_count, None, np.stack([A, B, C], axis=-1), np.asarray(l_of_r, float))


def _axis_frame(pts: np.ndarray):
    """Normal of the best-fit plane of a loop, plus an orthonormal pair spanning the plane."""
    q = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(q, full_matrices=False)
    axis = vt[2]
    # deterministic orientation and in-plane basis
    if axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    e1 = vt[0] - np.dot(vt[0], axis) * axis
    e1 /= np.linalg.norm(e1)
    if e1[np.argmax(np.abs(e1))] < 0:
        e1 = -e1
    return axis, e1, np.cross(axis, e1)


def _crossing(closed: np.ndarray, p, normal, direction, min_sin: float):
    """Unique crossing of a closed polyline with the half-plane ``{(x-p).normal = 0, (x-p).direction > 0}``.

    Returns ``(segment index, fraction)`` or ``None`` if the crossing is missing, repeated,
    or too shallow.
    """
    h = (closed - p) @ normal
    hits = []
    for i in np.nonzero((h[:-1] <= 0) & (h[1:] > 0) | (h[:-1] > 0) & (h[1:] <= 0))[0]:
        t = h[i] / (h[i] - h[i + 1])
        x = closed[i] + t * (closed[i + 1] - closed[i])
        if (x - p) @ direction > 0:
            seg = closed[i + 1] - closed[i]
            sin = abs(seg @ normal) / np.linalg.norm(seg)
            hits.append((int(i), float(t), sin))
    if len(hits) != 1 or hits[0][2] < min_sin:
        return None
    return hits[0][:2]


def _reparametrize(spec, closed, start, r, n_theta, opts):
    """Constant-speed samples of a closed polyline starting at ``start = (segment, t)``."""
    i, t = start
    p0 = closed[i] + t * (closed[i + 1] - closed[i])
    loop = np.vstack([p0[None], closed[i + 1:-1], closed[:i + 1], p0[None]])
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(loop, axis=0), axis=-1))])
    keep = np.concatenate([[True], np.diff(s) > 1e-15 * s[-1]])
    loop, s = loop[keep], s[keep]
    spline = CubicSpline(s, loop, bc_type="periodic")
    out = spline(np.arange(n_theta) * s[-1] / n_theta)
    out, ok = _correct(spec, out, spec.point, r, opts.tol, opts.max_newton)
    if not ok.all():
        raise QiError(f"projection onto the link failed at r={r:g}")
    return out


def _unit_tangent(spec, x, p):
    t = np.cross(spec.grad(x), x - p)
    return t / np.linalg.norm(t, axis=-1, keepdims=True)


def _radial_derivative(points: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Second-order differences along axis 0 on a non-uniform ``r`` ladder."""
    d = np.empty_like(points)
    n = len(r)
    for i in range(n):
        if i == 0:
            j = (0, 1, 2)
        elif i == n - 1:
            j = (n - 3, n - 2, n - 1)
        else:
            j = (i - 1, i, i + 1)
        x0, x1, x2 = r[list(j)]
        x = r[i]
        w0 = (2 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
        w1 = (2 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
        w2 = (2 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
        d[i] = w0 * points[j[0]] + w1 * points[j[1]] + w2 * points[j[2]]
    return d


def build_phi_grid(spec: ImplicitSurfaceSpec, component: int, r_min: Optional[float] = None,
                   r_max: Optional[float] = None, n_levels: Optional[int] = None, theta_count: int = 64,
                   opts: TraceOptions = DEFAULT_OPTIONS, table=None) -> QiGrid:
    """Trace the component on a geometric ladder and sample ``Phi`` at ``theta_count`` angles.

    The theta = 0 curve is the intersection with a half-plane bounded by the line through
    ``p`` normal to the best-fit plane of the smallest link.  The first of eight half-planes
    (45 degree steps) that every level crosses exactly once and transversally is used.
    ``Phi_theta`` is the exact tangent scaled by ``l(r)/2pi``; ``Phi_r`` comes from
    second-order differences across levels.  A precomputed ``table`` replaces the ladder
    arguments.
    """
    if theta_count < 8:
        raise QiError("theta_count must be at least 8")
    if table is None:
        if r_min is None or r_max is None or n_levels is None:
            raise QiError("give r_min, r_max and n_levels, or a length table")
        table = length_table(spec, r_min, r_max, n_levels, opts)
    r = np.asarray(table.r_grid, float)
    if component not in table.component_ids:
        raise QiError(f"no component {component}; have {table.component_ids}")
    curves = [table.curves[(float(rr), component)] for rr in r]
    p = spec.point

    axis, e1, e2 = _axis_frame(curves[-1].points[:-1])
    starts, anchor = None, None
    for k in range(N_HALF_PLANES):
        ang = k * math.pi / 4
        direction = math.cos(ang) * e1 + math.sin(ang) * e2
        normal = np.cross(axis, direction)
        found = [_crossing(c.points, p, normal, direction, 0.2) for c in curves]
        if all(f is not None for f in found):
            starts, anchor = found, k
            break
    if starts is None:
        raise AnchorError(f"component {component}: every fallback half-plane is tangent or missed")

    pts = np.stack([_reparametrize(spec, c.points, st, c.r, theta_count, opts) for c, st in zip(curves, starts)])
    lengths = np.array([c.length for c in curves])
    phi_theta = _unit_tangent(spec, pts, p) * (lengths / (2 * math.pi))[:, None, None]
    phi_r = _radial_derivative(pts, r)
    g = spec.metric
    a = g.inner(pts, phi_r, phi_r)
    b = g.inner(pts, phi_r, phi_theta)
    c = g.inner(pts, phi_theta, phi_theta)
    return QiGrid(component, r, theta_count, pts, np.stack([a, b, c], axis=-1), lengths, anchor)


def _cell_eigs(grid: QiGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of the pullback relative to the model metric, per cell."""
    a, b, c = np.moveaxis(grid.metric_cells, -1, 0)
    s = grid.speed[:, None]
    m11, m12, m22 = a, b / s, c / (s * s)
    tr, det = m11 + m22, m11 * m22 - m12 * m12
    disc = np.sqrt(np.maximum(0.25 * (m11 - m22) ** 2 + m12 * m12, 0.0))
    return 0.5 * tr - disc, 0.5 * tr + disc


def cell_defects(grid: QiGrid) -> np.ndarray:
    """Smallest ``delta`` per cell with ``g~/(1+delta) <= g <= (1+delta) g~``."""
    lo, hi = _cell_eigs(grid)
    if np.any(lo <= 0):
        raise QiError("degenerate metric cell")
    return np.maximum(np.maximum(hi - 1.0, 1.0 / lo - 1.0), 0.0)


def qi_defect(grid: QiGrid, eps: float) -> float:
    """Max cell defect over levels with ``r <= eps``."""
    sel = grid.r_levels <= eps * (1 + 1e-12)
    if not sel.any():
        raise QiError(f"no level at or below eps={eps:g}")
    return float(np.max(cell_defects(grid)[sel]))


def radial_angle_profile(grid: QiGrid) -> np.ndarray:
    """Per level, the max deviation from a right angle between ``Phi_r`` and ``Phi_theta``."""
    a, b, c = np.moveaxis(grid.metric_cells, -1, 0)
    beta = np.arccos(np.clip(b / np.sqrt(a * c), -1.0, 1.0))
    return np.max(np.abs(beta - math.pi / 2), axis=1)


def sandwich_cell_check(grid: QiGrid, rtol: float = 1e-10) -> np.ndarray:
    """Per cell, whether ``(1 - T) diag(a, c) <= g <= (1 + T) diag(a, c)`` with ``T = |b|/sqrt(ac)``.

    Checked as eigenvalues of the two differences, allowing ``rtol`` relative slack.
    """
    a, b, c = np.moveaxis(grid.metric_cells, -1, 0)
    T = np.abs(b) / np.sqrt(a * c)
    ok = np.ones(a.shape, dtype=bool)
    for sign in (1.0, -1.0):
        # (1 + sign T) diag(a, c) - g must be PSD for sign = +1, NSD for sign = -1
        d11 = (1 + sign * T) * a - a
        d22 = (1 + sign * T) * c - c
        d12 = -b
        tr, det = d11 + d22, d11 * d22 - d12 * d12
        slack = rtol * (a + c) ** 2
        if sign > 0:
            ok &= (tr >= -rtol * (a + c)) & (det >= -slack)
        else:
            ok &= (tr <= rtol * (a + c)) & (det >= -slack)
    return ok


@dataclass
class QiDefectCurve:
    samples: List[Tuple[float, float]]
    fitted: Optional[Tuple[float, float]]
    beta_max: List[float] = field(default_factory=list)
    status: str = ""

    @property
    def passed(self) -> bool:
        return self.status in ("decaying", "noise-floor")

    def to_csv(self, header_comment: Optional[str] = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "delta", "beta_max"])
        betas = self.beta_max or [float("nan")] * len(self.samples)
        for (e, d), bmax in zip(self.samples, betas):
            w.writerow([repr(float(e)), repr(float(d)), repr(float(bmax))])
        return buf.getvalue()


def defect_curve(grid: QiGrid, eps_values: Optional[Sequence[float]] = None) -> QiDefectCurve:
    """``delta(eps)`` at every level (or the given eps) plus the level-wise angle deviation."""
    eps = list(grid.r_levels if eps_values is None else eps_values)
    beta = radial_angle_profile(grid)
    per_level_beta = []
    for e in eps:
        sel = grid.r_levels <= e * (1 + 1e-12)
        per_level_beta.append(float(np.max(beta[sel])))
    samples = [(float(e), qi_defect(grid, e)) for e in eps]
    samples.sort()
    per_level_beta = [b for _, b in sorted(zip(eps, per_level_beta))]
    return fit_alpha(QiDefectCurve(samples, None, per_level_beta))


def fit_alpha(curve: QiDefectCurve, noise_floor: float = NOISE_FLOOR) -> QiDefectCurve:
    """Log-log regression ``delta = C eps^alpha`` over the samples above the noise floor."""
    eps = np.array([s[0] for s in curve.samples])
    delta = np.array([s[1] for s in curve.samples])
    if len(eps) < 5 or math.log10(eps.max() / eps.min()) < 1 - 1e-9:
        raise QiError("need at least 5 samples spanning a decade")
    if np.any(delta < 0):
        raise QiError("negative defect")
    if np.max(delta) <= noise_floor:
        return QiDefectCurve(curve.samples, None, curve.beta_max, "noise-floor")
    use = delta > noise_floor
    if use.sum() < 5 or math.log10(eps[use].max() / eps[use].min()) < 1 - 1e-9:
        return QiDefectCurve(curve.samples, None, curve.beta_max, "noise-floor")
    slope, icpt = np.polyfit(np.log(eps[use]), np.log(delta[use]), 1)
    status = "decaying" if slope > 0 else "not-decaying"
    return QiDefectCurve(curve.samples, (float(math.exp(icpt)), float(slope)), curve.beta_max, status)


# --------------------------------------------------------------------------- classification


@dataclass(frozen=True)
class ComponentKind:
    component_id: int
    gamma: Fraction
    raw_gamma: float

    @property
    def kind(self) -> str:
        return "cone" if self.gamma == 1 else "horn"

    def label(self) -> str:
        return "cone" if self.gamma == 1 else f"horn({self.gamma})"


@dataclass
class Decomposition:
    components: List[ComponentKind]
    anomalies: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.components)

    def labels(self) -> List[str]:
        return [c.label() for c in self.components]

    def to_text(self) -> str:
        out = "[" + ", ".join(self.labels()) + "]"
        for a in self.anomalies:
            out += f"\nanomaly: {a}"
        for w in self.warnings:
            out += f"\nwarning: {w}"
        return out


def classify(leading: Dict[int, object], lattice_m: Optional[int] = None, tol: float = 1e-3,
             snap: float = 0.05) -> Decomposition:
    """Cone/horn label per component from its leading exponent.

    ``leading`` maps component ids to a fitted expansion (its ``gamma`` is used) or to a raw
    exponent.  Raw values are snapped to ``(1/lattice_m) N`` when within ``snap``.
    """
    comps, anomalies, warnings = [], [], []
    for cid in sorted(leading):
        v = leading[cid]
        g = getattr(v, "gamma", v)
        if isinstance(g, Fraction):
            frac, raw = g, float(g)
        else:
            raw = float(g)
            m = lattice_m or 12
            cand = Fraction(round(raw * m), m)
            if abs(float(cand) - raw) <= snap:
                frac = cand
            else:
                frac = Fraction(raw).limit_denominator(1000)
                warnings.append(f"component {cid}: gamma {raw:.6g} not within {snap} of the lattice 1/{m}")
        if raw < 1 - tol:
            anomalies.append(f"component {cid}: gamma {raw:.6g} below 1")
        comps.append(ComponentKind(cid, frac, raw))
    return Decomposition(comps, anomalies, warnings)


# --------------------------------------------------------------------------- constant ledger


def model_constants(pairs: Sequence[Tuple[int, int]], r_max: float = 1.0, n_r: int = 60,
                    n_s: int = 61, s_max: float = 1.0) -> Tuple[float, int]:
    """``C0 = max r |Psi_r|`` over the model charts with ``r <= r_max``; ``k`` = number of charts."""
    from .model_flows import psi_r

    pairs = [tuple(int(v) for v in p) for p in pairs if sum(p) > 0]
    if not pairs:
        raise QiError("no model charts")
    best = 0.0
    for a, b in pairs:
        for rr in np.geomspace(r_max * 1e-6, r_max, n_r):
            for s in np.linspace(-s_max, s_max, n_s):
                best = max(best, float(rr * np.linalg.norm(psi_r(a, b, rr, s))))
    return best, len(pairs)


@dataclass(frozen=True)
class LedgerCheck:
    delta: float
    C0: float
    C1: float
    k: int

    @property
    def bound(self) -> float:
        return self.C0 * (6 + 4 * self.k * (6 + 2 * self.C1))

    @property
    def passed(self) -> bool:
        return self.delta <= self.bound


def constant_ledger_check(grid: QiGrid, C0: Optional[float], C1: Optional[float], k: Optional[int],
                          eps: Optional[float] = None) -> LedgerCheck:
    """Compare the measured defect with ``C0 (6 + 4 k (6 + 2 C1))``."""
    if C0 is None or C1 is None or k is None:
        raise QiError("constant ledger needs C0, C1 and k")
    e = float(grid.r_levels.max()) if eps is None else eps
    return LedgerCheck(qi_defect(grid, e), float(C0), float(C1), int(k))
