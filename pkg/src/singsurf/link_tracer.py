"""Trace the links ``V ∩ {|x - p| = r}`` by predictor-corrector continuation.

The link is the zero set of the two equations ``F(x) = 0`` and
``|x - p|^2 = r^2``.  Each component is followed with a tangent predictor
(cross product of the two constraint gradients) and a minimum-norm
Gauss-Newton corrector.  Lengths are computed on a midpoint-refined polyline
and combined with the coarse polyline by one Richardson step, so a 5 degree
turning budget per step still gives lengths accurate to ~1e-8 relative.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .surface_model import ImplicitSurfaceSpec


class TraceError(RuntimeError):
    """Continuation failed (step underflow, no closure, radius out of range)."""


@dataclass(frozen=True)
class TraceOptions:
    max_angle_deg: float = 5.0
    min_step_factor: float = 1e-8  # step floor, relative to r
    tol: float = 1e-10  # constraint tolerance, relative to r (and r^2 for the sphere)
    closure_factor: float = 1.5  # close when the start is within this many steps ahead
    min_closure_steps: int = 10
    max_steps: int = 50000
    n_meridians: int = 24
    n_polar: int = 96
    max_newton: int = 30


DEFAULT_OPTIONS = TraceOptions()


@dataclass(frozen=True)
class LinkCurve:
    """One closed component of the link at radius ``r``.

    ``points`` is the refined closed polyline (first point repeated at the end);
    even indices are continuation steps, odd indices corrected midpoints.
    """

    r: float
    points: np.ndarray
    length: float
    component_id: int
    residual: float
    center: np.ndarray = field(repr=False, default=None)

    @property
    def centroid(self) -> np.ndarray:
        return self.points[:-1].mean(axis=0)

    @property
    def n_steps(self) -> int:
        return (len(self.points) - 1) // 2


# ---------------------------------------------------------------------------
# low-level continuation pieces
# ---------------------------------------------------------------------------


def _residual(spec, x, p, r, fg=None):
    x = np.atleast_2d(x)
    f, g = spec.f_grad(x) if fg is None else fg
    gn = np.linalg.norm(g, axis=-1)
    rf = np.abs(f) / np.where(gn > 0, gn, np.inf) / r
    rs = np.abs(np.sum((x - p) ** 2, axis=-1) - r * r) / (r * r)
    return np.maximum(rf, rs)


def _correct(spec, x, p, r, tol, max_iter):
    """Batch minimum-norm Gauss-Newton projection onto the link.

    Returns corrected points and a boolean convergence mask.
    """
    x = np.array(np.atleast_2d(x), dtype=float)
    ok = np.zeros(len(x), dtype=bool)
    f, g = spec.f_grad(x)
    for _ in range(max_iter):
        gn = np.linalg.norm(g, axis=-1)
        bad = gn == 0
        gn = np.where(bad, 1.0, gn)
        a1 = g / gn[:, None]
        b1 = -f / gn
        d = x - p
        a2 = d / r
        b2 = -(np.sum(d * d, axis=-1) - r * r) / (2 * r)
        # J J^T for the 2x3 system, solved in closed form
        m11 = np.sum(a1 * a1, axis=-1)
        m12 = np.sum(a1 * a2, axis=-1)
        m22 = np.sum(a2 * a2, axis=-1)
        det = m11 * m22 - m12 * m12
        det = np.where(np.abs(det) < 1e-300, np.nan, det)
        l1 = (m22 * b1 - m12 * b2) / det
        l2 = (-m12 * b1 + m11 * b2) / det
        dx = l1[:, None] * a1 + l2[:, None] * a2
        dx[bad | ~np.isfinite(dx).all(axis=-1)] = np.nan
        x = x + dx
        step = np.linalg.norm(dx, axis=-1)
        f, g = spec.f_grad(x)
        ok = (step <= tol * r) & (_residual(spec, x, p, r, (f, g)) <= tol)
        if ok.all() or not np.isfinite(x).all():
            break
    ok &= np.isfinite(x).all(axis=-1)
    return x, ok


def _tangent(spec, x, p):
    t = np.cross(spec.grad(np.atleast_2d(x)), np.atleast_2d(x) - p)
    n = np.linalg.norm(t, axis=-1, keepdims=True)
    return t / n


def _trace_loop(spec, x0, r, opts: TraceOptions):
    p = spec.point
    max_angle = math.radians(opts.max_angle_deg)
    h_min = opts.min_step_factor * r
    h = r * max_angle
    x = x0
    t = _tangent(spec, x, p)[0]
    pts = [x0]
    for step in range(opts.max_steps):
        gap = np.linalg.norm(x0 - x)
        if step >= opts.min_closure_steps and gap <= opts.closure_factor * h and np.dot(x0 - x, t) > 0:
            pts.append(x0.copy())
            return np.array(pts)
        while True:
            y, ok = _correct(spec, x + h * t, p, r, opts.tol, opts.max_newton)
            if ok[0]:
                y = y[0]
                t_new = _tangent(spec, y, p)[0]
                cos_turn = np.clip(np.dot(t, t_new), -1.0, 1.0)
                dist = np.linalg.norm(y - x)
                if math.acos(cos_turn) <= max_angle and 0.5 * h <= dist <= 1.5 * h:
                    break
            h *= 0.5
            if h < h_min:
                raise TraceError(f"step size underflow at r={r:g} near {x}")
        turn = math.acos(cos_turn)
        x, t = y, t_new
        pts.append(x)
        if turn < 0.5 * max_angle:
            h = min(1.5 * h, 2.0 * r)
    raise TraceError(f"component did not close after {opts.max_steps} steps at r={r:g}")


def _refine(spec, coarse, r, opts):
    """Insert corrected chord midpoints; returns the doubled closed polyline."""
    p = spec.point
    mids, ok = _correct(spec, 0.5 * (coarse[:-1] + coarse[1:]), p, r, opts.tol, opts.max_newton)
    if not ok.all():
        raise TraceError(f"midpoint refinement failed at r={r:g}")
    fine = np.empty((2 * len(coarse) - 1, 3))
    fine[0::2] = coarse
    fine[1::2] = mids
    return fine


def polyline_length(points: np.ndarray, metric) -> float:
    """Metric length of a polyline with midpoint metric evaluation."""
    seg = np.diff(points, axis=0)
    mid = 0.5 * (points[:-1] + points[1:])
    return float(np.sum(metric.norm(mid, seg)))


def richardson_length(fine: np.ndarray, metric) -> float:
    """Fourth-order length from a midpoint-refined closed polyline."""
    lf = polyline_length(fine, metric)
    lc = polyline_length(fine[0::2], metric)
    return (4.0 * lf - lc) / 3.0


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------


def _seed_points(spec, r, opts):
    p = spec.point
    theta = np.linspace(0.0, math.pi, opts.n_polar + 1)
    phis = np.arange(opts.n_meridians) * (2 * math.pi / opts.n_meridians)
    seeds = []
    for phi in phis:
        c, s = math.cos(phi), math.sin(phi)

        def point(th):
            return p + r * np.array([math.sin(th) * c, math.sin(th) * s, math.cos(th)])

        u = np.stack([np.sin(theta) * c, np.sin(theta) * s, np.cos(theta)], axis=-1)
        vals = spec.f(p + r * u)
        for i in range(len(theta) - 1):
            a, b = vals[i], vals[i + 1]
            if a == 0.0:
                seeds.append(point(theta[i]))
            elif a * b < 0:
                th = brentq(lambda t: spec.f(point(t)[None])[0], theta[i], theta[i + 1], xtol=1e-15, rtol=1e-15)
                seeds.append(point(th))
        if vals[-1] == 0.0:
            seeds.append(point(theta[-1]))
    if not seeds:
        return np.empty((0, 3))
    seeds, ok = _correct(spec, np.array(seeds), p, r, opts.tol, opts.max_newton)
    return seeds[ok]


def _min_dist_to_polyline(q, pts):
    a = pts[:-1]
    ab = pts[1:] - a
    t = np.clip(np.sum((q - a) * ab, axis=-1) / np.maximum(np.sum(ab * ab, axis=-1), 1e-300), 0, 1)
    return float(np.min(np.linalg.norm(a + t[:, None] * ab - q, axis=-1)))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def trace_link(spec: ImplicitSurfaceSpec, r: float, opts: TraceOptions = DEFAULT_OPTIONS) -> List[LinkCurve]:
    """Trace every component of the link of ``spec`` at extrinsic radius ``r``.

    Components are ordered by the direction of their centroid seen from the
    base point (descending z, then x, then y) and numbered from 0.  Each curve
    is oriented along ``grad F x (x - p)``.
    """
    if not r > 0:
        raise TraceError(f"radius must be positive, got {r}")
    if r >= spec.eps0:
        raise TraceError(f"r={r:g} is not below the local radius eps0={spec.eps0:g}")
    p = spec.point
    seeds = _seed_points(spec, r, opts)
    if not len(seeds):
        raise TraceError(f"no link points found at r={r:g}")
    loops = []
    alive = np.ones(len(seeds), dtype=bool)
    for i in range(len(seeds)):
        if not alive[i]:
            continue
        coarse = _trace_loop(spec, seeds[i], r, opts)
        fine = _refine(spec, coarse, r, opts)
        reach = 1.5 * np.max(np.linalg.norm(np.diff(coarse, axis=0), axis=-1))
        for j in range(i, len(seeds)):
            if alive[j] and _min_dist_to_polyline(seeds[j], fine) <= reach:
                alive[j] = False
        loops.append(fine)

    def order_key(fine):
        c = (fine[:-1].mean(axis=0) - p) / r
        return (-round(c[2], 6), round(c[0], 6), round(c[1], 6))

    loops.sort(key=order_key)
    curves = []
    for cid, fine in enumerate(loops):
        curves.append(
            LinkCurve(
                r=float(r),
                points=fine,
                length=richardson_length(fine, spec.metric),
                component_id=cid,
                residual=float(np.max(_residual(spec, fine, p, r))),
                center=p,
            )
        )
    return curves


@dataclass
class LengthTable:
    """Link lengths over a geometric radius grid, ``r`` decreasing."""

    rows: List[tuple]
    r_grid: np.ndarray
    ratio: float
    curves: dict = field(default_factory=dict, repr=False)

    @property
    def component_ids(self) -> List[int]:
        return sorted({row[1] for row in self.rows})

    def series(self, component_id: int):
        """``(r, length)`` arrays for one component, ``r`` increasing."""
        pts = sorted((row[0], row[2]) for row in self.rows if row[1] == component_id)
        r, l = zip(*pts)
        return np.array(r), np.array(l)

    def to_csv(self, header_comment: Optional[str] = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "component_id", "length", "residual"])
        for r, cid, length, res in self.rows:
            w.writerow([repr(float(r)), cid, repr(float(length)), f"{res:.3e}"])
        return buf.getvalue()


def geometric_grid(r_min: float, r_max: float, n_levels: int) -> np.ndarray:
    """Decreasing geometric grid from r_max to r_min inclusive."""
    return r_max * (r_min / r_max) ** (np.arange(n_levels) / (n_levels - 1))


def _trace_level(args):
    spec, r, opts = args
    try:
        return trace_link(spec, r, opts)
    except TraceError as exc:
        raise TraceError(f"at r={r:g}: {exc}") from exc


def _match(prev: List[LinkCurve], cur: List[LinkCurve], p) -> List[LinkCurve]:
    """Relabel ``cur`` to follow ``prev`` by nearest normalised centroid direction."""
    if len(prev) != len(cur):
        raise TraceError(f"component count changed from {len(prev)} to {len(cur)} at r={cur[0].r:g}")
    dirs_prev = [(c.centroid - p) / c.r for c in prev]
    dirs_cur = [(c.centroid - p) / c.r for c in cur]
    pairs = sorted(
        (float(np.linalg.norm(a - b)), i, j) for i, a in enumerate(dirs_prev) for j, b in enumerate(dirs_cur)
    )
    taken_i, taken_j, out = set(), set(), {}
    for _, i, j in pairs:
        if i in taken_i or j in taken_j:
            continue
        taken_i.add(i)
        taken_j.add(j)
        c = cur[j]
        out[prev[i].component_id] = LinkCurve(c.r, c.points, c.length, prev[i].component_id, c.residual, c.center)
    return [out[k] for k in sorted(out)]


def length_table(
    spec: ImplicitSurfaceSpec,
    r_min: float,
    r_max: float,
    n_levels: int,
    opts: TraceOptions = DEFAULT_OPTIONS,
    jobs: int = 1,
) -> LengthTable:
    """Trace links on a geometric grid and track components across levels."""
    if n_levels < 4:
        raise ValueError("n_levels must be at least 4")
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    grid = geometric_grid(r_min, r_max, n_levels)
    tasks = [(spec, float(r), opts) for r in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            levels = list(pool.map(_trace_level, tasks))
    else:
        levels = [_trace_level(t) for t in tasks]
    p = spec.point
    matched = [levels[0]]
    for cur in levels[1:]:
        matched.append(_match(matched[-1], cur, p))
    rows, curves = [], {}
    for level in matched:
        for c in level:
            rows.append((c.r, c.component_id, c.length, c.residual))
            curves[(c.r, c.component_id)] = c
    return LengthTable(rows=rows, r_grid=grid, ratio=float(grid[0] / grid[1]), curves=curves)


def estimate_eps0(
    spec: ImplicitSurfaceSpec, r_start: float = 1.0, r_stop: float = 1e-3, per_decade: int = 4, opts=DEFAULT_OPTIONS
) -> float:
    """Largest radius below which the component count stays constant for a decade."""
    from dataclasses import replace

    probe = replace(spec, eps0=float("inf"))
    n = int(round(per_decade * math.log10(r_start / r_stop))) + 1
    radii = geometric_grid(r_stop, r_start, n)
    counts = []
    for r in radii:
        try:
            counts.append(len(trace_link(probe, float(r), opts)))
        except TraceError:
            counts.append(-1)
    for i in range(len(radii) - per_decade):
        window = counts[i : i + per_decade + 1]
        if window[0] > 0 and len(set(window)) == 1:
            return float(radii[i])
    return float(r_stop)
