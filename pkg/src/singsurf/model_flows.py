"""The model curve family ``x^a y^b = r`` in the first quadrant.

Curves are parametrized by ``s = x - y``; ``Psi(r, s) = (x, y)`` is the point on
the level ``r`` with that difference.  When one exponent vanishes the curves are
straight lines and ``Psi`` has an explicit form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .surface_model import SemiRiemannianMetric2D


class ModelError(ValueError):
    pass


def _check_exponents(a: int, b: int) -> None:
    if a < 0 or b < 0 or a + b <= 0:
        raise ModelError(f"need nonnegative exponents with a+b > 0, got ({a}, {b})")


def hyperbola_point(a: int, b: int, r: float, s: float) -> Tuple[float, float]:
    """Return ``(x, y)`` with ``x - y = s`` and ``x^a y^b = r`` (x, y > 0 off the axis branches)."""
    _check_exponents(a, b)
    if r <= 0:
        raise ModelError("r must be positive")
    if a == 0:
        return float(s), r ** (1.0 / b)
    if b == 0:
        return r ** (1.0 / a), -float(s)

    def y_of(x):
        return (r / x**a) ** (1.0 / b)

    # g(u) = e^u - y(e^u) - s is strictly increasing in u = log x
    def g(u):
        x = math.exp(u)
        return x - y_of(x) - s

    u0 = math.log(max(r ** (1.0 / (a + b)), abs(s), 1e-300))
    lo, hi = u0 - 1.0, u0 + 1.0
    while g(lo) > 0:
        lo -= 2 * (u0 - lo + 1)
    while g(hi) < 0:
        hi += 2 * (hi - u0 + 1)
    u = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    x = math.exp(u)
    return x, y_of(x)


def psi_r(a: int, b: int, r: float, s: float) -> np.ndarray:
    """Derivative of ``Psi`` in ``r`` at fixed ``s``."""
    _check_exponents(a, b)
    if a == 0:
        return np.array([0.0, r ** (1.0 / b - 1.0) / b])
    if b == 0:
        return np.array([r ** (1.0 / a - 1.0) / a, 0.0])
    x, y = hyperbola_point(a, b, r, s)
    v = flow_derivative(a, b, x, y)
    return np.array([v, v])


def psi_s(a: int, b: int, x: float, y: float) -> np.ndarray:
    """Derivative of ``Psi`` in ``s`` at fixed ``r``, written at the point ``(x, y)``."""
    if a == 0:
        return np.array([1.0, 0.0])
    if b == 0:
        return np.array([0.0, -1.0])
    d = b * x + a * y
    return np.array([b * x / d, -a * y / d])


def flow_derivative(a: int, b: int, x: float, y: float) -> float:
    """Common value ``x_r = y_r = r^{-1} (a/x + b/y)^{-1}`` with ``r = x^a y^b``.

    On an axis branch only one coordinate moves; its rate is returned.
    """
    _check_exponents(a, b)
    if x <= 0 or y <= 0:
        raise ModelError("flow_derivative needs x, y > 0")
    r = x**a * y**b
    return 1.0 / (r * (a / x + b / y))


@dataclass(frozen=True)
class BoundResult:
    a: int
    b: int
    sup: float
    argmax: Tuple[float, float]
    n_points: int

    @property
    def passed(self) -> bool:
        return self.sup <= 1 + 1e-9


def verify_model_bound(a: int, b: int, n_r: int = 200, n_s: int = 200,
                       r_range=(1e-6, 1.0), s_max: float = 1.0) -> BoundResult:
    """Supremum of ``|Psi_r| r^{1 - 1/(a+b)}`` over a geometric-in-r, uniform-in-s grid."""
    _check_exponents(a, b)
    rs = np.geomspace(r_range[0], r_range[1], n_r, endpoint=False)
    ss = np.linspace(-s_max, s_max, n_s)
    expo = 1.0 - 1.0 / (a + b)
    best, arg = -1.0, (0.0, 0.0)
    for r in rs:
        for s in ss:
            val = float(np.linalg.norm(psi_r(a, b, r, s))) * r**expo
            if val > best:
                best, arg = val, (float(r), float(s))
    return BoundResult(a, b, best, arg, n_r * n_s)


@dataclass(frozen=True)
class Cutoff:
    """Radial C^2 bump: 1 on ``|q| <= inner``, 0 beyond ``outer``, quintic smoothstep between."""

    inner: float = 0.5
    outer: float = 1.0

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ModelError("cutoff needs 0 < inner < outer")

    def __call__(self, x, y):
        rho = np.hypot(x, y)
        t = np.clip((rho - self.inner) / (self.outer - self.inner), 0.0, 1.0)
        return 1.0 - t**3 * (10 - 15 * t + 6 * t * t)


@dataclass(frozen=True)
class ModelFamily:
    a: int
    b: int
    metric: SemiRiemannianMetric2D = field(default_factory=SemiRiemannianMetric2D.euclidean)
    cutoff: Cutoff = field(default_factory=Cutoff)

    def __post_init__(self):
        _check_exponents(self.a, self.b)

    @property
    def is_axis(self) -> bool:
        return self.a == 0 or self.b == 0

    @classmethod
    def from_config(cls, cfg: dict) -> "ModelFamily":
        """Build from a mapping with keys ``a``, ``b``, optional ``metric: {e, f, g}`` and
        ``cutoff: {inner, outer}``."""
        m = cfg.get("metric") or {}
        metric = SemiRiemannianMetric2D.from_strings(str(m.get("e", "1")), str(m.get("f", "0")),
                                                      str(m.get("g", "1")))
        c = cfg.get("cutoff") or {}
        cutoff = Cutoff(float(c.get("inner", 0.5)), float(c.get("outer", 1.0)))
        return cls(int(cfg["a"]), int(cfg["b"]), metric, cutoff)


_QUAD = dict(epsabs=0.0, epsrel=1e-11, limit=400)


def _crossings(rho_fn, lo, hi, levels, n=400):
    grid = np.linspace(lo, hi, n)
    vals = rho_fn(grid)
    out = []
    for lev in levels:
        d = vals - lev
        for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]:
            out.append(brentq(lambda t: rho_fn(t) - lev, grid[i], grid[i + 1], xtol=1e-14))
    return sorted(out)


def weighted_length(family: ModelFamily, r: float, mirrored: bool = False) -> float:
    """Cut-off length ``int |psi_s|_h chi(psi) ds`` of the level curve ``x^a y^b = r``.

    For ``a, b > 0`` the first-quadrant branch is integrated in ``u = log x``, where the
    integrand ``|(x, -a y / b)|_h chi`` is smooth and bounded.  ``mirrored`` adds the images
    under the coordinate reflections (the other components of ``|x|^a |y|^b = r``).
    """
    if r <= 0:
        raise ModelError("r must be positive")
    a, b, h, chi = family.a, family.b, family.metric, family.cutoff
    R = chi.outer
    signs = [(1, 1), (-1, 1), (1, -1), (-1, -1)] if mirrored else [(1, 1)]

    if family.is_axis:
        # straight line: y = c (a = 0) or x = c (b = 0), parametrized by t over its full length
        c = r ** (1.0 / (b if a == 0 else a))
        if c >= R:
            return 0.0
        half = math.sqrt(R * R - c * c)
        sign_set = {(1, sy) for _, sy in signs} if a == 0 else {(sx, 1) for sx, _ in signs}
        total = 0.0
        for sx, sy in sorted(sign_set):
            if a == 0:
                pt = lambda t: (t, sy * c)
                vec = (1.0, 0.0)
            else:
                pt = lambda t: (sx * c, t)
                vec = (0.0, 1.0)

            def f(t, pt=pt, vec=vec):
                x, y = pt(t)
                return float(h.norm(x, y, *vec) * chi(x, y))

            pts = _crossings(lambda t: np.hypot(*pt(t)), -half, half, [chi.inner])
            total += integrate.quad(f, -half, half, points=pts or None, **_QUAD)[0]
        return total

    u_lo = math.log((r / R**b) ** (1.0 / a))
    u_hi = math.log(R)
    if u_lo >= u_hi:
        return 0.0

    def xy(u):
        x = np.exp(u)
        return x, (r / x**a) ** (1.0 / b)

    total = 0.0
    for sx, sy in signs:
        def f(u, sx=sx, sy=sy):
            x, y = xy(u)
            return float(h.norm(sx * x, sy * y, sx * x, -sy * a * y / b) * chi(x, y))

        pts = _crossings(lambda u: np.hypot(*xy(u)), u_lo, u_hi, [chi.inner, R])
        total += integrate.quad(f, u_lo, u_hi, points=pts or None, **_QUAD)[0]
    return total


def measure_identity_check(family: ModelFamily, r_interval, s_interval) -> Optional[float]:
    """Relative difference between the two sides of the change of variables

    ``|psi_s|_h ds dr/r = |(b x, -a y)|_h dx/x dy/y``

    over the region ``{r in r_interval, s in s_interval}``.  Returns ``None`` for the
    axis families, where the right side degenerates.
    """
    a, b, h = family.a, family.b, family.metric
    if family.is_axis:
        return None
    r0, r1 = r_interval
    s0, s1 = s_interval
    opts = dict(epsabs=0.0, epsrel=1e-10)

    def lhs_integrand(r, s):
        x, y = hyperbola_point(a, b, r, s)
        v = psi_s(a, b, x, y)
        return float(h.norm(x, y, v[0], v[1])) / r

    lhs = integrate.dblquad(lhs_integrand, s0, s1, r0, r1, **opts)[0]

    # x increases in both r and s, so its range over the region is spanned by two corners
    x_min = hyperbola_point(a, b, r0, s0)[0]
    x_max = hyperbola_point(a, b, r1, s1)[0]

    def y_lo(x):
        return max(x - s1, (r0 / x**a) ** (1.0 / b))

    def y_hi(x):
        return min(x - s0, (r1 / x**a) ** (1.0 / b))

    def rhs_integrand(y, x):
        if y_hi(x) <= y_lo(x):
            return 0.0
        return float(h.norm(x, y, b * x, -a * y)) / (x * y)

    # kinks of the inner limits, where a level curve meets a diagonal
    kinks = sorted({hyperbola_point(a, b, r, s)[0] for r in (r0, r1) for s in (s0, s1)})
    rhs = 0.0
    for xa, xb in zip(kinks[:-1], kinks[1:]):
        rhs += integrate.dblquad(rhs_integrand, xa, xb, y_lo, lambda x: max(y_hi(x), y_lo(x)), **opts)[0]
    assert kinks[0] == x_min and kinks[-1] == x_max
    return abs(lhs - rhs) / abs(rhs)
