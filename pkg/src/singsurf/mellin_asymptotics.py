"""Asymptotic expansions of sampled lengths and their Mellin transforms.

Expansions live on the lattice ``i in i0 + (1/m) N`` with optional ``r^i log r`` partners.
The Mellin transform ``M(z) = int_0^inf r^z l(r) dr / r`` of a table is computed from a
log-log cubic spline between the samples, the fitted expansion below the smallest
sample (which supplies the meromorphic continuation) and zero beyond the largest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline


class FitError(ValueError):
    pass


class IllConditionedFit(FitError):
    pass


COND_LIMIT = 1e12
LOG_SIGNIFICANCE = 20.0
ZERO_SIGNIFICANCE = 10.0


def _standard_errors(An, res, n):
    dof = max(n - An.shape[1], 1)
    sigma = max(np.linalg.norm(res) / math.sqrt(dof), np.finfo(float).eps)
    try:
        cov = np.linalg.pinv(An.T @ An)
    except np.linalg.LinAlgError:
        return np.full(An.shape[1], np.inf)
    return sigma * np.sqrt(np.abs(np.diag(cov)))


@dataclass(frozen=True)
class Term:
    i: Fraction
    j: int
    C: float
    se: float = 0.0


@dataclass(frozen=True)
class AsymptoticExpansion:
    lattice_m: int
    terms: Tuple[Term, ...]
    fit_residual: float
    r_range: Tuple[float, float]
    has_log: bool
    n_samples: int = 0
    condition: float = 1.0

    @property
    def gamma(self) -> Fraction:
        return min(t.i for t in self.terms)

    @property
    def leading(self) -> Tuple[Fraction, float, bool]:
        g = self.gamma
        want = 1 if self.has_log else 0
        coeff = next((t.C for t in self.terms if t.i == g and t.j == want), 0.0)
        return g, coeff, self.has_log

    def coefficient(self, i, j=0) -> float:
        i = Fraction(i)
        return next((t.C for t in self.terms if t.i == i and t.j == j), 0.0)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for t in self.terms:
            p = r ** float(t.i)
            out = out + t.C * (p * np.log(r) if t.j else p)
        return out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for t in self.terms:
            i = float(t.i)
            p = r ** (i - 1)
            out = out + t.C * ((i * np.log(r) + 1) * p if t.j else i * p)
        return out

    def mellin_below(self, z, a: float, derivative: bool = False):
        """``int_0^a r^z E(r) dr / r`` in closed form, meromorphic in ``z``.

        With ``derivative`` the z-derivative is returned instead."""
        z = np.asarray(z, dtype=complex)
        la = math.log(a)
        out = np.zeros_like(z)
        for t in self.terms:
            s = z + float(t.i)
            As = np.exp(s * la)
            if t.j == 0:
                v = As / s if not derivative else As * (la / s - 1 / s**2)
            else:
                v = (As * (la / s - 1 / s**2) if not derivative
                     else As * (la * la / s - 2 * la / s**2 + 2 / s**3))
            out = out + t.C * v
        return out

    def to_dict(self) -> dict:
        g, c, h = self.leading
        return {
            "lattice_m": self.lattice_m,
            "terms": [{"i": str(t.i), "j": int(t.j), "C": float(t.C), "se": float(t.se)} for t in self.terms],
            "fit_residual": float(self.fit_residual),
            "r_range": [float(v) for v in self.r_range],
            "leading": {"gamma": str(g), "C": float(c), "has_log": bool(h)},
            "condition": float(self.condition),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        g, c, h = self.leading
        lines = [f"lattice_m: {self.lattice_m}",
                 f"r_range: {self.r_range[0]:.6g} .. {self.r_range[1]:.6g}",
                 f"fit_residual: {self.fit_residual:.3e}",
                 f"leading: gamma={g} C={c:.12g} has_log={str(h).lower()}",
                 "      i  j  C"]
        for t in self.terms:
            lines.append(f"{str(t.i):>7}  {t.j}  {t.C:.12g}")
        return "\n".join(lines) + "\n"


def _lattice(m: int, n_terms: int, i0: Fraction) -> List[Fraction]:
    return [i0 + Fraction(k, m) for k in range(n_terms)]


def _solve(A, b, labels):
    norms = np.linalg.norm(A, axis=0)
    An = A / norms
    sv = np.linalg.svd(An, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    c, *_ = np.linalg.lstsq(An, b, rcond=None)
    res = b - An @ c
    return c, norms, An, res, cond


def fit_expansion(r, l, m: Optional[int] = None, n_terms: int = 4, allow_log: bool = True,
                  gamma_min=1, lattice_candidates: Sequence[int] = range(1, 7),
                  anchor: bool = True) -> AsymptoticExpansion:
    """Weighted least-squares fit ``l ~ sum C_ij r^i (log r)^j``.

    ``n_terms`` counts lattice exponents; with ``allow_log`` each exponent brings a log
    partner.  When ``m`` is None the lattice is chosen over ``lattice_candidates`` by the
    score ``residual * (1 + 0.1 * nonzero_terms)``, ties going to the smaller ``m``; each
    candidate spans the same exponent range as the ``m = 1`` fit, i.e. uses
    ``(n_terms - 1) * m + 1`` exponents, and candidates too ill-conditioned are skipped.

    With ``anchor`` the first exponent is the lattice point nearest the log-log slope at
    the smallest sample (never below ``gamma_min``), so a truncated basis cannot trade
    its systematic error for spurious low-order terms.
    """
    r = np.asarray(r, dtype=float)
    l = np.asarray(l, dtype=float)
    order = np.argsort(r)
    r, l = r[order], l[order]
    if len(np.unique(r)) != len(r):
        raise FitError("r values must be distinct")
    if np.any(r <= 0):
        raise FitError("r values must be positive")
    if m is None:
        best, best_score = None, np.inf
        last_err = None
        for mm in lattice_candidates:
            try:
                fit = fit_expansion(r, l, mm, (n_terms - 1) * mm + 1, allow_log, gamma_min, anchor=anchor)
            except FitError as err:
                last_err = err
                continue
            score = max(fit.fit_residual, 1e-13) * (1 + 0.1 * len(fit.terms))
            if score < best_score * (1 - 1e-9):
                best, best_score = fit, score
        if best is None:
            raise last_err or FitError("no lattice could be fitted")
        return best

    if len(r) < 3 * n_terms:
        raise FitError(f"need at least {3 * n_terms} samples for {n_terms} terms")
    if math.log10(r[-1] / r[0]) < 1.5 - 1e-9:
        raise FitError("samples must span at least 1.5 decades of r")

    i0 = Fraction(gamma_min)
    if anchor:
        slope = float(local_exponents(r[:5], l[:5])[0])
        i0 = max(i0, Fraction(round(slope * m), m))
    r_scale = r[-1]
    rho = r / r_scale
    labels = []
    cols = []
    for i in _lattice(m, n_terms, i0):
        p = rho ** float(i)
        if allow_log:
            cols.append(p * np.log(rho))
            labels.append((i, 1))
        cols.append(p)
        labels.append((i, 0))
    # weight by the leading power so every decade counts equally, without dividing by l
    w = rho ** (-float(i0))
    w = w / np.max(np.abs(l * w))
    A = np.column_stack(cols) * w[:, None]
    b = l * w

    c, norms, An, res, cond = _solve(A, b, labels)
    if cond > COND_LIMIT:
        raise IllConditionedFit(
            f"condition estimate {cond:.2e} exceeds {COND_LIMIT:.0e}; reduce n_terms or widen the r range")
    n = len(r)
    active = list(range(len(labels)))
    # backward elimination: drop the least significant column until every survivor
    # stands above ZERO_SIGNIFICANCE standard errors
    while True:
        se_n = _standard_errors(An, res, n)
        signif = np.abs(c) / np.maximum(se_n, 1e-300)
        k = int(np.argmin(signif))
        if signif[k] >= ZERO_SIGNIFICANCE or len(active) == 1:
            break
        del active[k]
        c, norms, An, res, cond = _solve(A[:, active], b, [labels[a] for a in active])

    # back to unscaled coefficients: rho^i log rho = r_scale^-i (r^i log r - log r_scale r^i)
    raw = {}
    raw_se = {}
    for k, cn, sn in zip(active, c / norms, se_n / norms):
        raw[labels[k]] = cn
        raw_se[labels[k]] = sn
    ls = math.log(r_scale)
    terms = []
    for (i, j), cv in raw.items():
        scale = r_scale ** (-float(i))
        if j == 1:
            terms.append(Term(i, 1, cv * scale, raw_se[(i, j)] * scale))
    for (i, j), cv in raw.items():
        if j == 0:
            scale = r_scale ** (-float(i))
            log_part = raw.get((i, 1), 0.0)
            se = math.hypot(raw_se[(i, j)], raw_se.get((i, 1), 0.0) * ls) * scale
            terms.append(Term(i, 0, (cv - log_part * ls) * scale, se))
    for (i, j) in raw:
        if j == 1 and (i, 0) not in raw:
            scale = r_scale ** (-float(i))
            terms.append(Term(i, 0, -raw[(i, 1)] * ls * scale, raw_se[(i, 1)] * ls * scale))
    terms.sort(key=lambda t: (t.i, t.j))

    # sup of the relative misfit, floored where l passes through zero
    model = np.zeros_like(r)
    for t in terms:
        p = r ** float(t.i)
        model += t.C * (p * np.log(r) if t.j else p)
    fit_residual = float(np.max(np.abs(model - l) / np.maximum(np.abs(l), 1e-8 * np.max(np.abs(l)))))
    gamma = min(t.i for t in terms)
    has_log = False
    if (gamma, 1) in raw:
        # nested comparison: the log column must carry a real share of the fit
        k = [labels[a] for a in active].index((gamma, 1))
        reduced = [a for idx, a in enumerate(active) if idx != k]
        res_without = b - A[:, reduced] @ np.linalg.lstsq(A[:, reduced], b, rcond=None)[0]
        floor = np.finfo(float).eps * math.sqrt(n)
        has_log = np.linalg.norm(res_without) > LOG_SIGNIFICANCE * max(np.linalg.norm(res), floor)
    return AsymptoticExpansion(m, tuple(terms), fit_residual, (float(r[0]), float(r[-1])),
                               bool(has_log), n, float(cond))


def fit_table(table, **fit_kwargs) -> dict:
    """Fit every component of a ``LengthTable``; returns ``{component_id: expansion}``."""
    out = {}
    for cid in table.component_ids:
        r, l = table.series(cid)
        out[cid] = fit_expansion(r, l, **fit_kwargs)
    return out


def default_fit_range(eps0: float, r_min: float = 1e-3, r_max: float = 0.1) -> Tuple[float, float]:
    """Radius window used for catalog fits: two decades capped at half the local radius."""
    return r_min, min(r_max, 0.5 * eps0)


def local_exponents(r, l) -> np.ndarray:
    """Log-log slope ``d log l / d log r`` at each sample (second-order differences)."""
    r = np.asarray(r, float)
    l = np.asarray(l, float)
    order = np.argsort(r)
    return np.gradient(np.log(np.abs(l[order])), np.log(r[order]))


def differentiated_fit_check(r, l, expansion: AsymptoticExpansion) -> float:
    """Sup relative deviation of centered differences of ``l`` from the differentiated
    expansion on the lower half of the r range."""
    r = np.asarray(r, float)
    l = np.asarray(l, float)
    if len(r) < 5:
        raise FitError("need at least 5 samples for differences")
    order = np.argsort(r)
    r, l = r[order], l[order]
    dl = np.gradient(l, r, edge_order=2)
    half = slice(1, max(len(r) // 2, 2))
    model = expansion.derivative(r[half])
    scale = np.maximum(np.abs(model), 1e-300)
    return float(np.max(np.abs(dl[half] - model) / scale))


# --------------------------------------------------------------------------- Mellin

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL2_X, _GL2_W = np.polynomial.legendre.leggauss(32)


def smooth_taper(t):
    """C^2 step: 1 for t <= 0, 0 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    return 1.0 - t**3 * (10 - 15 * t + 6 * t * t)


class TableMellin:
    """Mellin transform of a sampled function with a fitted small-r tail.

    Between samples the table is interpolated by a cubic spline of ``l / r^gamma`` in
    ``log r`` (``gamma`` the leading tail exponent).  ``taper=(t0, t1)`` multiplies it by
    a C^2 step falling from 1 at ``t0 * r_max`` to 0 at ``t1 * r_max``, removing the
    truncation jump.  ``tail="power"`` replaces the expansion below ``r_min`` by ``C r^g``
    matched to the value and log-log slope of the smallest samples.
    """

    def __init__(self, r, l, expansion: Optional[AsymptoticExpansion] = None,
                 taper: Optional[Tuple[float, float]] = None, tail: str = "expansion"):
        r = np.asarray(r, float)
        l = np.asarray(l, float)
        order = np.argsort(r)
        self.r, self.l = r[order], l[order]
        self.u = np.log(self.r)
        self.r_min, self.r_max = float(self.r[0]), float(self.r[-1])
        if tail == "expansion":
            if expansion is None:
                expansion = fit_expansion(self.r, self.l)
            self.tail = expansion
        elif tail == "power":
            g = float(local_exponents(self.r[:3], self.l[:3])[0])
            C = float(self.l[0] / self.r_min**g)
            self.tail = AsymptoticExpansion(1, (Term(Fraction(g).limit_denominator(10**12), 0, C),),
                                            0.0, (self.r_min, self.r_max), False)
        else:
            raise ValueError("tail must be 'expansion' or 'power'")
        self.g = float(self.tail.gamma)
        self.spline = CubicSpline(self.u, self.l / self.r**self.g)
        if taper is not None and not (0 < taper[0] < taper[1] <= 1):
            raise ValueError("taper needs 0 < t0 < t1 <= 1")
        if taper is not None and taper[0] * self.r_max <= self.r_min:
            raise ValueError("taper must start above the smallest sample")
        self.taper = taper
        self._cache = {}

    def _nodes(self, order):
        if order in self._cache:
            return self._cache[order]
        x, w = (_GL_X, _GL_W) if order == 16 else (_GL2_X, _GL2_W)
        a, b = self.u[:-1], self.u[1:]
        mid, half = (a + b) / 2, (b - a) / 2
        uu = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        ww = (half[:, None] * w[None, :]).ravel()
        vals = self.spline(uu) * np.exp(self.g * uu)
        if self.taper is not None:
            t0, t1 = self.taper
            vals = vals * smooth_taper((np.exp(uu) / self.r_max - t0) / (t1 - t0))
        self._cache[order] = (uu, ww * vals)
        return self._cache[order]

    def _table_part(self, z, order=16, derivative=False):
        uu, wv = self._nodes(order)
        z = np.atleast_1d(np.asarray(z, complex))
        ph = np.exp(np.outer(z, uu))
        if derivative:
            ph = ph * uu[None, :]
        return ph @ wv

    def __call__(self, z, derivative: bool = False):
        z = np.asarray(z, complex)
        shape = z.shape
        zf = z.ravel()
        val = self._table_part(zf, derivative=derivative) + self.tail.mellin_below(zf, self.r_min, derivative)
        return val.reshape(shape) if shape else complex(val[0])

    def error_estimate(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        return np.abs(self._table_part(z, 16) - self._table_part(z, 32))


def mellin_numeric(r, l, z, expansion: Optional[AsymptoticExpansion] = None,
                   continuation: bool = False, taper=None) -> Tuple[complex, float]:
    """``(M(z), error estimate)`` for a table; ``Re z <= 0`` needs ``continuation=True``."""
    z = complex(z)
    if z.real <= 0 and not continuation:
        raise ValueError("Re z <= 0 requires continuation=True")
    tm = TableMellin(r, l, expansion, taper)
    return tm(z), float(tm.error_estimate(z)[0])


@dataclass(frozen=True)
class Pole:
    z0: complex
    order: int
    leading: complex
    residue: complex = 0j


@dataclass(frozen=True)
class MellinPoleSet:
    poles: Tuple[Pole, ...]
    offset: float = 0.0

    def to_dict(self):
        return {"offset": self.offset, "poles": [
            {"z0": [p.z0.real, p.z0.imag], "order": p.order,
             "leading": [p.leading.real, p.leading.imag], "residue": [p.residue.real, p.residue.imag]}
            for p in self.poles]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _box_integrals(fn, x0, x1, h, funcs, n=48):
    """Contour integrals ``(1/2 pi i) int g(z) dz`` over the rectangle ``[x0, x1] x [-h, h]``
    for every ``g`` in ``funcs(z, fn_values)``."""
    x, w = np.polynomial.legendre.leggauss(n)
    corners = [complex(x0, -h), complex(x1, -h), complex(x1, h), complex(x0, h), complex(x0, -h)]
    zs, dz = [], []
    for a, b in zip(corners[:-1], corners[1:]):
        zs.append((a + b) / 2 + (b - a) / 2 * x)
        dz.append((b - a) / 2 * w)
    zs = np.concatenate(zs)
    dz = np.concatenate(dz)
    vals = fn(zs)
    return [np.sum(g * dz) / (2j * np.pi) for g in funcs(zs, vals)]


def _box_poles(transform, x0, x1, h, rel_tol):
    """Poles inside one box from contour moments ``I_k = (1/2 pi i) int (z-c)^k M dz``.

    Entire parts integrate to zero, so only the principal parts survive.  One pole of
    order at most two at ``c + d`` gives ``I_k = b d^k + a k d^(k-1)``; the order-2 Prony
    recurrence of ``I_0..I_3`` has ``d`` as a double root for a double pole, and the Hankel
    matrix drops to rank one for a simple pole.
    """
    c = (x0 + x1) / 2
    scale_holder = {}

    def funcs(z, v):
        scale_holder["max"] = float(np.max(np.abs(v)))
        w = z - c
        return (v, w * v, w**2 * v, w**3 * v)

    I0, I1, I2, I3 = _box_integrals(transform, x0, x1, h, funcs)
    width = x1 - x0
    noise = rel_tol * scale_holder["max"] * width
    if max(abs(I0), abs(I1) / width) <= noise:
        return []
    det = I0 * I2 - I1 * I1
    if abs(det) <= 1e-6 * (abs(I0 * I2) + abs(I1) ** 2):
        d = I1 / I0
        return [Pole(complex(c + d), 1, complex(I0), complex(I0))]
    p0, p1 = np.linalg.solve(np.array([[I0, I1], [I1, I2]]), -np.array([I2, I3]))
    t1, t2 = np.roots([1, p1, p0])
    if abs(t1 - t2) < 0.02 * width:
        d = (t1 + t2) / 2
        return [Pole(complex(c + d), 2, complex(I1 - I0 * d), complex(I0))]
    # two simple poles in one box: weights from the Vandermonde system
    wts = np.linalg.solve(np.array([[1, 1], [t1, t2]]), np.array([I0, I1]))
    return [Pole(complex(c + t), 1, complex(wv), complex(wv)) for t, wv in sorted(zip((t1, t2), wts),
                                                                              key=lambda q: q[0].real)]


def find_poles(transform: Callable, x_range: Tuple[float, float], width: float = 0.1,
               h: float = 0.05, rel_tol: float = 1e-7) -> MellinPoleSet:
    """Locate poles near the real axis in ``x_range`` with contour moments on thin boxes.

    Two tilings offset by half a box are scanned; each pole keeps the estimate from the
    box whose centre it is closest to, away from the contour."""
    lo, hi = x_range
    found: List[Tuple[float, Pole]] = []
    for shift in (0.0, width / 2):
        edges = np.arange(lo - shift, hi + width, width)
        for x0, x1 in zip(edges[:-1], edges[1:]):
            for p in _box_poles(transform, x0, x1, h, rel_tol):
                if not (x0 <= p.z0.real <= x1 and abs(p.z0.imag) < h):
                    continue
                found.append((abs(p.z0.real - (x0 + x1) / 2), p))
    found.sort(key=lambda fp: fp[0])
    poles: List[Pole] = []
    for _, p in found:
        if all(abs(p.z0 - q.z0) > width / 4 for q in poles):
            poles.append(p)
    poles.sort(key=lambda p: -p.z0.real)
    return MellinPoleSet(tuple(poles))


def table_poles(tm: TableMellin, x_range=None, width: float = 0.1) -> MellinPoleSet:
    if x_range is None:
        imax = max(float(t.i) for t in tm.tail.terms)
        imin = min(float(t.i) for t in tm.tail.terms)
        x_range = (-imax - 0.5, -imin + 0.5)
    return find_poles(lambda z: tm(z), x_range, width)


def poles_to_terms(poleset: MellinPoleSet, max_den: int = 12, log_tol: float = 1e-3) -> AsymptoticExpansion:
    """Term skeleton from poles: order-``mu`` pole at ``z0`` gives ``r^(-z0) (log r)^(mu-1)``
    and lower log powers; coefficients from the Laurent data.  The leading term counts
    as logarithmic only when its log coefficient exceeds ``log_tol`` times its partner."""
    if not poleset.poles:
        raise ValueError("empty pole set")
    terms = []
    dens = []
    for p in poleset.poles:
        i = Fraction(-p.z0.real).limit_denominator(max_den)
        dens.append(i.denominator)
        if p.order >= 2:
            # int_0^a r^(s-1) log r dr = a^s (log a / s - 1/s^2): leading coefficient is -C
            terms.append(Term(i, 1, float(-p.leading.real)))
            terms.append(Term(i, 0, float(p.residue.real)))
        else:
            terms.append(Term(i, 0, float(p.leading.real)))
    terms.sort(key=lambda t: (t.i, t.j))
    m = math.lcm(*dens)
    lead = [t for t in terms if t.i == terms[0].i]
    c1 = sum(abs(t.C) for t in lead if t.j == 1)
    c0 = sum(abs(t.C) for t in lead if t.j == 0)
    has_log = c1 > log_tol * c0
    return AsymptoticExpansion(m, tuple(terms), float("nan"), (0.0, 0.0), has_log)


# ----------------------------------------------------------- monomial continuation

@dataclass(frozen=True)
class Bump1D:
    """Even C^2 bump equal to 1 on ``[-inner, inner]`` and 0 beyond ``outer``."""

    inner: float = 0.5
    outer: float = 1.0

    def __call__(self, y):
        return smooth_taper((np.abs(y) - self.inner) / (self.outer - self.inner))

    def taylor_at_zero(self, K: int) -> List[float]:
        return [1.0] + [0.0] * (K - 1)


@dataclass(frozen=True)
class PoleDescriptor:
    z: complex
    order: int
    message: str = "requested point is a pole"


def _axis_transform(w: complex, chi: Bump1D) -> complex:
    """Continued ``int_R |y|^w chi(y) dy`` via Taylor subtraction at 0."""
    K = max(0, int(math.floor(-w.real)) + 1)
    taylor = chi.taylor_at_zero(max(K, 1))

    def sub(y):
        s = sum(taylor[k] * y**k / math.factorial(k) for k in range(K))
        return chi(y) - s

    def integrand(y, part):
        v = y**w * sub(y) if y > 0 else 0.0
        return v.real if part == 0 else v.imag

    pts = [p for p in (chi.inner, chi.outer) if 0 < p < 1]
    inner = complex(*(integrate.quad(integrand, 0, 1, args=(p,), points=pts or None,
                                     epsabs=1e-14, epsrel=1e-12, limit=200)[0] for p in (0, 1)))
    poles_part = sum(taylor[k] / (math.factorial(k) * (w + k + 1)) for k in range(K))
    outer = 0j
    if chi.outer > 1:
        pts2 = [p for p in (chi.inner,) if p > 1]
        outer = complex(*(integrate.quad(lambda y, p=p: (y**w * chi(y)).real if p == 0 else (y**w * chi(y)).imag,
                                         1, chi.outer, points=pts2 or None, epsabs=1e-14, epsrel=1e-12)[0]
                          for p in (0, 1)))
    return 2 * (inner + poles_part + outer)


def _axis_poles(a: float, delta: float, chi: Bump1D, z_range=(-10.0, 0.0)):
    """Poles in z of one axis factor: ``a z + delta = -k - 1`` with nonzero Taylor data."""
    out = []
    if a == 0:
        return out
    taylor = chi.taylor_at_zero(64)
    for k, t in enumerate(taylor):
        if t == 0:
            continue
        z = (-k - 1 - delta) / a
        if z_range[0] <= z <= z_range[1]:
            out.append((z, 2 * t / (math.factorial(k) * a)))
    return out


def monomial_mellin_continuation(exponents: Sequence[Tuple[float, float]], z: complex,
                                 chi: Optional[Bump1D] = None):
    """Value at ``z`` of ``int prod_k |y_k|^(a_k z + delta_k) chi(y_k) dy`` (at most two axes),
    continued meromorphically.  At a pole a :class:`PoleDescriptor` is returned."""
    chi = chi or Bump1D()
    if not 1 <= len(exponents) <= 2:
        raise ValueError("one or two axes supported")
    z = complex(z)
    order = 0
    for a, d in exponents:
        for zp, _ in _axis_poles(a, d, chi, (z.real - 1, z.real + 1)):
            if abs(zp - z) < 1e-12:
                order += 1
    if order:
        return PoleDescriptor(z, order)
    val = 1 + 0j
    for a, d in exponents:
        val *= _axis_transform(a * z + d, chi)
    return val


def monomial_poles(exponents: Sequence[Tuple[float, float]], chi: Optional[Bump1D] = None,
                   z_range=(-10.0, 0.0)) -> MellinPoleSet:
    """Pole report for :func:`monomial_mellin_continuation`: coinciding axis poles add orders."""
    chi = chi or Bump1D()
    found = {}
    for a, d in exponents:
        for zp, res in _axis_poles(a, d, chi, z_range):
            key = round(zp, 12)
            found.setdefault(key, []).append(res)
    poles = []
    for zp in sorted(found, reverse=True):
        n = len(found[zp])
        lead = np.prod(found[zp])
        if n < len(exponents):
            # remaining axes are regular here; multiply in their value
            others = [e for e in exponents if round((-1 - e[1]) / e[0], 12) != zp] if n == 1 else []
            for a, d in others:
                lead = lead * _axis_transform(a * zp + d, chi)
        poles.append(Pole(complex(zp), n, complex(lead), complex(lead) if n == 1 else 0j))
    return MellinPoleSet(tuple(poles))


def case_two_transform(z: complex, support=(0.5, 1.0)) -> complex:
    """``int_0^inf r^z phi(r) dr / r`` for the smooth bump ``phi = exp(-1/(1-t^2))`` on
    ``support`` (``t`` the scaled offset from its midpoint).  With no vanishing inside
    the support this is entire in ``z`` and decays faster than any power on vertical lines."""
    r0, r1 = support
    mid, half = (r0 + r1) / 2, (r1 - r0) / 2
    z = complex(z)
    n = max(128, int(4 * abs(z.imag) * math.log(r1 / r0)) + 128)
    x, w = np.polynomial.legendre.leggauss(n)
    # integrate in t where the bump is nicely resolved
    t = x
    r = mid + half * t
    phi = np.exp(-1.0 / np.maximum(1 - t * t, 1e-300))
    vals = np.exp((z - 1) * np.log(r)) * phi * half
    return complex(np.sum(vals * w))


@dataclass(frozen=True)
class DecayResult:
    slope: float
    I: Tuple[float, ...]
    values: Tuple[float, ...]
    noise_floor_reached: bool

    @property
    def passed(self) -> bool:
        return self.slope <= -1


def decay_slope(fn: Callable, re_z: float, I_list: Sequence[float], noise=None) -> DecayResult:
    I = np.asarray(I_list, float)
    if len(I) < 4 or np.any(np.diff(I) <= 0) or I[0] < 1:
        raise ValueError("need at least 4 increasing values >= 1")
    vals = np.array([abs(fn(complex(re_z, t))) for t in I])
    floor = False
    if noise is not None:
        nz = np.array([noise(complex(re_z, t)) for t in I])
        ok = vals > 100 * nz
        floor = not bool(np.all(ok))
        if ok.sum() >= 2:
            I, vals = I[ok], vals[ok]
    slope = float(np.polyfit(np.log(I), np.log(vals), 1)[0])
    return DecayResult(slope, tuple(float(v) for v in I), tuple(float(v) for v in vals), floor)


def decay_check(r, l, re_z: float, I_list: Sequence[float], expansion=None,
                taper: Optional[Tuple[float, float]] = (0.5, 1.0)) -> DecayResult:
    """Log-log slope of ``|M(re_z + iI)|`` against ``I``.

    By default the table is tapered to zero at ``r_max`` so the slope reflects the
    function rather than the artificial truncation jump; ``taper=None`` keeps the jump."""
    tm = TableMellin(r, l, expansion, taper)
    return decay_slope(lambda z: tm(z), re_z, I_list,
                       noise=lambda z: float(tm.error_estimate(z)[0]) + 1e-15 * abs(tm(z)))
