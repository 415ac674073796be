"""Monomialization of plane polynomial germs by iterated point blowups.

Everything here is exact.  A chart carries the composite map back to the original
coordinates and the total transform of the germ; leaves record, for every point over
the origin where the total transform is locally ``unit * monomial``, the exponents in
local coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import sympy

from .polynomial import Polynomial

UV = ("x", "y")
_X = Polynomial.variable(UV, "x")
_Y = Polynomial.variable(UV, "y")
_T = sympy.Symbol("t")


class ResolutionError(RuntimeError):
    """Raised when monomialization cannot finish; ``partial`` holds the charts built so far."""

    def __init__(self, message: str, partial: Optional["ResolutionReport"] = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class BlowupChart:
    id: int
    parent: Optional[Tuple[int, int]]  # (parent id, branch); branch 0 = (x, x*y), 1 = (x*y, y)
    translation: Fraction  # y-shift of a branch-0 chart onto a point of the exceptional curve
    substitution: Tuple[Polynomial, Polynomial]  # parent coordinates in terms of this chart
    coord_map: Tuple[Polynomial, Polynomial]  # original coordinates in terms of this chart
    transformed: Polynomial
    depth: int
    status: str  # "monomial", "transverse" or "blown-up"
    monomial_part: Optional[Tuple[int, int]] = None
    unit_part: Optional[Polynomial] = None

    @property
    def monomialized(self) -> bool:
        return self.status in ("monomial", "transverse")


@dataclass(frozen=True)
class ResolvedPoint:
    """A point over the origin where the total transform is a unit times a monomial."""

    chart_id: int
    location: str
    kind: str  # "monomial", "transverse", "generic"
    exponents: Tuple[int, int]
    tracked: Tuple[Tuple[int, int], ...] = ()
    on_exceptional: bool = True


@dataclass
class ResolutionReport:
    germ: Polynomial
    tracked: Tuple[Polynomial, ...]
    charts: List[BlowupChart] = field(default_factory=list)
    points: List[ResolvedPoint] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return max((c.depth for c in self.charts), default=0)

    def _alpha_points(self):
        pts = [p for p in self.points if p.on_exceptional and p.kind != "generic"]
        return pts or [p for p in self.points if p.kind != "generic"]

    @property
    def model_charts(self) -> List[Tuple[int, int]]:
        """Exponent pairs of the local monomial models used for the rate and constant estimates."""
        return [p.exponents for p in self._alpha_points()]

    @property
    def lattice_m(self) -> int:
        exps = [e for p in self._alpha_points() for e in p.exponents if e > 0]
        return math.lcm(*exps) if exps else 1

    @property
    def alpha(self) -> Fraction:
        return predict_alpha(self)

    def chart(self, cid: int) -> BlowupChart:
        return self.charts[cid]

    def to_text(self) -> str:
        lines = [f"germ: {self.germ}"]
        for t in self.tracked:
            lines.append(f"tracked: {t}")
        for c in self.charts:
            parent = "-" if c.parent is None else f"{c.parent[0]}/{c.parent[1]}"
            sub = ", ".join(str(s) for s in c.substitution)
            lines.append(f"chart {c.id}: parent {parent}, depth {c.depth}, substitution ({sub})")
            lines.append(f"  map: ({c.coord_map[0]}, {c.coord_map[1]})")
            lines.append(f"  transformed: {c.transformed}")
            if c.monomialized:
                lines.append(f"  {c.status}: x^{c.monomial_part[0]} y^{c.monomial_part[1]} * ({c.unit_part})")
            else:
                lines.append("  blown up at origin")
        for p in self.points:
            extra = "".join(f" tracked{t}" for t in p.tracked)
            lines.append(f"point chart {p.chart_id} {p.location}: {p.kind} {p.exponents}{extra}")
        lines.append(f"depth: {self.depth}")
        lines.append(f"lattice_m: {self.lattice_m}")
        lines.append(f"alpha: {self.alpha}")
        return "\n".join(lines) + "\n"


def blowup_point(P: Polynomial, center: Sequence = (0, 0)) -> Tuple[Polynomial, Polynomial]:
    """The two standard charts of the blowup of the plane at ``center``."""
    cx, cy = (Fraction(c) for c in center)
    chart0 = P.compose([_X + cx, _X * _Y + cy])
    chart1 = P.compose([_X * _Y + cx, _Y + cy])
    return chart0, chart1


def _to_sympy(coeffs: Sequence[Fraction]) -> sympy.Poly:
    return sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in reversed(coeffs)], _T, domain="QQ")


def _grad_at_origin(U: Polynomial) -> Tuple[Fraction, Fraction]:
    return U.terms.get((1, 0), Fraction(0)), U.terms.get((0, 1), Fraction(0))


class _Resolver:
    def __init__(self, germ: Polynomial, tracked: Sequence[Polynomial], max_depth: int):
        self.factors = (germ, *tracked)
        self.product = germ
        for t in tracked:
            self.product = self.product * t
        self.max_depth = max_depth
        self.report = ResolutionReport(germ, tuple(tracked))

    def _add_chart(self, **kw) -> int:
        cid = len(self.report.charts)
        self.report.charts.append(BlowupChart(id=cid, **kw))
        return cid

    def _factor_exponents(self, coord_map, special: Optional[int] = None):
        """Monomial content of each factor; ``special`` marks the axis the smooth branch replaces."""
        out = []
        for F in self.factors:
            Fm = F.compose(list(coord_map))
            e = Fm.monomial_content()
            rest = Fm.divide_monomial(e)
            if rest.constant_term() == 0:
                if special is None:
                    raise AssertionError("factor is not monomial at a monomial point")
                e = (e[0], 1) if special == 1 else (1, e[1])
            out.append(tuple(e))
        return out

    def node(self, coord_map, substitution, parent, translation, depth, on_exc) -> None:
        G = self.product.compose(list(coord_map))
        P_t = self.factors[0].compose(list(coord_map))
        i, j = G.monomial_content()
        U = G.divide_monomial((i, j))
        base = dict(parent=parent, translation=translation, substitution=substitution,
                    coord_map=coord_map, transformed=P_t, depth=depth)
        pe = P_t.monomial_content()
        if U.constant_term() != 0:
            cid = self._add_chart(status="monomial", monomial_part=pe,
                                  unit_part=P_t.divide_monomial(pe), **base)
            exps = self._factor_exponents(coord_map)
            self.report.points.append(ResolvedPoint(cid, "origin", "monomial", exps[0], tuple(exps[1:]), on_exc))
            return
        gx, gy = _grad_at_origin(U)
        # a smooth branch transverse to the single divisor through the origin is still normal crossings
        special = None
        if j == 0 and gy != 0:
            special = 1
        elif i == 0 and gx != 0:
            special = 0
        if special is not None:
            cid = self._add_chart(status="transverse", monomial_part=pe,
                                  unit_part=P_t.divide_monomial(pe), **base)
            exps = self._factor_exponents(coord_map, special)
            self.report.points.append(ResolvedPoint(cid, "origin", "transverse", exps[0], tuple(exps[1:]), on_exc))
            return
        if depth >= self.max_depth:
            self._add_chart(status="blown-up", **base)
            raise ResolutionError(f"max_depth {self.max_depth} exceeded", self.report)
        cid = self._add_chart(status="blown-up", **base)
        X, Y = coord_map
        self._chart0(cid, X, Y, depth + 1)
        sub1 = (_X * _Y, _Y)
        self.node((X.compose(list(sub1)), Y.compose(list(sub1))), sub1, (cid, 1), Fraction(0), depth + 1, True)

    def _chart0(self, parent_id, X, Y, depth) -> None:
        sub0 = (_X, _X * _Y)
        map0 = (X.compose(list(sub0)), Y.compose(list(sub0)))
        G0 = self.product.compose(list(map0))
        n = G0.monomial_content()[0]
        w = G0.divide_monomial((n, 0)).restrict(0, 0).univariate_coeffs(1)
        wpoly = _to_sympy(w)
        rational, irrational = [], []
        for q, mult in wpoly.factor_list()[1]:
            if q.degree() == 1:
                t0 = -q.all_coeffs()[1] / q.all_coeffs()[0]
                if t0 != 0:
                    rational.append(Fraction(int(t0.p), int(t0.q)))
            elif q.count_roots() > 0:
                if mult > 1:
                    raise ResolutionError(
                        f"singular point of the strict transform at an irrational root of {q.as_expr()}",
                        self.report)
                irrational.append(q)

        self.node(map0, sub0, (parent_id, 0), Fraction(0), depth, True)
        for t0 in sorted(rational):
            sub = (_X, _X * (_Y + t0))
            self.node((X.compose(list(sub)), Y.compose(list(sub))), sub, (parent_id, 0), t0, depth, True)

        # generic points of the exceptional curve, and simple irrational crossings
        chart0_id = next(c.id for c in reversed(self.report.charts)
                         if c.parent == (parent_id, 0) and c.translation == 0)
        generic = [F.compose(list(map0)).monomial_content()[0] for F in self.factors]
        self.report.points.append(ResolvedPoint(
            chart0_id, "generic", "generic", (generic[0], 0), tuple((g, 0) for g in generic[1:]), True))
        for q in sorted(irrational, key=lambda p: str(p.as_expr())):
            for lo, hi in q.intervals():
                lo, hi = Fraction(str(lo[0])), Fraction(str(lo[1]))
                exps = []
                for F in self.factors:
                    Fm = F.compose(list(map0))
                    k = Fm.monomial_content()[0]
                    wf = _to_sympy(Fm.divide_monomial((k, 0)).restrict(0, 0).univariate_coeffs(1))
                    exps.append((k, 1 if wf.rem(q).is_zero else 0))
                self.report.points.append(ResolvedPoint(
                    chart0_id, f"y in [{lo}, {hi}] root of {q.as_expr()}", "transverse",
                    exps[0], tuple(exps[1:]), True))


def monomialize(P: Polynomial, max_depth: int = 12, track: Iterable[Polynomial] = ()) -> ResolutionReport:
    """Resolve the germ of ``P`` at the origin; ``track`` polynomials are resolved jointly
    and their local exponents are reported at every point."""
    if P.nvars != 2:
        raise ValueError("monomialize works on germs in two variables")
    if P.is_zero():
        raise ValueError("zero polynomial")
    if P.constant_term() != 0:
        raise ValueError("germ must vanish at the origin")
    resolver = _Resolver(P, tuple(track), max_depth)
    ident = (_X, _Y)
    resolver.node(ident, ident, None, Fraction(0), 0, False)
    return resolver.report


def predict_alpha(source: Union[ResolutionReport, Iterable[Tuple[int, int]]]) -> Fraction:
    """``min 1/(a+b)`` over the exponent pairs of the points meeting the exceptional curve."""
    if isinstance(source, ResolutionReport):
        pairs = [p.exponents for p in source._alpha_points()]
    else:
        pairs = list(source)
    pairs = [p for p in pairs if sum(p) > 0]
    if not pairs:
        raise ValueError("no exponent data")
    return min(Fraction(1, a + b) for a, b in pairs)


def verify_consistency(report: ResolutionReport, samples: Sequence[Tuple[Fraction, Fraction]] = ()) -> bool:
    """Check every chart exactly: germ composed with the chart map equals the stored
    transform, and the parent's transform composed with the local substitution agrees."""
    P = report.germ
    for c in report.charts:
        if P.compose(list(c.coord_map)) != c.transformed:
            return False
        if c.parent is not None:
            parent = report.charts[c.parent[0]]
            if parent.transformed.compose(list(c.substitution)) != c.transformed:
                return False
            pm = parent.coord_map
            if tuple(m.compose(list(c.substitution)) for m in pm) != c.coord_map:
                return False
        if c.monomialized:
            a, b = c.monomial_part
            mono = Polynomial(UV, {(a, b): 1})
            if mono * c.unit_part != c.transformed:
                return False
        for pt in samples:
            orig = tuple(m.evaluate(pt) for m in c.coord_map)
            if P.evaluate(orig) != c.transformed.evaluate(pt):
                return False
    return True


def catalog_germ(spec) -> Tuple[Polynomial, Polynomial]:
    """Plane germ of a surface: the slice ``y = p_y`` through the base point in (x, z),
    recentred, together with the squared distance ``x^2 + z^2`` in the same coordinates."""
    px, py, pz = spec.singular_point
    germ = spec.defining.compose([_X + px, Polynomial.constant(UV, py), _Y + pz])
    return germ, _X * _X + _Y * _Y


def link_alpha(report: ResolutionReport) -> Fraction:
    """Rate predicted for links of the germ from the jointly resolved ``r^2`` (first tracked
    polynomial).  An axis where the germ vanishes but ``r^2`` does not is a branch of the
    strict transform; along it ``r^2 ~ e^a`` in the exceptional coordinate ``e``, so ``r ~ e^(a/2)``
    and the candidate is ``2/a``."""
    if not report.tracked:
        raise ValueError("report has no tracked r^2")
    cands = []
    for p in report.points:
        if p.kind == "generic":
            continue
        r2 = p.tracked[0]
        for k in (0, 1):
            if p.exponents[k] > 0 and r2[k] == 0 and r2[1 - k] > 0:
                cands.append(Fraction(2, r2[1 - k]))
    if not cands:
        raise ValueError("no strict-transform branch meets the exceptional curve")
    return min(cands)


def resolve_surface_germ(spec, max_depth: int = 12) -> ResolutionReport:
    germ, r2 = catalog_germ(spec)
    return monomialize(germ, max_depth, track=[r2])
