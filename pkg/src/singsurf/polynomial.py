"""Exact multivariate polynomials over the rationals.

Coefficients are :class:`fractions.Fraction`; terms are stored in a dict keyed by
exponent tuples.  Floating point only enters through :meth:`Polynomial.compile`,
which builds a vectorised numpy evaluator for the numeric modules.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

Exponent = Tuple[int, ...]


class PolynomialParseError(ValueError):
    """Raised for malformed polynomial expressions; carries the 0-based column."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        pointer = f"\n  {text}\n  {' ' * position}^" if text else ""
        super().__init__(f"{message} at position {position}{pointer}")


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot convert {type(value).__name__} to an exact coefficient")


class Polynomial:
    """Immutable polynomial in a fixed, ordered tuple of variables."""

    __slots__ = ("variables", "terms", "_compiled")

    def __init__(self, variables: Sequence[str], terms: Mapping[Exponent, object] | None = None):
        self.variables = tuple(variables)
        n = len(self.variables)
        clean: Dict[Exponent, Fraction] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise ValueError(f"exponent {exps} does not match {n} variables")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = _as_fraction(c)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if not clean[exps]:
                    del clean[exps]
        self.terms: Dict[Exponent, Fraction] = clean
        self._compiled = None

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, variables: Sequence[str], value=0) -> "Polynomial":
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def variable(cls, variables: Sequence[str], name: str) -> "Polynomial":
        idx = list(variables).index(name)
        exps = [0] * len(variables)
        exps[idx] = 1
        return cls(variables, {tuple(exps): 1})

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.variables != self.variables:
                raise ValueError(f"variable mismatch: {self.variables} vs {other.variables}")
            return other
        return Polynomial.constant(self.variables, _as_fraction(other))

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, Fraction(0)) + c
        return Polynomial(self.variables, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.variables, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out: Dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return Polynomial(self.variables, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Polynomial.constant(self.variables, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.variables == other.variables and self.terms == other.terms
        try:
            return self == self._coerce(other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash((self.variables, frozenset(self.terms.items())))

    # queries --------------------------------------------------------------
    @property
    def nvars(self) -> int:
        return len(self.variables)

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def __call__(self, *point):
        return self.evaluate(point)

    def evaluate(self, point: Sequence) -> Fraction:
        """Exact evaluation at a rational (or integer) point."""
        if len(point) != self.nvars:
            raise ValueError(f"point has dimension {len(point)}, expected {self.nvars}")
        pt = [_as_fraction(v) for v in point]
        total = Fraction(0)
        for e, c in self.terms.items():
            term = c
            for v, k in zip(pt, e):
                if k:
                    term *= v ** k
            total += term
        return total

    def derivative(self, var: int | str) -> "Polynomial":
        i = self.variables.index(var) if isinstance(var, str) else var
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                out[tuple(ne)] = c * e[i]
        return Polynomial(self.variables, out)

    def gradient_polys(self) -> Tuple["Polynomial", ...]:
        return tuple(self.derivative(i) for i in range(self.nvars))

    def hessian_polys(self) -> Tuple[Tuple["Polynomial", ...], ...]:
        grads = self.gradient_polys()
        return tuple(tuple(g.derivative(j) for j in range(self.nvars)) for g in grads)

    def compose(self, substitutions: Sequence["Polynomial"]) -> "Polynomial":
        """Substitute polynomial ``substitutions[i]`` for variable ``i``."""
        if len(substitutions) != self.nvars:
            raise ValueError("need one substitution per variable")
        target_vars = substitutions[0].variables
        powers: list = [dict() for _ in substitutions]

        def power(i, k):
            cache = powers[i]
            if k not in cache:
                cache[k] = substitutions[i] ** k
            return cache[k]

        result = Polynomial.constant(target_vars, 0)
        for e, c in self.terms.items():
            term = Polynomial.constant(target_vars, c)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    def monomial_content(self) -> Exponent:
        """Largest monomial dividing every term (componentwise min exponent)."""
        if not self.terms:
            return (0,) * self.nvars
        return tuple(min(e[i] for e in self.terms) for i in range(self.nvars))

    def divide_monomial(self, exps: Exponent) -> "Polynomial":
        out = {}
        for e, c in self.terms.items():
            ne = tuple(a - b for a, b in zip(e, exps))
            if any(v < 0 for v in ne):
                raise ValueError(f"monomial {exps} does not divide term {e}")
            out[ne] = c
        return Polynomial(self.variables, out)

    def restrict(self, var: int, value) -> "Polynomial":
        """Set variable ``var`` to an exact value, keeping the variable slot."""
        value = _as_fraction(value)
        out: Dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            ne = list(e)
            k = ne[var]
            ne[var] = 0
            ne = tuple(ne)
            out[ne] = out.get(ne, Fraction(0)) + c * value ** k
        return Polynomial(self.variables, out)

    def univariate_coeffs(self, var: int) -> list:
        """Coefficients (low to high) when every other variable is absent."""
        coeffs = [Fraction(0)] * (max((e[var] for e in self.terms), default=0) + 1)
        for e, c in self.terms.items():
            if any(k for i, k in enumerate(e) if i != var):
                raise ValueError("polynomial depends on other variables")
            coeffs[e[var]] += c
        return coeffs

    # numerics -------------------------------------------------------------
    def compile(self) -> "PolyBundle":
        if self._compiled is None:
            self._compiled = PolyBundle([self])
        return self._compiled

    def eval_float(self, points) -> np.ndarray:
        """Evaluate at float points of shape ``(..., nvars)``."""
        return self.compile()(points)[..., 0]

    # printing -------------------------------------------------------------
    def to_string(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), key=lambda kv: (-sum(kv[0]), tuple(-k for k in kv[0]))):
            mono = "*".join(
                (v if k == 1 else f"{v}^{k}") for v, k in zip(self.variables, e) if k
            )
            mag = abs(c)
            if mono:
                coef = "" if mag == 1 else f"{_frac_str(mag)}*"
                body = coef + mono
            else:
                body = _frac_str(mag)
            parts.append(("-" if c < 0 else "+", body))
        out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"Polynomial({self.variables!r}, {self.to_string()!r})"


def _frac_str(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"({c.numerator}/{c.denominator})"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_CHARS = set("+-*/^()")


def _tokenize(text: str):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] == "."):
                j += 1
            tokens.append(("num", text[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        elif ch in _TOKEN_CHARS:
            if ch == "*" and text[i : i + 2] == "**":
                tokens.append(("op", "^", i))
                i += 2
            else:
                tokens.append(("op", ch, i))
                i += 1
        else:
            raise PolynomialParseError(f"unexpected character {ch!r}", i, text)
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary | implicit-unary)*
    # unary  := ('+'|'-') unary | power
    # power  := atom ('^' exponent)?
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.variables = tuple(variables)
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise PolynomialParseError(message, tok[2], self.text)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            self.fail("empty expression")
        result = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return result

    def expr(self):
        left = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            right = self.term()
            left = left + right if op == "+" else left - right
        return left

    def term(self):
        left = self.unary()
        while True:
            tok = self.peek()
            if tok[:2] == ("op", "*"):
                self.take()
                left = left * self.unary()
            elif tok[:2] == ("op", "/"):
                self.take()
                divisor = self.unary()
                if divisor.degree() > 0:
                    self.fail("division by a non-constant", tok)
                c = divisor.constant_term()
                if c == 0:
                    self.fail("division by zero", tok)
                left = left * Polynomial.constant(self.variables, 1 / c)
            elif tok[0] in ("num", "name") or tok[:2] == ("op", "("):
                left = left * self.unary()
            else:
                return left

    def unary(self):
        tok = self.peek()
        if tok[:2] == ("op", "-"):
            self.take()
            return -self.unary()
        if tok[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            tok = self.peek()
            negative = False
            if tok[:2] == ("op", "-"):
                negative = True
                self.take()
                tok = self.peek()
            if tok[0] == "op" and tok[1] == "(":
                self.take()
                inner = self.peek()
                if inner[0] != "num":
                    self.fail("exponent must be a non-negative integer literal", inner)
                self.take()
                if self.peek()[:2] == ("op", "/"):
                    self.fail("fractional exponent", self.peek())
                if self.peek()[:2] != ("op", ")"):
                    self.fail("exponent must be a non-negative integer literal", self.peek())
                self.take()
                tok = inner
            elif tok[0] != "num":
                self.fail("exponent must be a non-negative integer literal", tok)
            else:
                self.take()
            if negative:
                self.fail("negative exponent", tok)
            if not tok[1].isdigit():
                self.fail("fractional exponent", tok)
            return base ** int(tok[1])
        return base

    def atom(self):
        tok = self.take()
        kind, value, _ = tok
        if kind == "num":
            try:
                return Polynomial.constant(self.variables, Fraction(value))
            except ValueError:
                self.fail(f"malformed number {value!r}", tok)
        if kind == "name":
            if value not in self.variables:
                self.fail(f"unknown variable {value!r}", tok)
            return Polynomial.variable(self.variables, value)
        if tok[:2] == ("op", "("):
            inner = self.expr()
            if self.peek()[:2] != ("op", ")"):
                self.fail("expected ')'")
            self.take()
            return inner
        self.fail(f"unexpected token {value!r}" if value else "unexpected end of expression", tok)


def parse_polynomial(expr: str, variables: Iterable[str] = ("x", "y", "z")) -> Polynomial:
    """Parse ``expr`` into an exact :class:`Polynomial`.

    Accepts ``+ - * /``, ``^`` (or ``**``) with non-negative integer exponents,
    integer and decimal literals, parentheses and implicit multiplication
    (``2x``).  Division is only allowed by constants.

    >>> parse_polynomial("x^2+y^2-z^2").terms[(2, 0, 0)]
    Fraction(1, 1)
    """
    return _Parser(expr, tuple(variables)).parse()


class PolyBundle:
    """Vectorised float evaluation of several polynomials sharing monomials."""

    def __init__(self, polys: Sequence[Polynomial]):
        if not polys:
            raise ValueError("empty bundle")
        self.nvars = polys[0].nvars
        monos = sorted({e for p in polys for e in p.terms})
        self.exponents = np.array(monos, dtype=int).reshape(len(monos), self.nvars)
        index = {e: i for i, e in enumerate(monos)}
        coef = np.zeros((len(monos), len(polys)))
        for j, p in enumerate(polys):
            for e, c in p.terms.items():
                coef[index[e], j] = float(c)
        self.coef = coef
        self.max_deg = self.exponents.max(axis=0) if len(monos) else np.zeros(self.nvars, int)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.nvars:
            raise ValueError(f"points have dimension {pts.shape[-1]}, expected {self.nvars}")
        lead = pts.shape[:-1]
        if not len(self.exponents):
            return np.zeros(lead + (self.coef.shape[1],))
        monos = np.ones(lead + (len(self.exponents),))
        for i in range(self.nvars):
            d = int(self.max_deg[i])
            if d == 0:
                continue
            table = np.empty(lead + (d + 1,))
            table[..., 0] = 1.0
            for k in range(1, d + 1):
                table[..., k] = table[..., k - 1] * pts[..., i]
            monos *= table[..., self.exponents[:, i]]
        return monos @ self.coef


def gradient(poly: Polynomial, point: Sequence) -> Tuple[Fraction, ...]:
    """Exact gradient of ``poly`` at ``point``."""
    if len(point) != poly.nvars:
        raise ValueError(f"point has dimension {len(point)}, expected {poly.nvars}")
    return tuple(d.evaluate(point) for d in poly.gradient_polys())
