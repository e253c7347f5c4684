"""Exact multivariate polynomial arithmetic and Lie brackets for vector fields.

A polynomial in the state variables x_1..x_n and (optionally) the scalar
control u is stored sparsely as a dictionary mapping monomials to rational
coefficients:

    Monomial = (px, pu)    px: tuple of n exponents, pu: control exponent
    terms    = Dict[Monomial, Fraction]

The zero polynomial is the empty dict; zero coefficients are never stored,
so two polynomials are equal iff their dictionaries are equal.  All
operations are exact over the rationals, which is what makes downstream
rank and subspace-membership decisions reliable.

Vector fields on R^n are tuples of n such polynomials.  The Lie bracket

    [X, Y](x) = Y'(x) X(x) - X'(x) Y(x)

is only defined for pure state fields (pu = 0 everywhere).
"""

from __future__ import annotations

import os
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple, Union

Monomial = Tuple[Tuple[int, ...], int]
Scalar = Union[int, Fraction]

DEFAULT_DEGREE_CAP = 24


def degree_cap() -> int:
    """Total-degree limit for products, overridable via QUADCTRL_DEGREE_CAP."""
    raw = os.environ.get("QUADCTRL_DEGREE_CAP")
    if raw is None:
        return DEFAULT_DEGREE_CAP
    return int(raw)


class DegreeCapExceeded(RuntimeError):
    """Raised when a product would exceed the configured total-degree cap."""


class DimensionMismatch(ValueError):
    pass


class ControlDependence(ValueError):
    """Raised when an operation requires a pure state field but pu > 0."""


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return parse_rational(c)
    raise TypeError(f"cannot build an exact coefficient from {type(c).__name__}")


def parse_rational(text: str) -> Fraction:
    """Parse 'p/q' or decimal strings ('0.25', '-3') into an exact Fraction."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/")
        return Fraction(int(num), int(den))
    return Fraction(text)  # Fraction parses decimal strings exactly


def format_rational(c: Fraction) -> str:
    return str(c)


class Polynomial:
    """Sparse exact polynomial in x_1..x_n and the control u."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Dict[Monomial, Fraction] | None = None):
        self.n = n
        self.terms: Dict[Monomial, Fraction] = {}
        if terms:
            for (px, pu), c in terms.items():
                c = _as_fraction(c)
                if c == 0:
                    continue
                if len(px) != n:
                    raise DimensionMismatch(f"monomial has {len(px)} exponents, dimension is {n}")
                self.terms[(tuple(px), pu)] = c

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n)

    @classmethod
    def const(cls, n: int, c) -> "Polynomial":
        return cls(n, {((0,) * n, 0): _as_fraction(c)})

    @classmethod
    def variable(cls, n: int, i: int) -> "Polynomial":
        px = [0] * n
        px[i] = 1
        return cls(n, {(tuple(px), 0): Fraction(1)})

    @classmethod
    def control(cls, n: int) -> "Polynomial":
        return cls(n, {((0,) * n, 1): Fraction(1)})

    # -- structure ---------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def uses_control(self) -> bool:
        return any(pu > 0 for (_, pu) in self.terms)

    def degree(self) -> int:
        """Max total degree in x and u jointly (-1 for the zero polynomial)."""
        if not self.terms:
            return -1
        return max(sum(px) + pu for (px, pu) in self.terms)

    def sorted_terms(self) -> List[Tuple[Monomial, Fraction]]:
        """Canonical graded-lexicographic term order (u last in the lex key)."""
        return sorted(
            self.terms.items(),
            key=lambda kv: (sum(kv[0][0]) + kv[0][1], kv[0][0], kv[0][1]),
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.n == other.n
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (px, pu), c in self.sorted_terms():
            factors = [str(c)] if abs(c) != 1 or (sum(px) + pu) == 0 else (["-"] if c == -1 else [])
            for i, e in enumerate(px):
                if e:
                    factors.append(f"x{i + 1}" + (f"^{e}" if e > 1 else ""))
            if pu:
                factors.append("u" + (f"^{pu}" if pu > 1 else ""))
            term = "*".join(factors).replace("-*", "-")
            parts.append(term if term not in ("", "-") else str(c))
        return " + ".join(parts).replace("+ -", "- ")

    # -- arithmetic --------------------------------------------------------

    def _check_dim(self, other: "Polynomial"):
        if self.n != other.n:
            raise DimensionMismatch(f"dimensions differ: {self.n} vs {other.n}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_dim(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, Fraction(0)) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Polynomial(self.n, out)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def scale(self, c) -> "Polynomial":
        c = _as_fraction(c)
        if c == 0:
            return Polynomial.zero(self.n)
        return Polynomial(self.n, {m: c * v for m, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check_dim(other)
        cap = degree_cap()
        out: Dict[Monomial, Fraction] = {}
        for (px1, pu1), c1 in self.terms.items():
            for (px2, pu2), c2 in other.terms.items():
                px = tuple(a + b for a, b in zip(px1, px2))
                pu = pu1 + pu2
                if sum(px) + pu > cap:
                    raise DegreeCapExceeded(
                        f"total degree {sum(px) + pu} exceeds cap {cap} "
                        "(set QUADCTRL_DEGREE_CAP to raise it)"
                    )
                m = (px, pu)
                s = out.get(m, Fraction(0)) + c1 * c2
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return Polynomial(self.n, out)

    __rmul__ = __mul__

    # -- calculus ----------------------------------------------------------

    def diff_x(self, i: int) -> "Polynomial":
        out: Dict[Monomial, Fraction] = {}
        for (px, pu), c in self.terms.items():
            e = px[i]
            if e == 0:
                continue
            new = list(px)
            new[i] = e - 1
            out[(tuple(new), pu)] = c * e
        return Polynomial(self.n, out)

    def diff_u(self) -> "Polynomial":
        out: Dict[Monomial, Fraction] = {}
        for (px, pu), c in self.terms.items():
            if pu == 0:
                continue
            out[(px, pu - 1)] = c * pu
        return Polynomial(self.n, out)

    def substitute_u(self, value: "Polynomial") -> "Polynomial":
        """Substitute the control variable by a polynomial in x (and u)."""
        self._check_dim(value)
        powers: List[Polynomial] = [Polynomial.const(self.n, 1)]
        out = Polynomial.zero(self.n)
        for (px, pu), c in self.terms.items():
            while len(powers) <= pu:
                powers.append(powers[-1] * value)
            out = out + powers[pu] * Polynomial(self.n, {(px, 0): c})
        return out

    def evaluate(self, x: Sequence, u=None):
        """Evaluate at a point; exact when all inputs are int/Fraction."""
        if len(x) != self.n:
            raise DimensionMismatch(f"point has length {len(x)}, dimension is {self.n}")
        if self.uses_control and u is None:
            raise ValueError("control value required for a control-dependent polynomial")
        exact = all(isinstance(v, (int, Fraction)) for v in x) and (
            u is None or isinstance(u, (int, Fraction))
        )
        total = Fraction(0) if exact else 0.0
        for (px, pu), c in self.terms.items():
            v = c if exact else float(c)
            for xi, e in zip(x, px):
                if e:
                    v *= xi**e
            if pu:
                v *= u**pu
            total += v
        return total

    def truncate(self, m: int) -> "Polynomial":
        """Drop monomials of total degree (in x and u jointly) > m."""
        return Polynomial(
            self.n, {k: c for k, c in self.terms.items() if sum(k[0]) + k[1] <= m}
        )

    def shift(self, x_e: Sequence, u_e=0) -> "Polynomial":
        """Exact re-expansion around (x_e, u_e): p~(x, u) = p(x + x_e, u + u_e)."""
        x_e = [_as_fraction(v) for v in x_e]
        u_e = _as_fraction(u_e)
        n = self.n
        out = Polynomial.zero(n)
        for (px, pu), c in self.terms.items():
            factor = Polynomial.const(n, c)
            for i, e in enumerate(px):
                base = Polynomial.variable(n, i) + Polynomial.const(n, x_e[i])
                for _ in range(e):
                    factor = factor * base
            if pu:
                base = Polynomial.control(n) + Polynomial.const(n, u_e)
                for _ in range(pu):
                    factor = factor * base
            out = out + factor
        return out


class PolyVectorField:
    """A vector field on R^n with exact polynomial components."""

    __slots__ = ("n", "components")

    def __init__(self, components: Sequence[Polynomial]):
        components = tuple(components)
        if not components:
            raise ValueError("vector field needs at least one component")
        n = components[0].n
        for p in components:
            if p.n != n:
                raise DimensionMismatch("all components must share the ambient dimension")
        self.n = n
        self.components = components

    @classmethod
    def zero(cls, n: int) -> "PolyVectorField":
        return cls([Polynomial.zero(n) for _ in range(n)])

    @classmethod
    def from_linear(cls, matrix: Sequence[Sequence]) -> "PolyVectorField":
        """Field x -> M x for an n x n rational matrix."""
        n = len(matrix)
        comps = []
        for row in matrix:
            p = Polynomial.zero(n)
            for j, c in enumerate(row):
                p = p + Polynomial.variable(n, j).scale(c)
            comps.append(p)
        return cls(comps)

    @classmethod
    def constant(cls, vec: Sequence) -> "PolyVectorField":
        n = len(vec)
        return cls([Polynomial.const(n, c) for c in vec])

    @property
    def uses_control(self) -> bool:
        return any(p.uses_control for p in self.components)

    def degree(self) -> int:
        return max(p.degree() for p in self.components)

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PolyVectorField)
            and self.n == other.n
            and self.components == other.components
        )

    def __hash__(self):
        return hash((self.n, self.components))

    def __repr__(self) -> str:
        return "(" + ", ".join(repr(p) for p in self.components) + ")"

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        return PolyVectorField([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        return PolyVectorField([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self) -> "PolyVectorField":
        return PolyVectorField([-p for p in self.components])

    def scale(self, c) -> "PolyVectorField":
        return PolyVectorField([p.scale(c) for p in self.components])

    def evaluate(self, x: Sequence, u=None) -> list:
        return [p.evaluate(x, u) for p in self.components]

    def jacobian(self) -> List[List[Polynomial]]:
        """Entry (i, j) is the exact partial of component i w.r.t. x_j."""
        return [[p.diff_x(j) for j in range(self.n)] for p in self.components]

    def truncate(self, m: int) -> "PolyVectorField":
        return PolyVectorField([p.truncate(m) for p in self.components])

    def substitute_u(self, value: Polynomial) -> "PolyVectorField":
        return PolyVectorField([p.substitute_u(value) for p in self.components])


def lie_bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """[X, Y] = Y' X - X' Y, exact; inputs must be pure state fields."""
    if X.uses_control or Y.uses_control:
        raise ControlDependence("Lie brackets are defined for pure state fields only")
    if X.n != Y.n:
        raise DimensionMismatch("bracket of fields with different dimensions")
    n = X.n
    jx = X.jacobian()
    jy = Y.jacobian()
    comps = []
    for i in range(n):
        acc = Polynomial.zero(n)
        for j in range(n):
            acc = acc + jy[i][j] * X.components[j] - jx[i][j] * Y.components[j]
        comps.append(acc)
    return PolyVectorField(comps)


def ad_power(X: PolyVectorField, Y: PolyVectorField, k: int) -> PolyVectorField:
    """ad_X^k(Y): ad^0 = Y and ad^{k+1} = [X, ad^k]."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = Y
    for _ in range(k):
        out = lie_bracket(X, out)
    return out


def taylor_truncate(field: PolyVectorField, m: int) -> PolyVectorField:
    if m < 0:
        raise ValueError("truncation order must be nonnegative")
    return field.truncate(m)


class NotAnEquilibrium(ValueError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"point is not an equilibrium; residual {residual}")


def translate_to_origin(field: PolyVectorField, x_e: Sequence, u_e=0) -> PolyVectorField:
    """Re-express the field in coordinates centred at the equilibrium (x_e, u_e)."""
    x_e = [_as_fraction(v) for v in x_e]
    u_e = _as_fraction(u_e)
    residual = field.evaluate(x_e, u_e if field.uses_control else None)
    if any(r != 0 for r in residual):
        raise NotAnEquilibrium(residual)
    return PolyVectorField([p.shift(x_e, u_e) for p in field.components])
