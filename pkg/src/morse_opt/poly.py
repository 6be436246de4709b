"""Sparse multivariate polynomials with exact rational coefficients.

A :class:`Polynomial` is an immutable map from exponent tuples to nonzero
:class:`fractions.Fraction` coefficients.  Floating point only shows up in
:func:`evaluate` and :func:`hessian_at`.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

Monomial = tuple[int, ...]
Coefficient = Union[int, Fraction]

#: Degree of the zero polynomial.  Compares below every integer degree.
ZERO_DEGREE = -math.inf

MAX_EXPONENT = 4096


class PolynomialError(ValueError):
    """Base class for polynomial construction errors."""


class ParseError(PolynomialError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownVariableError(ParseError):
    pass


class ExponentOverflowError(ParseError):
    pass


def grevlex_key(m: Monomial) -> tuple:
    return (sum(m), tuple(-e for e in reversed(m)))


def monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def monomial_divides(a: Monomial, b: Monomial) -> bool:
    """True if ``x^a`` divides ``x^b``."""
    return all(x <= y for x, y in zip(a, b))


def monomial_lcm(a: Monomial, b: Monomial) -> Monomial:
    return tuple(max(x, y) for x, y in zip(a, b))


def monomial_div(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x - y for x, y in zip(a, b))


def monomials_up_to_degree(nvars: int, degree: int) -> list[Monomial]:
    """All monomials of total degree <= ``degree``, in increasing grevlex order."""
    if degree < 0:
        return []
    out: list[Monomial] = []

    def rec(prefix: list[int], remaining: int, k: int):
        if k == nvars - 1:
            for e in range(remaining + 1):
                out.append(tuple(prefix + [e]))
            return
        for e in range(remaining + 1):
            rec(prefix + [e], remaining - e, k + 1)

    rec([], degree, 0)
    out.sort(key=grevlex_key)
    return out


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


class Polynomial:
    """Immutable sparse polynomial over Q in ``nvars`` variables."""

    __slots__ = ("_terms", "_nvars", "_hash")

    def __init__(self, terms: Mapping[Monomial, Coefficient], nvars: int):
        if nvars < 1:
            raise PolynomialError("nvars must be positive")
        clean: dict[Monomial, Fraction] = {}
        for mono, c in terms.items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != nvars:
                raise PolynomialError(f"monomial {mono} does not have {nvars} exponents")
            if any(e < 0 for e in mono):
                raise PolynomialError(f"negative exponent in {mono}")
            c = _as_fraction(c)
            if c:
                clean[mono] = clean.get(mono, Fraction(0)) + c
        self._terms = {m: c for m, c in clean.items() if c}
        self._nvars = nvars
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict[Monomial, Fraction], nvars: int) -> "Polynomial":
        # trusted constructor: terms already clean
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._nvars = nvars
        obj._hash = None
        return obj

    @classmethod
    def constant(cls, c: Coefficient, nvars: int) -> "Polynomial":
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls._raw({}, nvars)

    @classmethod
    def variable(cls, i: int, nvars: int) -> "Polynomial":
        """The variable ``x_{i+1}`` (0-based index ``i``)."""
        mono = [0] * nvars
        mono[i] = 1
        return cls._raw({tuple(mono): Fraction(1)}, nvars)

    @classmethod
    def monomial(cls, mono: Monomial, coeff: Coefficient = 1) -> "Polynomial":
        return cls({tuple(mono): coeff}, len(mono))

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> dict[Monomial, Fraction]:
        return dict(self._terms)

    def items(self):
        """Terms in increasing grevlex order."""
        return sorted(self._terms.items(), key=lambda t: grevlex_key(t[0]))

    def coeff(self, mono: Monomial) -> Fraction:
        return self._terms.get(tuple(mono), Fraction(0))

    @property
    def degree(self) -> Union[int, float]:
        if not self._terms:
            return ZERO_DEGREE
        return max(sum(m) for m in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(sum(m) == 0 for m in self._terms)

    def support(self) -> list[Monomial]:
        return [m for m, _ in self.items()]

    def max_abs_coeff(self) -> Fraction:
        return max((abs(c) for c in self._terms.values()), default=Fraction(0))

    def _check(self, other: "Polynomial"):
        if other._nvars != self._nvars:
            raise PolynomialError(f"variable count mismatch: {self._nvars} vs {other._nvars}")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction, Rational)):
            return Polynomial.constant(other, self._nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Polynomial._raw(out, self._nvars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({m: -c for m, c in self._terms.items()}, self._nvars)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Rational)):
            c = _as_fraction(other)
            if not c:
                return Polynomial.zero(self._nvars)
            return Polynomial._raw({m: v * c for m, v in self._terms.items()}, self._nvars)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial._raw({m: c for m, c in out.items() if c}, self._nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, Rational)):
            return self * (Fraction(1) / _as_fraction(other))
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise PolynomialError("exponent must be a non-negative integer")
        result = Polynomial.constant(1, self._nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._nvars == other._nvars and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(other, self._nvars)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._nvars, frozenset(self._terms.items())))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    def __repr__(self):
        return f"Polynomial({to_text(self)!r}, nvars={self._nvars})"

    def __str__(self):
        return to_text(self)

    def diff(self, i: int) -> "Polynomial":
        """Partial derivative with respect to ``x_{i+1}``."""
        out: dict[Monomial, Fraction] = {}
        for m, c in self._terms.items():
            e = m[i]
            if e:
                mm = m[:i] + (e - 1,) + m[i + 1:]
                out[mm] = c * e
        return Polynomial._raw(out, self._nvars)

    def monic(self) -> "Polynomial":
        """Divide by the leading coefficient in grevlex order."""
        if not self._terms:
            return self
        lead = max(self._terms, key=grevlex_key)
        return self / self._terms[lead]


def gradient(f: Polynomial) -> list[Polynomial]:
    return [f.diff(i) for i in range(f.nvars)]


def _as_point(f: Polynomial, p: Sequence) -> np.ndarray:
    p = np.asarray(p, dtype=complex).ravel()
    if p.shape[0] != f.nvars:
        raise PolynomialError(f"point has {p.shape[0]} coordinates, polynomial has {f.nvars} variables")
    return p


def evaluate(f: Polynomial, p: Sequence) -> complex:
    """Evaluate ``f`` at a complex point.

    Terms are accumulated in increasing grevlex order so the result does not
    depend on dict insertion history.
    """
    p = _as_point(f, p)
    total = 0j
    for m, c in f.items():
        v = complex(c)
        for x, e in zip(p, m):
            if e:
                v *= complex(x) ** e
        total += v
    return total


def jacobian_at(polys: Sequence[Polynomial], p: Sequence) -> np.ndarray:
    """Matrix ``J[i, j] = d polys[i] / d x_j`` evaluated at ``p``."""
    n = polys[0].nvars
    J = np.empty((len(polys), n), dtype=complex)
    for i, g in enumerate(polys):
        for j in range(n):
            J[i, j] = evaluate(g.diff(j), p)
    return J


def hessian_at(f: Polynomial, p: Sequence) -> np.ndarray:
    """Hessian of ``f`` at ``p``, symmetrized as ``(H + H.T) / 2``.

    Returned as a real array when ``p`` is real, complex otherwise.
    """
    pt = _as_point(f, p)
    H = jacobian_at(gradient(f), pt)
    H = (H + H.T) / 2
    if not np.any(pt.imag):
        return H.real.copy()
    return H


def is_convenient_support(f: Polynomial) -> tuple[bool, list[Monomial]]:
    """Check that a pure power of every variable occurs in the support of ``f``.

    Returns ``(verdict, witnesses)`` where ``witnesses`` holds the lowest pure
    power found for each axis (only the axes that have one).
    """
    witnesses = []
    for i in range(f.nvars):
        powers = [m for m in f.support() if m[i] > 0 and all(e == 0 for j, e in enumerate(m) if j != i)]
        if powers:
            witnesses.append(min(powers, key=lambda m: m[i]))
    return len(witnesses) == f.nvars, witnesses


# -- text format -------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)|(?P<var>x\d+)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[-+*/^()])|(?P<bad>\S))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.end() == pos:
            break
        kind = m.lastgroup
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group('bad')!r}", m.start("bad"))
        if kind == "ident":
            raise UnknownVariableError(f"unknown variable {m.group('ident')!r}", m.start("ident"))
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, nvars: int | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.nvars = nvars
        # infer pass collects the max variable index first
        if nvars is None:
            idx = [int(v[1:]) for k, v, _ in self.tokens if k == "var"]
            self.nvars = max(max(idx, default=1), 1)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, v, pos = self.take()
        if v != value:
            raise ParseError(f"expected {value!r}, found {v or 'end of input'!r}", pos)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            raise ParseError("empty input", 0)
        p = self.poly()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {v!r}", pos)
        return p

    def poly(self) -> Polynomial:
        sign = 1
        if self.peek()[1] in "+-" and self.peek()[0] == "op":
            sign = -1 if self.take()[1] == "-" else 1
        acc = self.term() * sign
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            t = self.term()
            acc = acc + t if op == "+" else acc - t
        return acc

    def term(self) -> Polynomial:
        kind, v, pos = self.peek()
        if kind == "num":
            acc = Polynomial.constant(self.coeff(), self.nvars)
            while True:
                kind, v, pos = self.peek()
                if kind == "op" and v == "*":
                    self.take()
                    acc = acc * self.factor()
                elif kind == "var" or (kind == "op" and v == "("):
                    acc = acc * self.factor()
                else:
                    return acc
        acc = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            acc = acc * self.factor()
        return acc

    def coeff(self) -> Fraction:
        _, v, pos = self.take()
        if not v.isdigit():
            c = Fraction(v)
        else:
            c = Fraction(int(v))
            if self.peek()[1] == "/":
                self.take()
                kind, d, dpos = self.take()
                if kind != "num" or not d.isdigit():
                    raise ParseError("expected unsigned integer denominator", dpos)
                if int(d) == 0:
                    raise ParseError("zero denominator", dpos)
                c = c / int(d)
        return c

    def exponent(self) -> int | None:
        if self.peek()[1] != "^":
            return None
        self.take()
        kind, v, pos = self.take()
        if kind != "num" or not v.isdigit():
            raise ParseError("expected unsigned integer exponent", pos)
        e = int(v)
        if e > MAX_EXPONENT:
            raise ExponentOverflowError(f"exponent {e} exceeds {MAX_EXPONENT}", pos)
        return e

    def factor(self) -> Polynomial:
        kind, v, pos = self.take()
        if kind == "var":
            k = int(v[1:])
            if k < 1 or k > self.nvars:
                raise UnknownVariableError(f"unknown variable {v!r} (nvars={self.nvars})", pos)
            base = Polynomial.variable(k - 1, self.nvars)
        elif kind == "op" and v == "(":
            base = self.poly()
            self.expect(")")
        else:
            raise ParseError(f"expected variable or '(', found {v or 'end of input'!r}", pos)
        e = self.exponent()
        return base if e is None else base ** e


def parse_polynomial(text: str, nvars: int | str | None = "infer") -> Polynomial:
    """Parse the ASCII polynomial grammar into canonical expanded form.

    >>> str(parse_polynomial("(x1+x2)^2"))
    'x1^2 + 2*x1*x2 + x2^2'
    """
    if nvars == "infer":
        nvars = None
    return _Parser(text, nvars).parse()


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _format_monomial(m: Monomial) -> str:
    parts = []
    for i, e in enumerate(m):
        if e == 1:
            parts.append(f"x{i + 1}")
        elif e > 1:
            parts.append(f"x{i + 1}^{e}")
    return "*".join(parts)


def to_text(f: Polynomial, coeff_format: Callable[[Fraction], str] = _format_coeff) -> str:
    """Canonical text form, terms in decreasing grevlex order.

    ``coeff_format`` renders the absolute value of each coefficient.
    """
    if f.is_zero():
        return "0"
    out = []
    for k, (m, c) in enumerate(reversed(f.items())):
        sign = "-" if c < 0 else "+"
        a = abs(c)
        mono = _format_monomial(m)
        if not mono:
            body = coeff_format(a)
        elif a == 1:
            body = mono
        else:
            body = f"{coeff_format(a)}*{mono}"
        if k == 0:
            out.append(body if sign == "+" else f"-{body}")
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


def from_coefficients(coeffs: Iterable[tuple[Monomial, Coefficient]], nvars: int) -> Polynomial:
    terms: dict[Monomial, Fraction] = {}
    for m, c in coeffs:
        terms[tuple(m)] = terms.get(tuple(m), Fraction(0)) + _as_fraction(c)
    return Polynomial(terms, nvars)
