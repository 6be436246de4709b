"""Buchberger's algorithm over Q and the quotient ring C[X]/I.

Internally polynomials are plain ``{monomial: Fraction}`` dicts; the public
surface takes and returns :class:`~morse_opt.poly.Polynomial`.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .poly import (
    Monomial,
    Polynomial,
    gradient,
    monomial_divides,
    monomial_lcm,
)

DEFAULT_MAX_COEFF_BITS = 4096
DEFAULT_MAX_PAIRS = 200_000

#: Total Milnor number of a polynomial with a positive-dimensional critical locus.
INFINITE = math.inf


class GroebnerError(RuntimeError):
    pass


class ResourceLimitError(GroebnerError):
    """Coefficient size or pair count exceeded its configured cap."""


class PositiveDimensionalError(GroebnerError):
    """The ideal has infinitely many zeros."""

    def __init__(self, message: str, free_variables: Sequence[int] = ()):
        super().__init__(message)
        self.free_variables = list(free_variables)


@dataclass(frozen=True)
class MonomialOrder:
    kind: str = "grevlex"
    perm: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("grevlex", "lex", "grlex"):
            raise ValueError(f"unknown monomial order {self.kind!r}")

    def key(self, m: Monomial) -> tuple:
        """Sort key; larger key means larger monomial."""
        if self.perm is not None:
            m = tuple(m[i] for i in self.perm)
        if self.kind == "lex":
            return m
        if self.kind == "grlex":
            return (sum(m), m)
        return (sum(m), tuple(-e for e in reversed(m)))


GREVLEX = MonomialOrder("grevlex")
LEX = MonomialOrder("lex")
GRLEX = MonomialOrder("grlex")


def max_coeff_bits_from_env() -> int:
    raw = os.environ.get("MORSE_OPT_MAX_COEFF_BITS")
    return int(raw) if raw else DEFAULT_MAX_COEFF_BITS


# -- dict-level kernels --------------------------------------------------------

def _lead(p: dict, key: Callable) -> Monomial:
    return max(p, key=key)


def _check_bits(c: Fraction, cap: int):
    if c.numerator.bit_length() > cap or c.denominator.bit_length() > cap:
        raise ResourceLimitError(f"coefficient exceeds {cap} bits")


def _monic(p: dict, key: Callable) -> dict:
    lc = p[_lead(p, key)]
    if lc == 1:
        return p
    return {m: c / lc for m, c in p.items()}


def _reduce(p: dict, basis: list[tuple[Monomial, dict]], key: Callable, cap: int) -> dict:
    """Full multivariate division of ``p`` by monic ``basis``; returns the remainder."""
    p = dict(p)
    rem: dict = {}
    while p:
        lm = _lead(p, key)
        lc = p[lm]
        for glm, g in basis:
            if monomial_divides(glm, lm):
                shift = tuple(a - b for a, b in zip(lm, glm))
                for m, c in g.items():
                    mm = tuple(a + b for a, b in zip(m, shift))
                    v = p.get(mm, 0) - lc * c
                    if v:
                        _check_bits(v, cap)
                        p[mm] = v
                    else:
                        p.pop(mm, None)
                break
        else:
            rem[lm] = lc
            del p[lm]
    return rem


def _spoly(f: tuple[Monomial, dict], g: tuple[Monomial, dict]) -> dict:
    (flm, fp), (glm, gp) = f, g
    lcm = monomial_lcm(flm, glm)
    sf = tuple(a - b for a, b in zip(lcm, flm))
    sg = tuple(a - b for a, b in zip(lcm, glm))
    out: dict = {}
    for m, c in fp.items():
        mm = tuple(a + b for a, b in zip(m, sf))
        out[mm] = out.get(mm, 0) + c
    for m, c in gp.items():
        mm = tuple(a + b for a, b in zip(m, sg))
        v = out.get(mm, 0) - c
        if v:
            out[mm] = v
        else:
            out.pop(mm, None)
    return {m: c for m, c in out.items() if c}


# -- public surface ------------------------------------------------------------

@dataclass(frozen=True)
class GroebnerBasis:
    """Reduced Gröbner basis, generators monic and sorted by leading monomial."""

    generators: tuple[Polynomial, ...]
    order: MonomialOrder
    original: tuple[Polynomial, ...]
    nvars: int

    @property
    def leading_monomials(self) -> list[Monomial]:
        return [max(g.terms, key=self.order.key) for g in self.generators]

    def _pairs(self) -> list[tuple[Monomial, dict]]:
        return [(max(g.terms, key=self.order.key), g.terms) for g in self.generators]

    def is_unit_ideal(self) -> bool:
        return any(g.is_constant() for g in self.generators)


@dataclass(frozen=True)
class QuotientBasis:
    standard_monomials: tuple[Monomial, ...]

    def __len__(self):
        return len(self.standard_monomials)

    def index(self, m: Monomial) -> int:
        return self.standard_monomials.index(m)


def buchberger(
    gens: Sequence[Polynomial],
    order: MonomialOrder = GREVLEX,
    max_coeff_bits: int | None = None,
    max_pairs: int = DEFAULT_MAX_PAIRS,
) -> GroebnerBasis:
    """Reduced Gröbner basis of the ideal generated by ``gens``.

    Pairs are processed smallest-lcm first (ties broken by the order, then by
    index) and filtered with Buchberger's coprime and chain criteria.
    """
    if not gens:
        raise ValueError("at least one generator is required")
    nvars = gens[0].nvars
    if any(g.nvars != nvars for g in gens):
        raise ValueError("generators do not share a variable count")
    cap = max_coeff_bits if max_coeff_bits is not None else max_coeff_bits_from_env()
    key = order.key

    G: list[tuple[Monomial, dict]] = []
    for g in gens:
        if not g.is_zero():
            p = _monic(g.terms, key)
            G.append((_lead(p, key), p))

    pairs = {(i, j) for i in range(len(G)) for j in range(i + 1, len(G))}
    processed = 0
    while pairs:
        i, j = min(
            pairs,
            key=lambda ij: (
                sum(monomial_lcm(G[ij[0]][0], G[ij[1]][0])),
                key(monomial_lcm(G[ij[0]][0], G[ij[1]][0])),
                ij,
            ),
        )
        pairs.discard((i, j))
        processed += 1
        if processed > max_pairs:
            raise ResourceLimitError(f"more than {max_pairs} S-pairs processed")
        lmi, lmj = G[i][0], G[j][0]
        lcm = monomial_lcm(lmi, lmj)
        if all(a == 0 or b == 0 for a, b in zip(lmi, lmj)):
            continue
        if _chain_criterion(i, j, lcm, G, pairs):
            continue
        h = _reduce(_spoly(G[i], G[j]), G, key, cap)
        if h:
            h = _monic(h, key)
            t = len(G)
            G.append((_lead(h, key), h))
            pairs.update((k, t) for k in range(t))

    return GroebnerBasis(
        generators=tuple(_interreduce(G, key, cap, nvars)),
        order=order,
        original=tuple(gens),
        nvars=nvars,
    )


def _chain_criterion(i, j, lcm, G, pairs) -> bool:
    for k, (lmk, _) in enumerate(G):
        if k in (i, j) or not monomial_divides(lmk, lcm):
            continue
        if (min(i, k), max(i, k)) not in pairs and (min(j, k), max(j, k)) not in pairs:
            return True
    return False


def _interreduce(G, key, cap, nvars) -> list[Polynomial]:
    # minimal basis: drop generators whose leading monomial is a multiple of another's
    minimal = []
    for idx, (lm, p) in enumerate(G):
        redundant = False
        for jdx, (lm2, _) in enumerate(G):
            if jdx == idx or not monomial_divides(lm2, lm):
                continue
            if lm2 != lm or jdx < idx:
                redundant = True
                break
        if not redundant:
            minimal.append((lm, p))
    reduced = []
    for idx, (lm, p) in enumerate(minimal):
        others = [g for jdx, g in enumerate(minimal) if jdx != idx]
        tail = {m: c for m, c in p.items() if m != lm}
        r = _reduce(tail, others, key, cap)
        r[lm] = p[lm]
        reduced.append((lm, _monic(r, key)))
    reduced.sort(key=lambda t: key(t[0]))
    return [Polynomial(p, nvars) for _, p in reduced]


def normal_form(p: Polynomial, gb: GroebnerBasis) -> Polynomial:
    if p.nvars != gb.nvars:
        raise ValueError(f"polynomial has {p.nvars} variables, basis has {gb.nvars}")
    rem = _reduce(p.terms, gb._pairs(), gb.order.key, max_coeff_bits_from_env())
    return Polynomial(rem, gb.nvars)


def s_polynomials_reduce_to_zero(gb: GroebnerBasis) -> bool:
    """Exhaustive Buchberger criterion over all pairs of the basis."""
    basis = gb._pairs()
    key = gb.order.key
    cap = max_coeff_bits_from_env()
    for a, b in itertools.combinations(basis, 2):
        if _reduce(_spoly(a, b), basis, key, cap):
            return False
    return True


def is_zero_dimensional(gb: GroebnerBasis) -> bool:
    lms = gb.leading_monomials
    if any(sum(m) == 0 for m in lms):
        return True
    for i in range(gb.nvars):
        if not any(m[i] > 0 and sum(m) == m[i] for m in lms):
            return False
    return True


def _free_variables(gb: GroebnerBasis) -> list[int]:
    lms = gb.leading_monomials
    return [i for i in range(gb.nvars) if not any(m[i] > 0 and sum(m) == m[i] for m in lms)]


def quotient_basis(gb: GroebnerBasis) -> QuotientBasis:
    """Standard monomials of ``gb`` in increasing order."""
    if not is_zero_dimensional(gb):
        raise PositiveDimensionalError(
            "ideal is not zero-dimensional", free_variables=_free_variables(gb)
        )
    lms = gb.leading_monomials
    if any(sum(m) == 0 for m in lms):
        return QuotientBasis(())
    bounds = []
    for i in range(gb.nvars):
        bounds.append(min(m[i] for m in lms if m[i] > 0 and sum(m) == m[i]))
    mons = [
        m for m in itertools.product(*(range(b) for b in bounds))
        if not any(monomial_divides(lm, m) for lm in lms)
    ]
    mons.sort(key=gb.order.key)
    return QuotientBasis(tuple(mons))


def gradient_basis(f: Polynomial, order: MonomialOrder = GREVLEX, **kwargs) -> GroebnerBasis:
    grads = gradient(f)
    if all(g.is_zero() for g in grads):
        raise PositiveDimensionalError("constant polynomial has a zero gradient ideal", range(f.nvars))
    return buchberger(grads, order, **kwargs)


def total_milnor_number(f: Polynomial, order: MonomialOrder = GREVLEX, **kwargs) -> int | float:
    """``dim C[X]/I_grad(f)``, or :data:`INFINITE` when the critical locus is not finite."""
    if f.is_constant():
        raise ValueError("total Milnor number is undefined for constant polynomials")
    gb = gradient_basis(f, order, **kwargs)
    if not is_zero_dimensional(gb):
        return INFINITE
    return len(quotient_basis(gb))


# -- exact linear algebra on the quotient ----------------------------------------

def coordinates(p: Polynomial, gb: GroebnerBasis, qb: QuotientBasis) -> list[Fraction]:
    """Coordinates of ``normal_form(p)`` on the standard monomials."""
    nf = normal_form(p, gb)
    index = {m: k for k, m in enumerate(qb.standard_monomials)}
    vec = [Fraction(0)] * len(qb)
    for m, c in nf.terms.items():
        vec[index[m]] = c
    return vec


def exact_multiplication_matrix(
    gb: GroebnerBasis, qb: QuotientBasis, multiplier: Polynomial
) -> list[list[Fraction]]:
    """Column ``j`` holds the coordinates of ``multiplier * b_j``."""
    cols = [
        coordinates(multiplier * Polynomial.monomial(b), gb, qb)
        for b in qb.standard_monomials
    ]
    return [[cols[j][i] for j in range(len(qb))] for i in range(len(qb))]


def _minimal_polynomial(gb: GroebnerBasis, qb: QuotientBasis, i: int) -> list[Fraction]:
    """Monic generator of ``I ∩ Q[x_i]``, coefficients from constant term up."""
    x = Polynomial.variable(i, gb.nvars)
    M = exact_multiplication_matrix(gb, qb, x)
    n = len(qb)
    v = [Fraction(0)] * n
    v[qb.index((0,) * gb.nvars)] = Fraction(1)
    # incremental echelon form of the Krylov vectors, tracking combinations
    rows: list[tuple[list[Fraction], list[Fraction], int]] = []
    k = 0
    while True:
        w = list(v)
        combo = [Fraction(0)] * (k + 1)
        combo[k] = Fraction(1)
        for r, rc, piv in rows:
            if w[piv]:
                t = w[piv] / r[piv]
                w = [a - t * b for a, b in zip(w, r)]
                rc_ext = rc + [Fraction(0)] * (len(combo) - len(rc))
                combo = [a - t * b for a, b in zip(combo, rc_ext)]
        if not any(w):
            return combo
        piv = next(idx for idx, a in enumerate(w) if a)
        rows.append((w, combo, piv))
        v = [sum(M[r][c] * v[c] for c in range(n)) for r in range(n)]
        k += 1


def _upoly_trim(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def _upoly_divmod(a, b):
    a = list(a)
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    while len(_upoly_trim(a)) >= len(b):
        t = a[-1] / b[-1]
        s = len(a) - len(b)
        q[s] = t
        for k, c in enumerate(b):
            a[s + k] -= t * c
        a.pop()
    return q, a


def upoly_gcd(a, b):
    a, b = _upoly_trim(list(a)), _upoly_trim(list(b))
    while b:
        _, r = _upoly_divmod(a, b)
        a, b = b, _upoly_trim(r)
    return [c / a[-1] for c in a]


def squarefree_part(a):
    """``a / gcd(a, a')`` for a univariate polynomial given low degree first."""
    da = [k * c for k, c in enumerate(a)][1:]
    if not _upoly_trim(list(da)):
        return [Fraction(1)]
    g = upoly_gcd(a, da)
    q, _ = _upoly_divmod(a, g)
    q = _upoly_trim(q)
    return [c / q[-1] for c in q]


def radical_basis(gb: GroebnerBasis) -> GroebnerBasis:
    """Gröbner basis of the radical of a zero-dimensional ideal.

    Adds the squarefree part of each univariate eliminant (Seidenberg's lemma,
    characteristic zero).
    """
    qb = quotient_basis(gb)
    if not len(qb):
        return gb
    extra = []
    for i in range(gb.nvars):
        sq = squarefree_part(_minimal_polynomial(gb, qb, i))
        terms = {}
        for k, c in enumerate(sq):
            if c:
                m = [0] * gb.nvars
                m[i] = k
                terms[tuple(m)] = c
        extra.append(Polynomial(terms, gb.nvars))
    return buchberger(list(gb.generators) + extra, gb.order)


def number_of_points(gb: GroebnerBasis) -> int:
    """Exact count of distinct complex zeros, ``dim Q[X]/sqrt(I)``."""
    return len(quotient_basis(radical_basis(gb)))
