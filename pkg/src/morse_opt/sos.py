"""Gradient SOS relaxation as a dual-form SDP, certificate extraction and checking.

For an order ``N`` the relaxation is

    maximize gamma  s.t.  f - gamma - sum_i phi_i * df/dx_i  =  m^T Q m,  Q psd

with ``m`` all monomials of degree <= N and ``deg phi_i <= 2N - d + 1``.  The
coefficient-matching equations are solved symbolically: every polynomial of
degree <= 2N has a canonical Gram matrix, and the remaining freedom in ``Q``
is spanned by "move weight between two entries of the same monomial"
directions.  So ``Q = C - sum_k y_k A_k`` with every ``y_k`` free: ``gamma``,
one coefficient of some ``phi_i``, or one Gram freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .poly import (
    Monomial,
    Polynomial,
    gradient,
    monomial_mul,
    monomials_up_to_degree,
)
from .sdp import SDPParams, SDPProblem, solve_sdp

DENOMINATOR_CAP = 10**6


class RelaxationError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


@dataclass(frozen=True)
class RelaxParams:
    sdp: SDPParams = SDPParams()
    certificate_tol: float = 1e-6
    extract_tol: float = 1e-9
    denominator_cap: int = DENOMINATOR_CAP
    stab_tol: float = 1e-6


@dataclass
class GramLayout:
    """How polynomials of degree <= 2N map onto symmetric Gram matrices."""

    basis: list[Monomial]
    canonical: dict[Monomial, tuple[int, int]]
    pairs: dict[Monomial, list[tuple[int, int]]]

    @classmethod
    def build(cls, nvars: int, N: int, basis: Optional[list[Monomial]] = None) -> "GramLayout":
        if basis is None:
            basis = monomials_up_to_degree(nvars, N)
        pairs: dict[Monomial, list[tuple[int, int]]] = {}
        for i, a in enumerate(basis):
            for j in range(i, len(basis)):
                pairs.setdefault(monomial_mul(a, basis[j]), []).append((i, j))
        canonical = {}
        for mono, ps in pairs.items():
            diag = [p for p in ps if p[0] == p[1]]
            canonical[mono] = diag[0] if diag else ps[0]
        return cls(basis, canonical, pairs)

    @property
    def size(self) -> int:
        return len(self.basis)

    def gram(self, p: Polynomial) -> dict[tuple[int, int], Fraction]:
        """Canonical symmetric Gram matrix of ``p``, as a sparse exact dict."""
        out: dict[tuple[int, int], Fraction] = {}
        for mono, c in p.terms.items():
            if mono not in self.canonical:
                raise RelaxationError(f"monomial {mono} exceeds the Gram degree")
            i, j = self.canonical[mono]
            if i == j:
                out[(i, i)] = c
            else:
                out[(i, j)] = c / 2
                out[(j, i)] = c / 2
        return out

    def polynomial(self, Q: dict[tuple[int, int], Fraction], nvars: int) -> Polynomial:
        """``m^T Q m`` for an exact sparse symmetric ``Q``."""
        terms: dict[Monomial, Fraction] = {}
        for (i, j), v in Q.items():
            mono = monomial_mul(self.basis[i], self.basis[j])
            terms[mono] = terms.get(mono, Fraction(0)) + v
        return Polynomial(terms, nvars)


@dataclass
class RelaxationData:
    """Exact side of an assembled relaxation, kept for auditing and verification."""

    f: Polynomial
    N: int
    layout: GramLayout
    C: dict
    A: list[dict]
    multiplier_degree: Optional[int]
    dropped: list[tuple]
    n_constraints: int

    def gram_exact(self, y: Sequence[Fraction]) -> dict[tuple[int, int], Fraction]:
        Q = dict(self.C)
        for yk, Ak in zip(y, self.A):
            if not yk:
                continue
            for ij, v in Ak.items():
                Q[ij] = Q.get(ij, Fraction(0)) - yk * v
        return {ij: v for ij, v in Q.items() if v}


def _dense(entries: dict, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    for (i, j), v in entries.items():
        M[i, j] = float(v)
    return M


def _independent(polys: list[Polynomial]) -> list[bool]:
    """Mark which polynomials are linearly independent of the earlier ones (exact)."""
    rows: list[tuple[dict, Monomial]] = []
    keep = []
    for p in polys:
        v = dict(p.terms)
        for r, piv in rows:
            c = v.get(piv)
            if c:
                t = c / r[piv]
                for mono, a in r.items():
                    w = v.get(mono, 0) - t * a
                    if w:
                        v[mono] = w
                    else:
                        v.pop(mono, None)
        if v:
            piv = max(v, key=lambda m: (sum(m), m))
            rows.append((v, piv))
            keep.append(True)
        else:
            keep.append(False)
    return keep


def _assemble(
    f: Polynomial,
    N: int,
    multiplier_degree: Optional[int],
    basis: Optional[list[Monomial]] = None,
) -> SDPProblem:
    n = f.nvars
    layout = GramLayout.build(n, N, basis)
    size = layout.size
    if f.degree > 2 * N:
        raise RelaxationError(f"order N={N} cannot carry degree {f.degree}")
    C = layout.gram(f)
    A: list[dict] = [layout.gram(Polynomial.constant(1, n))]
    roles: list[tuple] = [("gamma",)]
    b = [1.0]
    dropped: list[tuple] = []

    if multiplier_degree is not None:
        grads = gradient(f)
        cand = []
        for i, g in enumerate(grads):
            for mono in monomials_up_to_degree(n, multiplier_degree):
                cand.append(((("multiplier", i, mono)), Polynomial.monomial(mono) * g))
        keep = _independent([p for _, p in cand])
        for (role, p), k in zip(cand, keep):
            if k:
                A.append(layout.gram(p))
                roles.append(role)
                b.append(0.0)
            else:
                dropped.append(role)

    for mono, ps in sorted(layout.pairs.items()):
        ci, cj = layout.canonical[mono]
        for i, j in ps:
            if (i, j) == (ci, cj):
                continue
            d: dict[tuple[int, int], Fraction] = {}
            w = Fraction(1) if i == j else Fraction(1, 2)
            wc = Fraction(1) if ci == cj else Fraction(1, 2)
            d[(i, j)] = d.get((i, j), 0) + w
            d[(j, i)] = w
            d[(ci, cj)] = d.get((ci, cj), 0) - wc
            d[(cj, ci)] = -wc
            A.append(d)
            roles.append(("gram_free", mono, (i, j)))
            b.append(0.0)

    exact = RelaxationData(
        f=f,
        N=N,
        layout=layout,
        C=C,
        A=A,
        multiplier_degree=multiplier_degree,
        dropped=dropped,
        n_constraints=len(layout.pairs),
    )
    return SDPProblem(
        C=_dense(C, size),
        A=np.array([_dense(a, size) for a in A]),
        b=np.array(b),
        roles=roles,
        exact=exact,
    )


def build_grad_relaxation(f: Polynomial, N: int) -> SDPProblem:
    """SDP for the gradient relaxation of order ``N``."""
    if f.is_zero():
        raise RelaxationError("zero polynomial")
    d = int(f.degree)
    if N < 1 or 2 * N - d + 1 < 0:
        raise RelaxationError(f"order N={N} too small for degree {d}: need 2N >= d - 1")
    return _assemble(f, N, 2 * N - d + 1)


def build_plain_sos(f: Polynomial) -> SDPProblem:
    """SDP for ``max gamma s.t. f - gamma is SOS`` at order ``ceil(d/2)``."""
    if f.is_zero():
        raise RelaxationError("zero polynomial")
    d = int(f.degree)
    if d % 2:
        raise RelaxationError(f"odd degree {d}: f - gamma is never SOS")
    return _assemble(f, max(d // 2, 1), None)


def _forced_zero_rows(problem: SDPProblem) -> list[Monomial]:
    """Basis monomials whose Gram row must vanish on every feasible point.

    If the coefficient of ``m^2`` does not depend on any free variable, is zero
    in ``f``, and every other Gram pair producing ``m^2`` already involves a
    vanishing row, then ``Q[m, m] = 0`` and psd forces the whole row to zero.
    """
    data: RelaxationData = problem.exact
    layout = data.layout
    n = data.f.nvars
    touched = {(0,) * n}
    for role in problem.roles:
        if role[0] == "multiplier":
            _, i, mono = role
            touched.update((Polynomial.monomial(mono) * data.f.diff(i)).support())
    f_support = set(data.f.support())
    dead: set[int] = set()
    changed = True
    while changed:
        changed = False
        for k, m in enumerate(layout.basis):
            sq = monomial_mul(m, m)
            if k in dead or sq in touched or sq in f_support:
                continue
            if all(i in dead or j in dead for i, j in layout.pairs[sq] if (i, j) != (k, k)):
                dead.add(k)
                changed = True
    return [layout.basis[k] for k in sorted(dead)]


def reduce_relaxation(problem: SDPProblem) -> Optional[SDPProblem]:
    """Re-assemble without rows forced to zero, or ``None`` if nothing changes.

    Returns ``None`` as well when dropping the rows would leave some fixed
    coefficient unrepresentable (the full problem is then infeasible anyway).
    """
    data: RelaxationData = problem.exact
    dead = set(_forced_zero_rows(problem))
    if not dead:
        return None
    basis = [m for m in data.layout.basis if m not in dead]
    if not basis:
        return None
    try:
        return _assemble(data.f, data.N, data.multiplier_degree, basis)
    except RelaxationError:
        return None


@dataclass
class RelaxationResult:
    N: Optional[int]
    gamma_star: Optional[float]
    status: str
    gram: Optional[np.ndarray] = None
    multipliers: list[Polynomial] = field(default_factory=list)
    sos_squares: list[Polynomial] = field(default_factory=list)
    identity_residual: Optional[float] = None
    rounded_residual: Optional[float] = None
    float_residual: Optional[float] = None
    iterations: int = 0
    gap: Optional[float] = None
    message: str = ""
    basis: list[Monomial] = field(default_factory=list)


def extract_sos(gram, basis: Sequence[Monomial], tol: float = 1e-9) -> list[Polynomial]:
    """Split a psd Gram matrix into squares ``sqrt(lam_j) * (v_j . m)``.

    Eigenvalues in ``[-tol, tol]`` are dropped; anything below ``-tol`` raises
    :class:`NotPSDError`.  Coefficients are the exact binary values of the
    floats.
    """
    G = np.asarray(gram, dtype=float)
    if G.shape != (len(basis), len(basis)):
        raise ValueError("Gram matrix does not match the monomial basis")
    if not np.allclose(G, G.T, atol=1e-12 * max(1.0, float(np.abs(G).max(initial=0)))):
        raise ValueError("Gram matrix is not symmetric")
    lam, V = np.linalg.eigh((G + G.T) / 2)
    if lam.size and lam[0] < -tol:
        raise NotPSDError(f"Gram matrix has eigenvalue {lam[0]:.3e} < -{tol:.1e}")
    nvars = len(basis[0])
    squares = []
    for k in range(len(lam) - 1, -1, -1):
        if lam[k] <= tol:
            continue
        v = V[:, k] * math.sqrt(lam[k])
        lead = next(c for c in v if abs(c) > 0)
        if lead < 0:
            v = -v
        squares.append(Polynomial({m: Fraction(float(c)) for m, c in zip(basis, v)}, nvars))
    return squares


def _fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    return Fraction(float(v))


def verify_identity(
    f: Polynomial,
    gamma,
    multipliers: Sequence[Polynomial],
    squares: Sequence[Polynomial],
) -> tuple[Polynomial, Fraction]:
    """Exact ``f - gamma - sum phi_i df/dx_i - sum sigma_j^2`` and its largest coefficient."""
    grads = gradient(f)
    if multipliers and len(multipliers) != len(grads):
        raise ValueError(f"expected {len(grads)} multipliers, got {len(multipliers)}")
    r = f - _fraction(gamma)
    for phi, g in zip(multipliers, grads):
        r = r - phi * g
    for s in squares:
        r = r - s * s
    return r, r.max_abs_coeff()


def _split(problem: SDPProblem, y: Sequence[Fraction]) -> tuple[Fraction, list[Polynomial]]:
    data: RelaxationData = problem.exact
    n = data.f.nvars
    gamma = Fraction(0)
    phi_terms: list[dict] = [{} for _ in range(n)]
    for role, v in zip(problem.roles, y):
        if role[0] == "gamma":
            gamma = v
        elif role[0] == "multiplier":
            _, i, mono = role
            if v:
                phi_terms[i][mono] = v
    multipliers = [Polynomial(t, n) for t in phi_terms] if data.multiplier_degree is not None else []
    return gamma, multipliers


def _certificate(problem: SDPProblem, y: Sequence[Fraction], tol: float):
    data: RelaxationData = problem.exact
    gamma, multipliers = _split(problem, y)
    Q = data.gram_exact(y)
    gram = _dense(Q, data.layout.size)
    scale = max(1.0, float(np.abs(gram).max(initial=0)))
    squares = extract_sos(gram, data.layout.basis, tol * scale)
    _, res = verify_identity(data.f, gamma, multipliers, squares)
    return gamma, multipliers, gram, squares, float(res)


def solve_relaxation(problem: SDPProblem, params: RelaxParams = RelaxParams()) -> RelaxationResult:
    """Solve, map ``y`` back to ``gamma``/``phi``/Gram, extract and verify squares.

    ``y`` is rounded by continued fractions (denominator cap
    ``params.denominator_cap``) and also taken as its exact binary values;
    both certificates are checked and the smaller exact residual is kept.
    """
    data: RelaxationData = problem.exact
    sol = solve_sdp(problem, params.sdp)
    note = ""
    if sol.status in ("max_iter", "numerical_failure"):
        # no strictly feasible Gram matrix: retry without the rows forced to zero
        reduced = reduce_relaxation(problem)
        if reduced is not None:
            retry = solve_sdp(reduced, params.sdp)
            if retry.status == "optimal":
                dropped = len(data.layout.basis) - reduced.size
                note = f"solved after removing {dropped} Gram rows forced to zero; "
                problem, data, sol = reduced, reduced.exact, retry
    N = data.N if data.multiplier_degree is not None else None
    result = RelaxationResult(N=N, gamma_star=None, status=sol.status, iterations=sol.iterations, gap=sol.gap)
    result.message = note
    result.basis = list(data.layout.basis)
    if sol.status != "optimal":
        result.message = f"solver returned {sol.status}"
        return result

    rounded = [Fraction(float(v)).limit_denominator(params.denominator_cap) for v in sol.y]
    raw = [Fraction(float(v)) for v in sol.y]
    best = None
    for label, y in (("rounded", rounded), ("float", raw)):
        try:
            cert = _certificate(problem, y, params.extract_tol)
        except NotPSDError as exc:
            result.message += f"{label}: {exc}; "
            continue
        if label == "rounded":
            result.rounded_residual = cert[-1]
        else:
            result.float_residual = cert[-1]
        if best is None or cert[-1] < best[-1]:
            best = cert
        if cert[-1] == 0:
            break

    result.gamma_star = float(sol.objective)
    if best is None:
        result.status = "numerical_failure"
        return result
    gamma, multipliers, gram, squares, res = best
    result.gram = gram
    result.multipliers = multipliers
    result.sos_squares = squares
    result.identity_residual = res
    if res > params.certificate_tol:
        result.status = "numerical_failure"
        result.message += f"certificate residual {res:.3e} exceeds {params.certificate_tol:.1e}"
    return result


@dataclass
class ConvergenceTrace:
    results: list[RelaxationResult]
    monotone: bool
    stabilized: bool
    stabilized_at: Optional[int]
    candidate_infimum: Optional[float]
    matches_candidate: Optional[bool]
    caveats: list[str] = field(default_factory=list)

    @property
    def gammas(self) -> list[Optional[float]]:
        return [r.gamma_star if r.status == "optimal" else None for r in self.results]


def default_orders(f: Polynomial) -> tuple[int, int]:
    d = int(f.degree)
    n_min = max(math.ceil(d / 2), math.ceil((d - 1) / 2), 1)
    return n_min, n_min + 3


def run_convergence_sweep(
    f: Polynomial,
    N_min: Optional[int] = None,
    N_max: Optional[int] = None,
    params: RelaxParams = RelaxParams(),
    candidate: Optional[float] = None,
    candidate_known: bool = False,
) -> ConvergenceTrace:
    """Solve orders ``N_min..N_max`` and compare with the smallest real critical value.

    ``candidate`` is the smallest real critical value when the caller already
    has it (``candidate_known=True``); otherwise it is computed here.
    """
    lo, hi = default_orders(f)
    N_min = lo if N_min is None else N_min
    N_max = N_min + 3 if N_max is None else N_max
    if N_max < N_min:
        raise RelaxationError("N_max must be >= N_min")

    results = []
    for N in range(N_min, N_max + 1):
        try:
            results.append(solve_relaxation(build_grad_relaxation(f, N), params))
        except (RelaxationError, ValueError) as exc:
            results.append(RelaxationResult(N=N, gamma_star=None, status="numerical_failure", message=str(exc)))

    caveats = []
    if not candidate_known:
        from .variety import VarietyError, candidate_infimum, solve_variety
        from .groebner import GroebnerError

        try:
            candidate = candidate_infimum(f, solve_variety(f))
        except (VarietyError, GroebnerError) as exc:
            candidate = None
            caveats.append(f"critical points unavailable: {exc}")

    solved = [(r.N, r.gamma_star) for r in results if r.status == "optimal"]
    slack = 10 * params.sdp.gap_tol
    monotone = all(g2 >= g1 - slack for (_, g1), (_, g2) in zip(solved, solved[1:]))
    stabilized_at = None
    for k in range(len(solved)):
        tail = [g for _, g in solved[k:]]
        if len(tail) >= 2 and max(tail) - min(tail) <= params.stab_tol:
            stabilized_at = solved[k][0]
            break
    stabilized = stabilized_at is not None

    matches = None
    if candidate is None:
        caveats.append("no real critical point: f does not attain a minimum, the bounds cannot reach f*")
    elif solved:
        matches = abs(solved[-1][1] - candidate) <= 1e-4
    caveats.append(
        "attainment of the infimum is not decided; the bound equals f* only when f attains its infimum"
    )
    return ConvergenceTrace(results, monotone, stabilized, stabilized_at, candidate, matches, caveats)
