"""Critical points from multiplication matrices, and the Morse / radicality verdicts.

The points of ``V_grad(f)`` are the joint eigenvalues of the operators
"multiply by x_i" on ``C[X]/I_grad(f)``.  A single random combination of
those operators is eigen-decomposed; its eigenvalues are grouped into
clusters, one per point, and each coordinate is read off as the mean
eigenvalue of ``M_i`` restricted to the cluster's invariant subspace.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .groebner import (
    GREVLEX,
    GroebnerBasis,
    MonomialOrder,
    PositiveDimensionalError,
    QuotientBasis,
    exact_multiplication_matrix,
    gradient_basis,
    is_zero_dimensional,
    number_of_points,
    quotient_basis,
)
from .poly import Polynomial, evaluate, gradient, hessian_at

#: Seed of the random linear combination used to separate points.
DEFAULT_SEED = 20170815

#: Minimum ratio between the smallest inter-cluster and the largest
#: intra-cluster eigenvalue distance when clusters are wider than ``cluster``.
CLUSTER_GAP_RATIO = 100.0
# coordinates below this (relative to the point's size) are rounding noise
ROUNDOFF = 1e-13


class VarietyError(RuntimeError):
    pass


class InconclusiveError(VarietyError):
    """Eigenvalue clusters could not be separated unambiguously."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ResidualError(VarietyError):
    """A recovered point does not satisfy the gradient equations."""


class ConsistencyError(VarietyError):
    """Results contradict each other (e.g. more points than the quotient dimension)."""


@dataclass(frozen=True)
class Tolerances:
    cluster: float = 1e-6
    residual: float = 1e-8
    nondegeneracy: float = 1e-8
    value_gap: float = 1e-8
    real: float = 1e-8
    seed: int = DEFAULT_SEED

    def as_dict(self) -> dict:
        return {
            "cluster": self.cluster,
            "residual": self.residual,
            "nondegeneracy": self.nondegeneracy,
            "value_gap": self.value_gap,
            "real": self.real,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple[complex, ...]
    multiplicity: int
    critical_value: complex
    hessian_det: complex
    residual: float
    is_real: bool


@dataclass(frozen=True)
class MorseCertificate:
    verdict: str  # morse | not_morse_degenerate | not_morse_equal_values | inconclusive
    hessian_dets: tuple[complex, ...]
    relative_dets: tuple[float, ...]
    min_value_gap: Optional[float]
    nondegenerate: Optional[bool]
    distinct_values: Optional[bool]
    tolerances: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RadicalityReport:
    num_points: Optional[int]
    total_milnor: int
    verdict: str  # radical | not_radical | inconclusive
    morse: MorseCertificate
    points: tuple[CriticalPoint, ...] = ()
    exact_num_points: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)


def multiplication_matrices(gb: GroebnerBasis, qb: QuotientBasis) -> list[np.ndarray]:
    """Float matrices of multiplication by each variable on the standard monomials."""
    if not is_zero_dimensional(gb):
        raise PositiveDimensionalError("multiplication matrices need a zero-dimensional ideal")
    if any(len(m) != gb.nvars for m in qb.standard_monomials):
        raise ValueError("quotient basis does not match the Gröbner basis")
    mats = []
    for i in range(gb.nvars):
        exact = exact_multiplication_matrix(gb, qb, Polynomial.variable(i, gb.nvars))
        mats.append(np.array([[float(c) for c in row] for row in exact], dtype=float))
    return mats


def _cluster(eigs: np.ndarray, k: int, tol: Tolerances) -> tuple[list[list[int]], dict]:
    """Single-linkage grouping of ``eigs`` into exactly ``k`` clusters."""
    n = len(eigs)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges = sorted(
        (abs(eigs[a] - eigs[b]), a, b) for a, b in itertools.combinations(range(n), 2)
    )
    components = n
    d_in = 0.0
    d_out = math.inf
    numeric = n
    for d, a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if d <= tol.cluster:
            numeric -= 1
        if components == k:
            d_out = d
            break
        parent[ra] = rb
        components -= 1
        d_in = d
    diagnostics = {
        "expected_clusters": k,
        "clusters_at_cluster_tol": numeric,
        "max_intra_distance": d_in,
        "min_inter_distance": None if math.isinf(d_out) else d_out,
    }
    if components != k:
        raise InconclusiveError("could not form the expected number of clusters", diagnostics)
    if d_in > tol.cluster and d_out < CLUSTER_GAP_RATIO * d_in:
        raise InconclusiveError("eigenvalue clusters are not separated by a clear gap", diagnostics)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    return sorted(groups.values(), key=lambda g: min(g)), diagnostics


def _newton_polish(grads: list[Polynomial], jac: list[list[Polynomial]], p: np.ndarray):
    def residual(q):
        return max(abs(evaluate(g, q)) for g in grads)

    r0 = residual(p)
    J = np.array([[evaluate(h, p) for h in row] for row in jac], dtype=complex)
    F = np.array([evaluate(g, p) for g in grads], dtype=complex)
    try:
        step = np.linalg.solve(J, F)
    except np.linalg.LinAlgError:
        return p, r0
    if not np.all(np.isfinite(step)):
        return p, r0
    q = p - step
    r1 = residual(q)
    if r1 < r0:
        return q, r1
    return p, r0


def solve_variety(
    f: Polynomial,
    tol: Tolerances = Tolerances(),
    order: MonomialOrder = GREVLEX,
    gb: GroebnerBasis | None = None,
) -> list[CriticalPoint]:
    """All complex critical points of ``f`` with their local Milnor numbers."""
    if gb is None:
        gb = gradient_basis(f, order)
    if not is_zero_dimensional(gb):
        raise PositiveDimensionalError("critical locus is not finite")
    qb = quotient_basis(gb)
    if not len(qb):
        return []
    n = f.nvars
    mats = [M.T for M in multiplication_matrices(gb, qb)]
    k = number_of_points(gb)

    rng = np.random.default_rng(tol.seed)
    c = rng.standard_normal(n)
    c /= np.linalg.norm(c)
    A = sum(ci * Mi for ci, Mi in zip(c, mats))
    eigs = np.linalg.eigvals(A)
    groups, diagnostics = _cluster(eigs, k, tol)

    grads = gradient(f)
    jac = [[g.diff(j) for j in range(n)] for g in grads]
    d_out = diagnostics["min_inter_distance"] or math.inf
    points = []
    for members in groups:
        centre = eigs[members].mean()
        m = len(members)
        radius = min(d_out / 2, max(10 * diagnostics["max_intra_distance"], tol.cluster))
        T, Z, sdim = scipy.linalg.schur(
            A.astype(complex), output="complex", sort=lambda z: abs(z - centre) <= radius
        )
        if sdim != m:
            diagnostics = dict(diagnostics, schur_selected=sdim, cluster_size=m)
            raise InconclusiveError("invariant subspace does not match cluster size", diagnostics)
        U = Z[:, :m]
        loc = np.array([np.trace(U.conj().T @ Mi @ U) / m for Mi in mats], dtype=complex)
        if np.max(np.abs(loc.imag)) <= tol.real:
            loc = loc.real.astype(complex)
        loc, res = _newton_polish(grads, jac, loc)
        if res > tol.residual:
            raise ResidualError(
                f"point {loc.tolist()} has gradient residual {res:.3e} > {tol.residual:.1e}"
            )
        # clear round-off sized parts so the output does not depend on the seed
        scale = max(1.0, float(np.max(np.abs(loc))))
        loc = np.where(np.abs(loc.real) <= ROUNDOFF * scale, 0, loc.real) + 1j * np.where(
            np.abs(loc.imag) <= ROUNDOFF * scale, 0, loc.imag
        )
        is_real = bool(np.max(np.abs(loc.imag)) <= tol.real)
        if is_real:
            loc = loc.real.astype(complex)
        H = hessian_at(f, loc)
        points.append(
            CriticalPoint(
                location=tuple(complex(z) for z in loc),
                multiplicity=m,
                critical_value=evaluate(f, loc),
                hessian_det=complex(np.linalg.det(H)),
                residual=float(res),
                is_real=is_real,
            )
        )
    if sum(p.multiplicity for p in points) != len(qb):
        raise ConsistencyError("multiplicities do not add up to the total Milnor number")
    points.sort(key=lambda p: tuple((round(z.real, 9), round(z.imag, 9)) for z in p.location))
    return points


def _relative_det(f: Polynomial, p: CriticalPoint) -> float:
    H = hessian_at(f, p.location)
    scale = max(1.0, float(np.linalg.norm(H)))
    return abs(p.hessian_det) / scale ** f.nvars


def morse_certificate(
    f: Polynomial, points: Sequence[CriticalPoint], tol: Tolerances = Tolerances()
) -> MorseCertificate:
    """Decide whether every critical point is non-degenerate with distinct values.

    ``|det H|`` is measured relative to ``max(1, ||H||_F)^n`` and value gaps
    relative to ``max(1, |v_i|, |v_j|)``.  A measure inside ``(tol, 10 tol]``
    is treated as undecidable.
    """
    rel = [_relative_det(f, p) for p in points]
    degenerate = any(r <= tol.nondegeneracy for r in rel)
    det_band = any(tol.nondegeneracy < r <= 10 * tol.nondegeneracy for r in rel)

    gaps = [
        abs(a.critical_value - b.critical_value)
        / max(1.0, abs(a.critical_value), abs(b.critical_value))
        for a, b in itertools.combinations(points, 2)
    ]
    min_gap = min(gaps) if gaps else None
    equal = any(g <= tol.value_gap for g in gaps)
    gap_band = any(tol.value_gap < g <= 10 * tol.value_gap for g in gaps)

    nondegenerate = False if degenerate else (None if det_band else True)
    distinct = False if equal else (None if gap_band else True)
    if degenerate:
        verdict = "not_morse_degenerate"
    elif equal:
        verdict = "not_morse_equal_values"
    elif det_band or gap_band:
        verdict = "inconclusive"
    else:
        verdict = "morse"
    if verdict == "morse" and any(p.multiplicity != 1 for p in points):
        raise ConsistencyError("non-degenerate critical point with local Milnor number above 1")
    return MorseCertificate(
        verdict=verdict,
        hessian_dets=tuple(p.hessian_det for p in points),
        relative_dets=tuple(rel),
        min_value_gap=min_gap,
        nondegenerate=nondegenerate,
        distinct_values=distinct,
        tolerances={"nondegeneracy": tol.nondegeneracy, "value_gap": tol.value_gap},
    )


def radicality_report(
    f: Polynomial,
    tol: Tolerances = Tolerances(),
    order: MonomialOrder = GREVLEX,
    gb: GroebnerBasis | None = None,
) -> RadicalityReport:
    """Compare the number of critical points with the total Milnor number."""
    if gb is None:
        gb = gradient_basis(f, order)
    if not is_zero_dimensional(gb):
        raise PositiveDimensionalError("critical locus is not finite")
    mu = len(quotient_basis(gb))
    exact = number_of_points(gb)
    try:
        points = solve_variety(f, tol, order, gb=gb)
    except InconclusiveError as exc:
        morse = MorseCertificate("inconclusive", (), (), None, None, None, tol.as_dict())
        return RadicalityReport(
            None, mu, "inconclusive", morse, (), exact, dict(exc.diagnostics, reason=str(exc))
        )
    num = len(points)
    if num > mu:
        raise ConsistencyError(f"{num} critical points exceed total Milnor number {mu}")
    verdict = "radical" if num == mu else "not_radical"
    morse = morse_certificate(f, points, tol)
    if morse.verdict == "morse" and verdict != "radical":
        raise ConsistencyError("Morse polynomial with a non-radical gradient ideal")
    return RadicalityReport(num, mu, verdict, morse, tuple(points), exact)


def candidate_infimum(f: Polynomial, points: Sequence[CriticalPoint]) -> Optional[float]:
    """Smallest real critical value, or ``None`` when no critical point is real."""
    real = [p.critical_value.real for p in points if p.is_real]
    return min(real) if real else None
