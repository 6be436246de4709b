"""Dense primal-dual interior-point solver for a single-block SDP.

Solves

    maximize    b^T y
    subject to  S = C - sum_k y_k A_k  is positive semidefinite

together with its dual ``minimize <C, X> s.t. <A_k, X> = b_k, X psd`` through
a homogeneous self-dual embedding.  Directions use Nesterov-Todd scaling with
a Mehrotra predictor-corrector; iterates are stored as factors ``S = Ls Ls^T``
and ``X = Lx Lx^T`` so the scaling never needs a fresh Cholesky of a nearly
singular matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, TextIO

import numpy as np
import scipy.linalg

STEP_FRACTION = 0.98
INFEASIBILITY_RATIO = 1e8
REFINEMENT_STEPS = 3
STALL_ITERATIONS = 20
DIVERGENCE_RATIO = 1e6


class SDPInputError(ValueError):
    pass


@dataclass
class SDPProblem:
    """``max b^T y  s.t.  C - sum_k y_k A[k] psd``; ``roles[k]`` describes ``y_k``."""

    C: np.ndarray
    A: np.ndarray
    b: np.ndarray
    roles: list[Any] = field(default_factory=list)
    exact: Any = None

    @property
    def size(self) -> int:
        return self.C.shape[0]

    @property
    def nvars(self) -> int:
        return self.b.shape[0]

    def slack(self, y) -> np.ndarray:
        return self.C - np.tensordot(np.asarray(y, dtype=float), self.A, axes=1)


@dataclass(frozen=True)
class SDPParams:
    gap_tol: float = 1e-8
    feasibility_tol: float = 1e-8
    max_iter: int = 200


@dataclass
class SDPSolution:
    status: str  # optimal | infeasible | unbounded | max_iter | numerical_failure
    y: np.ndarray
    S: np.ndarray
    X: np.ndarray
    objective: float
    iterations: int
    gap: float
    primal_residual: float
    dual_residual: float


def _validate(p: SDPProblem):
    C, A, b = p.C, p.A, p.b
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise SDPInputError("C must be square")
    n = C.shape[0]
    if A.ndim != 3 or A.shape[1:] != (n, n):
        raise SDPInputError(f"A must have shape (m, {n}, {n})")
    if b.shape != (A.shape[0],):
        raise SDPInputError("b and A disagree on the number of variables")
    if A.shape[0] < 1:
        raise SDPInputError("at least one variable is required")
    scale = max(1.0, float(np.abs(C).max()), float(np.abs(A).max()))
    if not np.allclose(C, C.T, atol=1e-12 * scale, rtol=0):
        raise SDPInputError("C is not symmetric")
    if not np.allclose(A, A.transpose(0, 2, 1), atol=1e-12 * scale, rtol=0):
        raise SDPInputError("some A_k is not symmetric")


def min_eigenvalue(S) -> float:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise SDPInputError("matrix must be square")
    scale = max(1.0, float(np.abs(S).max())) if S.size else 1.0
    if not np.allclose(S, S.T, atol=1e-12 * scale, rtol=0):
        raise SDPInputError("matrix is not symmetric")
    if S.size == 0:
        return math.inf
    return float(np.linalg.eigvalsh(S)[0])


def _sym(M):
    return (M + M.T) / 2


def _max_step(lam_isqrt: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha with diag(lam) + alpha d psd."""
    ev = np.linalg.eigvalsh(_sym(lam_isqrt[:, None] * d * lam_isqrt[None, :]))[0]
    return math.inf if ev >= 0 else -1.0 / ev


class _SchurSolver:
    """Solves with ``M = Gt Gt^T`` through a QR factorization of ``Gt^T``.

    Terms of the form ``M^{-1} Gt w`` become least-squares solves, which
    avoids squaring the condition number of the scaled constraint matrix.
    """

    def __init__(self, Gtflat: np.ndarray):
        self.G = Gtflat
        self.Q, self.R = np.linalg.qr(Gtflat.T)
        d = np.abs(np.diag(self.R))
        self.pinv = None
        if d.size and d.min() <= 1e-13 * max(d.max(), 1e-300):
            self.pinv = np.linalg.pinv(Gtflat @ Gtflat.T, hermitian=True)

    def normal(self, r):
        """``M^{-1} r``."""
        if self.pinv is not None:
            return self.pinv @ r
        t = scipy.linalg.solve_triangular(self.R, r, trans="T")
        return scipy.linalg.solve_triangular(self.R, t)

    def range(self, w):
        """``M^{-1} Gt w`` for ``w`` flattened like a matrix."""
        if self.pinv is not None:
            return self.pinv @ (self.G @ w)
        return scipy.linalg.solve_triangular(self.R, self.Q.T @ w)


def solve_sdp(p: SDPProblem, params: SDPParams = SDPParams()) -> SDPSolution:
    _validate(p)
    n, m = p.size, p.nvars
    # normalized data: the iterates do not depend on a common scaling of the input
    dscale = max(float(np.abs(p.C).max()), float(np.abs(p.A).max())) or 1.0
    oscale = float(np.abs(p.b).max()) or 1.0
    H = p.C.astype(float) / dscale
    G = p.A.astype(float) / dscale
    c = -p.b.astype(float) / oscale
    Gflat = G.reshape(m, n * n)
    hnorm = max(1.0, float(np.linalg.norm(H)))
    cnorm = max(1.0, float(np.linalg.norm(c)))

    x = np.zeros(m)
    Ls = np.eye(n)  # S = Ls Ls^T
    Lz = np.eye(n)  # Z = Lz Lz^T (dual matrix X)
    tau, kappa = 1.0, 1.0
    status = "max_iter"
    it = 0
    gap = pres = dres = math.inf
    best: tuple = (math.inf, 0, x, Ls, Lz, tau, pres, dres, gap)

    def Gop(v):
        return np.tensordot(v, G, axes=1)

    def Gadj(Z):
        return Gflat @ Z.ravel()

    for it in range(params.max_iter + 1):
        S = Ls @ Ls.T
        Z = Lz @ Lz.T
        rx = Gadj(Z) + c * tau
        rz = S + Gop(x) - H * tau
        hz = float(np.sum(H * Z))
        cx = float(c @ x)
        rt = kappa + cx + hz
        sz = float(np.sum(S * Z))
        mu = (sz + tau * kappa) / (n + 1)

        pcost = cx / tau
        pres = float(np.linalg.norm(rz)) / tau / hnorm
        dres = float(np.linalg.norm(rx)) / tau / cnorm
        gap = sz / tau**2 / max(1.0, abs(pcost))
        merit = max(pres, dres, gap)
        if np.isfinite(merit) and merit < best[0]:
            best = (merit, it, x.copy(), Ls.copy(), Lz.copy(), tau, pres, dres, gap)
        if pres <= params.feasibility_tol and dres <= params.feasibility_tol and gap <= params.gap_tol:
            # the slack rebuilt from y must be psd too, not only the iterate
            if np.linalg.eigvalsh(_sym(H - Gop(x / tau)))[0] >= -params.feasibility_tol:
                status = "optimal"
                break
        if kappa > INFEASIBILITY_RATIO * tau:
            if hz < 0:
                status = "infeasible"
                break
            if cx < 0:
                status = "unbounded"
                break
        if hz < 0 and np.linalg.norm(Gadj(Z)) <= params.feasibility_tol * -hz:
            status = "infeasible"
            break
        if cx < 0 and np.linalg.norm(Gop(x) + S) <= params.feasibility_tol * -cx * hnorm:
            status = "unbounded"
            break
        if it == params.max_iter:
            break
        if it - best[1] >= STALL_ITERATIONS or not merit <= DIVERGENCE_RATIO * best[0]:
            # ill-posed instances (tau and kappa both vanishing) drift away
            status = "numerical_failure"
            break

        # Nesterov-Todd scaling: R^{-1} S R^{-T} = R^T Z R = diag(lam)
        try:
            U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
        except np.linalg.LinAlgError:
            status = "numerical_failure"
            break
        if not np.all(lam > 0) or not np.all(np.isfinite(lam)):
            status = "numerical_failure"
            break
        lis = 1 / np.sqrt(lam)
        R = (Ls @ Vt.T) * lis[None, :]
        Rinv = lis[:, None] * (U.T @ Lz.T)
        Gt = np.einsum("ij,kjl,ml->kim", Rinv, G, Rinv, optimize=True)
        Gtflat = Gt.reshape(m, n * n)
        Ht = Rinv @ H @ Rinv.T
        rzt = Rinv @ rz @ Rinv.T
        schur = _SchurSolver(Gtflat)
        dx2 = schur.range(Ht.ravel()) - schur.normal(c)
        dz2 = Gop_t(Gt, dx2) - Ht
        den = float(c @ dx2) + float(np.sum(Ht * dz2)) - kappa / tau
        gamma = (lam[:, None] + lam[None, :]) / 2

        def kkt_solve(r1, r2, r3, rc, rtk):
            drhs = rc / gamma
            dx1 = schur.normal(r1) - schur.range((drhs - r2).ravel())
            dz1 = Gop_t(Gt, dx1) + drhs - r2
            dtau = (r3 - rtk / tau - float(c @ dx1) - float(np.sum(Ht * dz1))) / den
            dx = dx1 + dx2 * dtau
            dzt = dz1 + dz2 * dtau
            dst = drhs - dzt
            dkappa = (rtk - kappa * dtau) / tau
            return dx, dst, dzt, dtau, dkappa

        def kkt_apply(dx, dst, dzt, dtau, dkappa):
            return (
                Gtflat @ dzt.ravel() + c * dtau,
                dst + Gop_t(Gt, dx) - Ht * dtau,
                dkappa + float(c @ dx) + float(np.sum(Ht * dzt)),
                gamma * (dst + dzt),
                tau * dkappa + kappa * dtau,
            )

        def direction(eta, rhs_c, rhs_tk):
            rhs = (-eta * rx, -eta * rzt, -eta * rt, rhs_c, rhs_tk)
            d = kkt_solve(*rhs)
            for _ in range(REFINEMENT_STEPS):
                got = kkt_apply(*d)
                corr = kkt_solve(*(a - b for a, b in zip(rhs, got)))
                d = tuple(a + b for a, b in zip(d, corr))
            dx, dst, dzt, dtau, dkappa = d
            return dx, _sym(dst), _sym(dzt), dtau, dkappa

        def step_length(dst, dzt, dtau, dkappa):
            a = min(_max_step(lis, dst), _max_step(lis, dzt))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        lam2 = np.diag(lam**2)
        dxa, dsa, dza, dta, dka = direction(1.0, -lam2, -tau * kappa)
        alpha_a = min(1.0, step_length(dsa, dza, dta, dka))
        sigma = (1 - alpha_a) ** 3
        corr = (dsa @ dza + dza @ dsa) / 2
        rhs_c = -lam2 + sigma * mu * np.eye(n) - corr
        rhs_tk = -tau * kappa + sigma * mu - dta * dka
        dx, dst, dzt, dtau, dkappa = direction(1 - sigma, rhs_c, rhs_tk)
        alpha = min(1.0, STEP_FRACTION * step_length(dst, dzt, dtau, dkappa))
        if not np.isfinite(alpha) or alpha <= 0:
            status = "numerical_failure"
            break

        sq = np.sqrt(lam)
        try:
            L1 = np.linalg.cholesky(_sym(np.eye(n) + alpha * lis[:, None] * dst * lis[None, :]))
            L2 = np.linalg.cholesky(_sym(np.eye(n) + alpha * lis[:, None] * dzt * lis[None, :]))
        except np.linalg.LinAlgError:
            status = "numerical_failure"
            break
        Rinv_T = (Lz @ U) * lis[None, :]
        Ls = R @ (sq[:, None] * L1)
        Lz = Rinv_T @ (sq[:, None] * L2)
        x = x + alpha * dx
        tau += alpha * dtau
        kappa += alpha * dkappa

    if status in ("max_iter", "numerical_failure") and math.isfinite(best[0]):
        _, _, x, Ls, Lz, tau, pres, dres, gap = best
    Z = Lz @ Lz.T
    y = x / tau
    return SDPSolution(
        status=status,
        y=y,
        S=p.slack(y),
        X=Z / tau * (oscale / dscale),
        objective=float(p.b @ y),
        iterations=it,
        gap=gap,
        primal_residual=pres,
        dual_residual=dres,
    )


def Gop_t(Gt: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.tensordot(v, Gt, axes=1)


# -- SDPA sparse export ------------------------------------------------------------

def write_sdpa(p: SDPProblem, out: TextIO) -> None:
    """Write ``p`` in SDPA sparse format.

    SDPA solves ``min c^T x s.t. sum F_i x_i - F_0 psd``; with ``x = y`` this is
    ``c = -b``, ``F_0 = -C``, ``F_k = -A_k``.  Each nonzero upper-triangle entry
    becomes one line ``matrix block row col value``.
    """
    m, n = p.nvars, p.size
    out.write('"morse-opt dual-form SDP: max b^T y s.t. C - sum y_k A_k psd"\n')
    out.write(f"{m} = mDIM\n1 = nBLOCK\n{n} = bLOCKsTRUCT\n")
    out.write(" ".join(repr(float(-v)) for v in p.b) + "\n")
    mats = [-p.C] + [-p.A[k] for k in range(m)]
    for idx, F in enumerate(mats):
        rows, cols = np.nonzero(np.triu(F))
        for r, cc in zip(rows, cols):
            out.write(f"{idx} 1 {r + 1} {cc + 1} {float(F[r, cc])!r}\n")


def read_sdpa(src: TextIO) -> SDPProblem:
    lines = [ln.strip() for ln in src if ln.strip() and ln.strip()[0] not in '"*']
    m = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    if nblocks != 1:
        raise SDPInputError("only single-block problems are supported")
    n = int(lines[2].replace(",", " ").split()[0])
    cvec = np.array([float(v) for v in lines[3].replace(",", " ").replace("{", " ").replace("}", " ").split()])
    F = np.zeros((m + 1, n, n))
    for ln in lines[4:]:
        k, blk, r, cc, v = ln.split()
        r, cc = int(r) - 1, int(cc) - 1
        F[int(k), r, cc] = float(v)
        F[int(k), cc, r] = float(v)
    return SDPProblem(C=-F[0], A=-F[1:], b=-cvec)
