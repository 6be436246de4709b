from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from morse_opt.poly import Polynomial, gradient, parse_polynomial
from morse_opt.sdp import min_eigenvalue
from morse_opt.sos import (
    NotPSDError,
    RelaxationError,
    RelaxParams,
    build_grad_relaxation,
    build_plain_sos,
    default_orders,
    extract_sos,
    reduce_relaxation,
    run_convergence_sweep,
    solve_relaxation,
    verify_identity,
)
from morse_opt.variety import candidate_infimum, radicality_report

P = parse_polynomial
UNATTAINED = "x1^2 + (x1*x2 - 1)^2"
PARAMS = RelaxParams()


def check_sound(res, params=PARAMS):
    """Certificate soundness for an optimal solve."""
    assert res.status == "optimal"
    assert res.identity_residual <= params.certificate_tol
    scale = max(1.0, float(np.abs(res.gram).max()))
    assert min_eigenvalue(res.gram) >= -params.extract_tol * scale


class TestBuild:
    def test_sum_of_squares_order_one(self):
        pr = build_grad_relaxation(P("x1^2 + x2^2"), 1)
        data = pr.exact
        assert sorted(data.layout.basis) == [(0, 0), (0, 1), (1, 0)]
        assert data.n_constraints == 6
        # multipliers have degree 2N - d + 1
        assert data.multiplier_degree == 1

    def test_unattained_order_three(self):
        pr = build_grad_relaxation(P(UNATTAINED), 3)
        data = pr.exact
        assert data.layout.size == 10
        assert data.multiplier_degree == 3
        cols = [r for r in pr.roles if r[0] == "multiplier"] + data.dropped
        assert len(cols) == 20
        assert data.n_constraints == 28  # monomials of degree <= 6 in two variables

    def test_double_well_order_two(self):
        pr = build_grad_relaxation(P("x1^4 - 2*x1^2"), 2)
        assert pr.exact.layout.basis == [(0,), (1,), (2,)]
        assert pr.exact.multiplier_degree == 1

    def test_symmetric_data(self):
        pr = build_grad_relaxation(P(UNATTAINED), 4)
        assert np.array_equal(pr.C, pr.C.T)
        assert np.array_equal(pr.A, pr.A.transpose(0, 2, 1))
        assert pr.roles[0] == ("gamma",) and pr.b[0] == 1 and not pr.b[1:].any()

    def test_order_too_small(self):
        with pytest.raises(RelaxationError):
            build_grad_relaxation(P("x1^4"), 1)
        with pytest.raises(RelaxationError):
            build_grad_relaxation(P("x1^2"), 0)

    def test_plain(self):
        pr = build_plain_sos(P(UNATTAINED))
        assert pr.exact.multiplier_degree is None
        assert all(r[0] != "multiplier" for r in pr.roles)
        assert pr.exact.layout.size == 6
        with pytest.raises(RelaxationError):
            build_plain_sos(P("x1^3 + x2^2"))

    @given(st.integers(1, 2), st.data())
    def test_role_round_trip(self, N, data):
        f = P(UNATTAINED) if N == 2 else P("x1^2 - 3*x1*x2 + 2*x2^2 + x1")
        pr = build_grad_relaxation(f, N + 1)
        y = [Fraction(data.draw(st.integers(-9, 9)), data.draw(st.integers(1, 5))) for _ in pr.roles]
        ex = pr.exact
        lhs = ex.layout.polynomial(ex.gram_exact(y), f.nvars)
        gamma = y[0]
        phi = [dict() for _ in range(f.nvars)]
        for role, v in zip(pr.roles, y):
            if role[0] == "multiplier":
                phi[role[1]][role[2]] = v
        rhs = f - gamma
        for terms, g in zip(phi, gradient(f)):
            rhs = rhs - Polynomial(terms, f.nvars) * g
        assert lhs == rhs
        # and the float data is the same matrix up to conversion
        Q = ex.gram_exact(y)
        dense = pr.slack([float(v) for v in y])
        for (i, j), v in Q.items():
            assert abs(dense[i, j] - float(v)) <= 1e-12 * max(1, abs(float(v)))


class TestExtract:
    def test_identity(self):
        sq = extract_sos(np.eye(2), [(0,), (1,)])
        assert sorted(sq, key=lambda p: p.degree) == [P("1"), P("x1")]

    def test_rank_one(self):
        (s,) = extract_sos([[1, -1], [-1, 1]], [(0,), (1,)])
        r, worst = verify_identity(P("(1 - x1)^2"), 0, [], [s])
        assert float(worst) <= 1e-15

    def test_tiny_negative_truncated(self):
        G = np.diag([1.0, -1e-12])
        assert len(extract_sos(G, [(0,), (1,)], tol=1e-9)) == 1

    def test_not_psd(self):
        with pytest.raises(NotPSDError):
            extract_sos(np.diag([1.0, -1e-3]), [(0,), (1,)], tol=1e-9)

    def test_not_symmetric(self):
        with pytest.raises(ValueError):
            extract_sos([[1, 1], [0, 1]], [(0,), (1,)])


class TestVerify:
    def test_unattained_identity(self):
        f = P(UNATTAINED)
        phis = [P("1/2*x1*(1 - x2^2)"), P("1/2*x2*(1 + x2^2)")]
        r, worst = verify_identity(f, 1, phis, [])
        assert r.is_zero() and worst == 0
        r, worst = verify_identity(f, Fraction(1001, 1000), phis, [])
        assert r == Polynomial.constant(Fraction(-1, 1000), 2)
        assert worst == Fraction(1, 1000)

    def test_squares_only(self):
        r, worst = verify_identity(P(UNATTAINED), 0, [], [P("x1", 2), P("x1*x2 - 1")])
        assert r.is_zero()

    def test_wrong_multiplier_count(self):
        with pytest.raises(ValueError):
            verify_identity(P(UNATTAINED), 0, [P("x1")], [])


class TestSolve:
    def test_sum_of_squares(self):
        res = solve_relaxation(build_grad_relaxation(P("x1^2 + x2^2"), 1))
        check_sound(res)
        assert abs(res.gamma_star) <= 1e-6

    def test_unattained(self):
        for N in (3, 4, 5):
            res = solve_relaxation(build_grad_relaxation(P(UNATTAINED), N))
            check_sound(res)
            assert abs(res.gamma_star - 1) <= 1e-4
            assert res.N == N and len(res.multipliers) == 2

    def test_double_well(self):
        res = solve_relaxation(build_grad_relaxation(P("x1^4 - 2*x1^2"), 2))
        check_sound(res)
        assert abs(res.gamma_star + 1) <= 1e-6

    def test_double_well_identity_from_result(self):
        f = P("x1^4 - 2*x1^2")
        res = solve_relaxation(build_grad_relaxation(f, 3))
        _, worst = verify_identity(f, Fraction(res.gamma_star), res.multipliers, res.sos_squares)
        # gamma_star is the float objective; the certificate uses the exact y
        assert float(worst) <= 1e-6

    def test_plain_values(self):
        for text, want in [("x1^2 + x2^2", 0), ("x1^4 - 2*x1^2", -1), (UNATTAINED, 0)]:
            res = solve_relaxation(build_plain_sos(P(text)))
            check_sound(res)
            assert abs(res.gamma_star - want) <= 1e-6, text
            assert res.N is None

    def test_unattained_plain_needs_facial_reduction(self):
        pr = build_plain_sos(P(UNATTAINED))
        red = reduce_relaxation(pr)
        # x2, x1^2 and x2^2 carry no weight in any Gram matrix of f - gamma
        assert red.exact.layout.basis == [(0, 0), (1, 0), (1, 1)]
        assert reduce_relaxation(build_grad_relaxation(P("x1^2 + x2^2"), 1)) is None

    def test_unattained_order_two_reports_status(self):
        res = solve_relaxation(build_grad_relaxation(P(UNATTAINED), 2))
        assert res.status in {"optimal", "infeasible", "max_iter", "numerical_failure"}
        if res.status == "optimal":
            check_sound(res)


class TestSweep:
    def test_sum_of_squares(self):
        t = run_convergence_sweep(P("x1^2 + x2^2"), 1, 3)
        assert [abs(g) <= 1e-6 for g in t.gammas] == [True] * 3
        assert t.monotone and t.stabilized and t.stabilized_at == 1
        assert t.candidate_infimum == 0 and t.matches_candidate

    def test_unattained(self):
        t = run_convergence_sweep(P(UNATTAINED), 3, 5)
        assert all(abs(g - 1) <= 1e-4 for g in t.gammas)
        assert t.monotone and t.stabilized
        assert t.candidate_infimum == 1 and t.matches_candidate
        assert any("attainment" in c for c in t.caveats)

    def test_double_well(self):
        t = run_convergence_sweep(P("x1^4 - 2*x1^2"), 2, 4)
        assert all(abs(g + 1) <= 1e-6 for g in t.gammas)
        assert t.monotone and t.matches_candidate

    def test_no_real_critical_point(self):
        t = run_convergence_sweep(P("x1^2 + (x1*x2 - 1)^2 + x1^3"), 2, 2)
        assert t.results[0].N == 2

    def test_defaults(self):
        assert default_orders(P(UNATTAINED)) == (2, 5)
        assert default_orders(P("x1^3 + x1")) == (2, 5)
        assert default_orders(P("x1^2")) == (1, 4)

    def test_bad_range(self):
        with pytest.raises(RelaxationError):
            run_convergence_sweep(P("x1^2"), 3, 2)


# Morse polynomials attaining their infimum at a non-degenerate real minimizer
ATTAINED = [
    "x1^4 - x1^2 + 1/4*x1",
    "x1^4 + x2^4 - 3*x1^2 + x1 + 2*x2^2 - x2",
    "x1^2 + x2^2 + x1*x2 - x1",
]


@pytest.mark.parametrize("text", ATTAINED)
def test_attainment_cross_check(text):
    f = P(text)
    rep = radicality_report(f)
    assert rep.morse.verdict == "morse" and rep.verdict == "radical"
    cand = candidate_infimum(f, rep.points)
    lo, _ = default_orders(f)
    t = run_convergence_sweep(f, lo, lo + 2, candidate=cand, candidate_known=True)
    assert t.monotone and t.stabilized
    g = [r.gamma_star for r in t.results if r.N == t.stabilized_at][0]
    assert abs(g - cand) <= 1e-4


@st.composite
def even_univariate(draw):
    d = draw(st.sampled_from([2, 4]))
    coeffs = [draw(st.integers(-5, 5)) for _ in range(d)] + [draw(st.integers(1, 5))]
    return Polynomial({(k,): c for k, c in enumerate(coeffs)}, 1)


@st.composite
def bivariate_quartic(draw):
    terms = {(4, 0): draw(st.integers(1, 3)), (0, 4): draw(st.integers(1, 3))}
    for m in [(2, 0), (0, 2), (1, 1), (1, 0), (0, 1), (2, 1), (1, 2)]:
        terms[m] = draw(st.integers(-3, 3))
    return Polynomial(terms, 2)


class TestProperties:
    @settings(max_examples=25)
    @given(st.one_of(even_univariate(), bivariate_quartic()))
    def test_monotone_sound_and_above_plain(self, f):
        lo, _ = default_orders(f)
        t = run_convergence_sweep(f, lo, lo + 1, candidate=None, candidate_known=True)
        solved = [r for r in t.results if r.status == "optimal"]
        for r in solved:
            check_sound(r)
        assert t.monotone
        plain = solve_relaxation(build_plain_sos(f))
        if plain.status == "optimal":
            check_sound(plain)
            for r in solved:
                assert plain.gamma_star <= r.gamma_star + 1e-6
