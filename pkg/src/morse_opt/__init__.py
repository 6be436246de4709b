"""Morse certificates, gradient-ideal radicality and gradient SOS relaxations."""

__version__ = "0.1.0"

from .poly import Polynomial, gradient, hessian_at, parse_polynomial, to_text
from .groebner import GREVLEX, GRLEX, LEX, buchberger, gradient_basis, total_milnor_number
from .variety import (
    Tolerances,
    candidate_infimum,
    morse_certificate,
    radicality_report,
    solve_variety,
)
from .sdp import SDPParams, solve_sdp
from .sos import (
    RelaxParams,
    build_grad_relaxation,
    build_plain_sos,
    run_convergence_sweep,
    solve_relaxation,
    verify_identity,
)
from .report import AnalysisReport, analyze

__all__ = [
    "AnalysisReport",
    "GREVLEX",
    "GRLEX",
    "LEX",
    "Polynomial",
    "RelaxParams",
    "SDPParams",
    "Tolerances",
    "analyze",
    "buchberger",
    "build_grad_relaxation",
    "build_plain_sos",
    "candidate_infimum",
    "gradient",
    "gradient_basis",
    "hessian_at",
    "morse_certificate",
    "parse_polynomial",
    "radicality_report",
    "run_convergence_sweep",
    "solve_relaxation",
    "solve_sdp",
    "solve_variety",
    "to_text",
    "total_milnor_number",
    "verify_identity",
]
