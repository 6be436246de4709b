"""``morse-opt`` command line: analyze, optimize, certify, demo.

Exit codes: 0 completed, 1 error (JSON ``error.code`` names it), 2
inconclusive, 3 certificate with a nonzero residual.
"""

from __future__ import annotations

import argparse
import re
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .groebner import GREVLEX, GRLEX, LEX, PositiveDimensionalError, ResourceLimitError
from .poly import (
    ExponentOverflowError,
    ParseError,
    Polynomial,
    UnknownVariableError,
    evaluate,
    parse_polynomial,
    to_text,
)
from .report import SCHEMA, AnalysisReport, analyze, dumps, float_text, fmt, jsonable, trace_dict
from .sdp import SDPParams
from .sos import RelaxationError, RelaxParams, run_convergence_sweep, verify_identity
from .variety import DEFAULT_SEED, ConsistencyError, ResidualError, Tolerances

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_RESIDUAL = 0, 1, 2, 3
ORDERS = {"grevlex": GREVLEX, "lex": LEX, "grlex": GRLEX}

DEMO_POLY = "x1^2 + (x1*x2 - 1)^2"
DEMO_CERTIFICATE = """\
# f - 1 = phi1 * df/dx1 + phi2 * df/dx2, no squares needed
gamma = 1
phi1 = 1/2*x1*(1 - x2^2)
phi2 = 1/2*x2*(1 + x2^2)
"""


class CLIError(Exception):
    def __init__(self, code: str, message: str, **details):
        super().__init__(message)
        self.code = code
        self.details = details


# -- certificate files --------------------------------------------------------------

@dataclass
class Certificate:
    gamma: Fraction
    multipliers: list[Polynomial]
    squares: list[Polynomial]
    floating: bool


_LINE = re.compile(r"^\s*(gamma|phi(\d+)|square)\s*=\s*(.+?)\s*$")
_DECIMAL = re.compile(r"\d\.|\.\d|\d[eE][+-]?\d")


def parse_certificate(text: str, nvars: int) -> Certificate:
    """Read ``gamma = ...``, ``phiK = ...`` and ``square = ...`` lines.

    ``#`` starts a comment.  Missing multipliers are zero.  Any decimal
    literal switches the certificate to float mode.
    """
    gamma = None
    phis: dict[int, Polynomial] = {}
    squares = []
    floating = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise CLIError("malformed_certificate", f"line {lineno}: expected 'name = polynomial'")
        key, idx, body = m.groups()
        floating = floating or bool(_DECIMAL.search(body))
        try:
            p = parse_polynomial(body, nvars)
        except ParseError as exc:
            raise CLIError("malformed_certificate", f"line {lineno}: {exc}") from exc
        if key == "gamma":
            if gamma is not None:
                raise CLIError("malformed_certificate", f"line {lineno}: gamma given twice")
            if not p.is_constant():
                raise CLIError("malformed_certificate", f"line {lineno}: gamma must be a constant")
            gamma = p.coeff((0,) * nvars)
        elif key == "square":
            squares.append(p)
        else:
            i = int(idx)
            if not 1 <= i <= nvars:
                raise CLIError("malformed_certificate", f"line {lineno}: phi{i} outside 1..{nvars}")
            if i in phis:
                raise CLIError("malformed_certificate", f"line {lineno}: phi{i} given twice")
            phis[i] = p
    if gamma is None:
        raise CLIError("malformed_certificate", "missing 'gamma = ...' line")
    multipliers = [phis.get(i, Polynomial.zero(nvars)) for i in range(1, nvars + 1)] if phis else []
    return Certificate(gamma, multipliers, squares, floating)


def write_certificate(result, out) -> None:
    """Write a solved relaxation in the certificate format (float mode)."""
    out.write(f"# order N = {result.N}, status {result.status}\n")
    out.write(f"gamma = {float(result.gamma_star)!r}\n")
    for i, phi in enumerate(result.multipliers, 1):
        out.write(f"phi{i} = {_repr_text(phi)}\n")
    for s in result.sos_squares:
        out.write(f"square = {_repr_text(s)}\n")


def _repr_text(p: Polynomial) -> str:
    # shortest round-trip decimals: parsing gives back the same doubles
    return to_text(p, lambda a: repr(float(a)))


# -- argument handling --------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-e", "--expr", help="polynomial given inline instead of a file")
    p.add_argument("--json", action="store_true", help="print the JSON document")
    p.add_argument("--nvars", type=int, help="number of variables (default: highest index used)")
    p.add_argument("--tol-cluster", type=float, default=1e-6)
    p.add_argument("--tol-residual", type=float, default=1e-8)
    p.add_argument("--tol-nondegen", type=float, default=1e-8)
    p.add_argument("--tol-value-gap", type=float, default=1e-8)
    p.add_argument("--order", choices=sorted(ORDERS), default="grevlex")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--nmin", type=int)
    p.add_argument("--nmax", type=int)
    p.add_argument("--gap-tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--cert-tol", type=float, default=1e-6, help="certificate residual tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morse-opt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"morse-opt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="critical points, Morse and radicality certificates")
    a.add_argument("input", nargs="?", help="file holding one polynomial")
    _common(a)

    o = sub.add_parser("optimize", help="gradient SOS bounds for a range of orders")
    o.add_argument("input", nargs="?", help="file holding one polynomial")
    o.add_argument("--write-cert", metavar="PATH", help="save the last solved certificate")
    _common(o)

    c = sub.add_parser("certify", help="check a certificate exactly")
    c.add_argument("paths", nargs="+", metavar="FILE", help="[polynomial file] certificate file")
    _common(c)

    d = sub.add_parser("demo", help="walk through the x1^2 + (x1*x2 - 1)^2 example")
    _common(d)
    return parser


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CLIError("io_error", f"{path}: {exc.strerror or exc}") from exc


def _polynomial(text: str, nvars: Optional[int]) -> Polynomial:
    body = "\n".join(line.split("#", 1)[0] for line in text.splitlines()).strip()
    if not body:
        raise CLIError("parse_error", "empty input")
    try:
        return parse_polynomial(body, nvars if nvars is not None else "infer")
    except UnknownVariableError as exc:
        raise CLIError("unknown_variable", str(exc)) from exc
    except ExponentOverflowError as exc:
        raise CLIError("exponent_overflow", str(exc)) from exc
    except ParseError as exc:
        raise CLIError("parse_error", str(exc)) from exc


def _input(args, path: Optional[str]) -> Polynomial:
    if args.expr is not None and path is not None:
        raise CLIError("usage_error", "give either a file or -e, not both")
    if args.expr is None and path is None:
        raise CLIError("usage_error", "no polynomial given (file path or -e)")
    text = args.expr if args.expr is not None else _read(path)
    return _polynomial(text, args.nvars)


def _tolerances(args) -> Tolerances:
    return Tolerances(
        cluster=args.tol_cluster,
        residual=args.tol_residual,
        nondegeneracy=args.tol_nondegen,
        value_gap=args.tol_value_gap,
        seed=args.seed,
    )


def _relax_params(args) -> RelaxParams:
    sdp = SDPParams(gap_tol=args.gap_tol, feasibility_tol=args.gap_tol, max_iter=args.max_iter)
    return RelaxParams(sdp=sdp, certificate_tol=args.cert_tol)


def _analysis(f: Polynomial, args) -> AnalysisReport:
    try:
        return analyze(f, _tolerances(args), ORDERS[args.order])
    except PositiveDimensionalError as exc:
        raise CLIError(
            "positive_dimensional",
            f"{exc}; total Milnor number is infinite",
            free_variables=[f"x{i + 1}" for i in exc.free_variables],
        ) from exc
    except ResourceLimitError as exc:
        raise CLIError("resource_limit", str(exc)) from exc
    except ResidualError as exc:
        raise CLIError("residual_exceeded", str(exc)) from exc
    except ConsistencyError as exc:
        raise CLIError("consistency_error", str(exc)) from exc


def _analysis_exit(rep: AnalysisReport) -> int:
    if "inconclusive" in (rep.morse_verdict, rep.radical_verdict):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# -- text rendering ---------------------------------------------------------------

def _cplx(v) -> str:
    re_, im = v
    if im == 0:
        return fmt(re_) if isinstance(re_, float) else str(re_)
    return f"{fmt(re_)}{'+' if im >= 0 else '-'}{fmt(abs(im))}i"


def render_analysis(rep: AnalysisReport) -> str:
    lines = [
        f"polynomial      {rep.input}",
        f"variables       {rep.nvars}    degree {rep.degree}",
        f"convenient      {'yes' if rep.convenient else 'no'}",
        f"Milnor number   {rep.milnor_number}",
        f"|V_grad|        {rep.num_points}",
        "critical points:",
    ]
    for p in rep.critical_points:
        loc = ", ".join(_cplx(z) for z in p["location"])
        lines.append(
            f"  ({loc})  mult {p['multiplicity']}  value {_cplx(p['value'])}"
            f"  det H {_cplx(p['hessian_det'])}  {'real' if p['is_real'] else 'complex'}"
        )
    ci = rep.candidate_infimum
    lines += [
        f"Morse verdict   {rep.morse_verdict}",
        f"radicality      {rep.radical_verdict}",
        f"min real critical value  {'none' if ci is None else fmt(ci)}",
        "tolerances      " + ", ".join(f"{k}={v}" for k, v in rep.tolerances.items()),
    ]
    return "\n".join(lines) + "\n"


def render_sweep(trace: dict) -> str:
    lines = ["   N  status              gamma               residual    iters"]
    for r in trace["results"]:
        g = "-" if r["gamma"] is None else fmt(r["gamma"])
        res = "-" if r["identity_residual"] is None else f"{r['identity_residual']:.3e}"
        lines.append(f"{r['N']:>4}  {r['status']:<18}  {g:<18}  {res:<10}  {r['iterations']:>5}")
    ci = trace["candidate_infimum"]
    lines.append(f"monotone {trace['monotone']}, stabilized {trace['stabilized']}"
                 f" (at N={trace['stabilized_at']})")
    lines.append(f"min real critical value {'none' if ci is None else fmt(ci)};"
                 f" last bound matches it: {trace['matches_candidate']}")
    lines += [f"caveat: {c}" for c in trace["caveats"]]
    return "\n".join(lines) + "\n"


# -- commands -----------------------------------------------------------------------

def cmd_analyze(args) -> tuple[int, dict, str]:
    f = _input(args, args.input)
    rep = _analysis(f, args)
    return _analysis_exit(rep), rep.to_dict(), render_analysis(rep)


def _sweep(f: Polynomial, args, rep: Optional[AnalysisReport]) -> tuple[dict, object]:
    known = rep is not None
    cand = rep.candidate_infimum if known else None
    try:
        trace = run_convergence_sweep(
            f, args.nmin, args.nmax, _relax_params(args), candidate=cand, candidate_known=known
        )
    except RelaxationError as exc:
        raise CLIError("invalid_order", str(exc)) from exc
    return trace_dict(trace), trace


def cmd_optimize(args) -> tuple[int, dict, str]:
    f = _input(args, args.input)
    t0 = time.perf_counter()
    try:
        rep: Optional[AnalysisReport] = _analysis(f, args)
        analysis_error = None
    except CLIError as exc:
        if exc.code not in ("positive_dimensional", "residual_exceeded", "resource_limit"):
            raise
        rep, analysis_error = None, {"code": exc.code, "message": str(exc)}
    sweep, trace = _sweep(f, args, rep)
    if args.write_cert:
        solved = [r for r in trace.results if r.status == "optimal"]
        if solved:
            with open(args.write_cert, "w", encoding="utf-8") as fh:
                write_certificate(solved[-1], fh)
    doc = {
        "schema": SCHEMA,
        "command": "optimize",
        "version": __version__,
        "input": to_text(f),
        "analysis": None if rep is None else rep.to_dict(),
        "analysis_error": analysis_error,
        "sweep": sweep,
        "timings": jsonable({"total": time.perf_counter() - t0}),
    }
    text = (render_analysis(rep) if rep else f"analysis failed: {analysis_error['message']}\n")
    text += "\n" + render_sweep(sweep)
    ok = any(r["status"] == "optimal" for r in sweep["results"])
    return (EXIT_OK if ok else EXIT_INCONCLUSIVE), doc, text


def certify(f: Polynomial, cert: Certificate, tol: float) -> tuple[int, dict]:
    residual, worst = verify_identity(f, cert.gamma, cert.multipliers, cert.squares)
    passed = worst <= Fraction(tol) if cert.floating else worst == 0
    doc = {
        "schema": SCHEMA,
        "command": "certify",
        "version": __version__,
        "input": to_text(f),
        "mode": "float" if cert.floating else "exact",
        "gamma": (float_text if cert.floating else to_text)(Polynomial.constant(cert.gamma, f.nvars)),
        "residual": float_text(residual) if cert.floating else to_text(residual),
        "max_abs_residual": jsonable(float(worst)),
        "tolerance": jsonable(tol) if cert.floating else 0,
        "verified": passed,
    }
    return (EXIT_OK if passed else EXIT_RESIDUAL), doc


def render_certify(doc: dict) -> str:
    return (
        f"polynomial   {doc['input']}\n"
        f"mode         {doc['mode']}\n"
        f"gamma        {doc['gamma']}\n"
        f"residual     {doc['residual']}\n"
        f"max |coeff|  {doc['max_abs_residual']}\n"
        f"verified     {'yes' if doc['verified'] else 'no'}\n"
    )


def cmd_certify(args) -> tuple[int, dict, str]:
    if args.expr is not None:
        if len(args.paths) != 1:
            raise CLIError("usage_error", "with -e give exactly one certificate file")
        f = _input(args, None)
    else:
        if len(args.paths) != 2:
            raise CLIError("usage_error", "expected a polynomial file and a certificate file")
        f = _input(args, args.paths[0])
    cert = parse_certificate(_read(args.paths[-1]), f.nvars)
    code, doc = certify(f, cert, args.cert_tol)
    return code, doc, render_certify(doc)


def cmd_demo(args) -> tuple[int, dict, str]:
    f = parse_polynomial(DEMO_POLY)
    if args.nmin is None and args.nmax is None:
        args.nmin, args.nmax = 3, 5
    rep = _analysis(f, args)
    sweep, _ = _sweep(f, args, rep)
    _, cert_doc = certify(f, parse_certificate(DEMO_CERTIFICATE, 2), args.cert_tol)
    y = 1e3
    sample = evaluate(f, (1 / y, y)).real
    gammas = [r["gamma"] for r in sweep["results"]]
    checks = {
        "infimum_zero_by_sampling": sample < 1e-5,
        "gamma_equals_one": bool(gammas)
        and all(g is not None and abs(g - 1) <= 1e-4 for g in gammas),
        "morse": rep.morse_verdict == "morse",
        "radical": rep.radical_verdict == "radical" and rep.milnor_number == 1,
        "identity_exact": cert_doc["verified"],
    }
    doc = {
        "schema": SCHEMA,
        "command": "demo",
        "version": __version__,
        "input": rep.input,
        "sample": {"point": jsonable([1 / y, y]), "value": jsonable(sample)},
        "analysis": rep.to_dict(),
        "sweep": sweep,
        "certificate": cert_doc,
        "checks": checks,
    }
    text = (
        f"f = {rep.input}\n"
        f"f(1/y, y) = 1/y^2 -> 0: f({fmt(1 / y)}, {fmt(y)}) = {fmt(sample)}, so f* = 0"
        " but no minimizer exists\n\n"
        + render_analysis(rep)
        + "\n"
        + render_sweep(sweep)
        + "\nidentity f - 1 = phi1 * df/dx1 + phi2 * df/dx2:\n"
        + render_certify(cert_doc)
        + "\n"
        + "".join(f"[{'PASS' if ok else 'FAIL'}] {name}\n" for name, ok in checks.items())
    )
    return (EXIT_OK if all(checks.values()) else EXIT_ERROR), doc, text


COMMANDS = {"analyze": cmd_analyze, "optimize": cmd_optimize, "certify": cmd_certify, "demo": cmd_demo}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code, doc, text = COMMANDS[args.command](args)
    except CLIError as exc:
        err = {"code": exc.code, "message": str(exc), **exc.details}
        if args.json:
            sys.stdout.write(dumps({"schema": SCHEMA, "command": "error", "error": err}))
        else:
            sys.stderr.write(f"morse-opt: error [{exc.code}]: {exc}\n")
        return EXIT_ERROR
    sys.stdout.write(dumps(doc) if args.json else text)
    return code


if __name__ == "__main__":
    sys.exit(main())
