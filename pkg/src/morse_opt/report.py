"""JSON report documents (schema ``morse-opt/1``).

Every float is stored rounded to 12 significant digits, complex numbers as
``[re, im]`` and infinities as the strings ``"infinite"`` / ``"-infinite"``.
Because rounding is idempotent, serialize -> parse -> serialize is
byte-identical.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from . import __version__
from .groebner import GREVLEX, MonomialOrder, gradient_basis, is_zero_dimensional, quotient_basis
from .poly import Polynomial, is_convenient_support, to_text
from .sos import ConvergenceTrace, RelaxationResult
from .variety import RadicalityReport, Tolerances, candidate_infimum, radicality_report

SCHEMA = "morse-opt/1"
DIGITS = 12


def fmt(x: float) -> str:
    """A float with the report precision, for text output."""
    if isinstance(x, float) and math.isinf(x):
        return "infinite" if x > 0 else "-infinite"
    return f"{x:.{DIGITS}g}"


def _round(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "infinite" if x > 0 else "-infinite"
    r = float(f"{x:.{DIGITS}g}")
    return 0.0 if r == 0 else r


def jsonable(x: Any) -> Any:
    """Convert report values into plain JSON data at report precision."""
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating, Fraction)):
        return _round(float(x))
    if isinstance(x, (complex, np.complexfloating)):
        return [_round(x.real), _round(x.imag)]
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in x]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def float_text(p: Polynomial) -> str:
    """Polynomial text with coefficients shown at report precision."""
    return to_text(p, lambda a: fmt(float(a)))


# -- analysis ----------------------------------------------------------------------

@dataclass
class AnalysisReport:
    input: str
    nvars: int
    degree: int
    convenient: bool
    convenient_witnesses: list
    milnor_number: Any
    num_points: Optional[int]
    critical_points: list
    morse: dict
    radicality: dict
    candidate_infimum: Optional[float]
    tolerances: dict
    order: str = "grevlex"
    version: str = __version__
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "command": "analyze", **jsonable(asdict(self))}

    @classmethod
    def from_dict(cls, doc: dict) -> "AnalysisReport":
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {doc.get('schema')!r}")
        names = cls.__dataclass_fields__
        return cls(**{k: v for k, v in doc.items() if k in names})

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))

    @property
    def morse_verdict(self) -> str:
        return self.morse["verdict"]

    @property
    def radical_verdict(self) -> str:
        return self.radicality["verdict"]


def _points(rep: RadicalityReport) -> list:
    return [
        {
            "location": [complex(z) for z in p.location],
            "multiplicity": p.multiplicity,
            "value": complex(p.critical_value),
            "hessian_det": complex(p.hessian_det),
            "residual": p.residual,
            "is_real": p.is_real,
        }
        for p in rep.points
    ]


def analyze(
    f: Polynomial, tol: Tolerances = Tolerances(), order: MonomialOrder = GREVLEX
) -> AnalysisReport:
    """Gröbner basis, critical points, Morse certificate and radicality verdict of ``f``.

    Raises the underlying errors (positive-dimensional locus, resource limits,
    residual or consistency failures); an undecidable clustering comes back as
    an ``inconclusive`` report instead.
    """
    t0 = time.perf_counter()
    gb = gradient_basis(f, order)
    if not is_zero_dimensional(gb):
        from .groebner import PositiveDimensionalError, _free_variables

        raise PositiveDimensionalError("critical locus is not finite", _free_variables(gb))
    mu = len(quotient_basis(gb))
    t1 = time.perf_counter()
    rep = radicality_report(f, tol, order, gb=gb)
    t2 = time.perf_counter()
    ok, wit = is_convenient_support(f)
    m = rep.morse
    return AnalysisReport(
        input=to_text(f),
        nvars=f.nvars,
        degree=int(f.degree),
        convenient=ok,
        convenient_witnesses=[list(w) for w in wit],
        milnor_number=mu,
        num_points=rep.exact_num_points,
        critical_points=jsonable(_points(rep)),
        morse=jsonable(
            {
                "verdict": m.verdict,
                "nondegenerate": m.nondegenerate,
                "distinct_values": m.distinct_values,
                "hessian_dets": list(m.hessian_dets),
                "relative_dets": list(m.relative_dets),
                "min_value_gap": m.min_value_gap,
            }
        ),
        radicality=jsonable(
            {
                "verdict": rep.verdict,
                "total_milnor": rep.total_milnor,
                "numeric_num_points": rep.num_points,
                "exact_num_points": rep.exact_num_points,
                "diagnostics": rep.diagnostics,
            }
        ),
        candidate_infimum=jsonable(candidate_infimum(f, rep.points)),
        tolerances=jsonable(tol.as_dict()),
        order=order.kind,
        timings=jsonable({"groebner": t1 - t0, "variety": t2 - t1, "total": t2 - t0}),
    )


# -- relaxation sweep -------------------------------------------------------------

def result_dict(r: RelaxationResult) -> dict:
    return jsonable(
        {
            "N": r.N,
            "status": r.status,
            "gamma": r.gamma_star,
            "identity_residual": r.identity_residual,
            "iterations": r.iterations,
            "gap": r.gap,
            "multipliers": [float_text(p) for p in r.multipliers],
            "num_squares": len(r.sos_squares),
            "gram_size": None if r.gram is None else int(r.gram.shape[0]),
            "message": r.message.strip().rstrip(";"),
        }
    )


def trace_dict(t: ConvergenceTrace) -> dict:
    return jsonable(
        {
            "results": [result_dict(r) for r in t.results],
            "monotone": t.monotone,
            "stabilized": t.stabilized,
            "stabilized_at": t.stabilized_at,
            "candidate_infimum": t.candidate_infimum,
            "matches_candidate": t.matches_candidate,
            "caveats": list(t.caveats),
        }
    )


# JSON Schema of the documents, for validation by external tools and the tests.
_NUM = {"type": ["number", "string", "null"]}
_CPLX = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
ANALYSIS_SCHEMA = {
    "type": "object",
    "required": [
        "schema", "input", "nvars", "degree", "convenient", "milnor_number", "num_points",
        "critical_points", "morse", "radicality", "candidate_infimum", "tolerances", "version",
    ],
    "properties": {
        "schema": {"const": SCHEMA},
        "input": {"type": "string"},
        "nvars": {"type": "integer", "minimum": 0},
        "degree": {"type": "integer"},
        "convenient": {"type": "boolean"},
        "milnor_number": {"type": ["integer", "string"]},
        "num_points": {"type": ["integer", "null"]},
        "critical_points": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["location", "multiplicity", "value", "hessian_det", "is_real"],
                "properties": {
                    "location": {"type": "array", "items": _CPLX},
                    "multiplicity": {"type": "integer", "minimum": 1},
                    "value": _CPLX,
                    "hessian_det": _CPLX,
                    "is_real": {"type": "boolean"},
                },
            },
        },
        "morse": {
            "type": "object",
            "required": ["verdict"],
            "properties": {
                "verdict": {
                    "enum": ["morse", "not_morse_degenerate", "not_morse_equal_values", "inconclusive"]
                }
            },
        },
        "radicality": {
            "type": "object",
            "required": ["verdict"],
            "properties": {"verdict": {"enum": ["radical", "not_radical", "inconclusive"]}},
        },
        "candidate_infimum": _NUM,
        "tolerances": {"type": "object"},
    },
}
TRACE_SCHEMA = {
    "type": "object",
    "required": ["results", "monotone", "stabilized", "candidate_infimum", "caveats"],
    "properties": {
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["N", "status", "gamma", "identity_residual"],
                "properties": {
                    "status": {
                        "enum": ["optimal", "infeasible", "unbounded", "max_iter", "numerical_failure"]
                    },
                    "gamma": _NUM,
                },
            },
        },
        "monotone": {"type": "boolean"},
        "caveats": {"type": "array", "items": {"type": "string"}},
    },
}
DOCUMENT_SCHEMA = {
    "type": "object",
    "required": ["schema", "command"],
    "properties": {
        "schema": {"const": SCHEMA},
        "command": {"enum": ["analyze", "optimize", "certify", "demo", "error"]},
        "analysis": {"anyOf": [ANALYSIS_SCHEMA, {"type": "null"}]},
        "sweep": TRACE_SCHEMA,
        "error": {
            "type": "object",
            "required": ["code", "message"],
            "properties": {"code": {"type": "string"}, "message": {"type": "string"}},
        },
    },
}
