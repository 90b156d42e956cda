"""Signed-margin reports shared by every verifier."""
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._util import to_builtin

EQ_TOL = 1e-6
VIOLATION_REL = 1e-7
STATUSES = ("holds", "equality", "violated", "violated-hypothesis")
FIELDS = ("name", "lhs", "rhs", "margin", "rel_margin", "status", "tolerance", "witness", "meta")


@dataclass
class VerificationReport:
    name: str
    lhs: float
    rhs: float
    margin: float
    rel_margin: float
    status: str
    tolerance: float
    witness: Optional[list] = None
    meta: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status in ("holds", "equality")

    def to_dict(self):
        return {k: to_builtin(getattr(self, k)) for k in FIELDS}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        def num(v):
            return float(v) if isinstance(v, str) else v
        return cls(d["name"], num(d["lhs"]), num(d["rhs"]), num(d["margin"]), num(d["rel_margin"]),
                   d["status"], num(d["tolerance"]), d.get("witness"), dict(d.get("meta") or {}))


def classify(margin, rhs, tolerance, eq_tol=EQ_TOL):
    if not np.isfinite(margin):
        return "holds" if margin == np.inf else "violated"
    if margin < -tolerance:
        return "violated"
    if abs(margin) <= eq_tol * max(1.0, abs(rhs)):
        return "equality"
    return "holds"


def make_report(name, lhs, rhs, quad_error=0.0, witness=None, meta=None, tolerance=None,
                eq_tol=EQ_TOL, hypothesis_ok=True):
    """Report for lhs <= rhs; violated iff rhs - lhs < -tolerance.

    The default tolerance is 1e-7 max(1, |rhs|) plus the quadrature error.
    A failed hypothesis (``hypothesis_ok=False``) overrides the status.
    """
    lhs, rhs = float(lhs), float(rhs)
    margin = rhs - lhs
    if tolerance is None:
        tolerance = VIOLATION_REL * max(1.0, abs(rhs)) + float(quad_error)
    status = classify(margin, rhs, tolerance, eq_tol)
    if not hypothesis_ok:
        status = "violated-hypothesis"
    rel = margin / max(1.0, abs(rhs)) if np.isfinite(rhs) else margin
    if witness is not None:
        witness = np.atleast_1d(np.asarray(witness, dtype=float)).tolist()
    meta = dict(meta or {})
    meta.setdefault("quad_error", float(quad_error))
    return VerificationReport(name, lhs, rhs, margin, float(rel), status, float(tolerance),
                              witness, meta)
