"""JSON curvature reports."""

import json
import math
from importlib import resources

import numpy as np

from . import riemannian
from .transport import HOLONOMY_TOL, certify_flat

IDENTITY_TOL = 1e-10
CURVATURE_TOL = 1e-7
HOLONOMY_MISMATCH = 0.05


def _num(v):
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {v} in report")
    return v


def _check(name, value, tol):
    return {"name": name, "pass": bool(value <= tol), "value": _num(value), "tol": _num(tol)}


def build_report(spec, geometry, samples=100, seed=0, tol=CURVATURE_TOL, loops=None):
    """Run the certificate (and, for metric pairs, the classifier) and assemble the report dict."""
    cert = certify_flat(geometry, samples=samples, tol=tol, seed=seed, loops=loops)
    ev = cert.evidence
    evidence = {
        "I_max": _num(ev.I_max),
        "R_max": _num(ev.R_max),
        "lin_max": _num(ev.lin_max),
        "holonomy": _num(ev.holonomy_max),
    }
    checks = [
        _check("R_max", ev.R_max, tol),
        _check("lin_max", ev.lin_max, tol),
        _check("holonomy", ev.holonomy_max, HOLONOMY_TOL),
        {"name": "routes_agree", "pass": cert.consistent, "value": 0.0 if cert.consistent else 1.0, "tol": 0.0},
    ]
    report = {
        "geometry": spec.name,
        "kind": spec.kind,
        "n": spec.n,
        "seed": seed,
        "samples": {"points": samples, "loops": cert.loops},
        "tolerances": {
            "identity": IDENTITY_TOL,
            "curvature": tol,
            "holonomy_per_area": HOLONOMY_TOL,
            "holonomy_mismatch": HOLONOMY_MISMATCH,
        },
        "evidence": evidence,
        "verdict": cert.verdict,
        "checks": checks,
    }
    if spec.kind == "riemannian":
        evidence["drift_max"] = _num(ev.drift_max)
        cls = riemannian.classify(geometry, samples=samples, tol=tol, seed=seed)
        fit = {"classification": cls.verdict.value, "one_flat_residual": _num(cls.one_flat.max_residual)}
        checks.append(_check("one_flat", cls.one_flat.max_residual, tol))
        if cls.fit is not None:
            c = cls.fit.c
            fit.update(
                c_mean=_num(np.mean(c)),
                c_min=_num(np.min(c)),
                c_max=_num(np.max(c)),
                spread=_num(cls.fit.spread),
                residual_max=_num(np.max(cls.fit.residual)),
            )
            checks.append(_check("fit_spread", cls.fit.spread, tol))
            checks.append(_check("fit_residual", np.max(cls.fit.residual), tol))
        report["fit"] = fit
    return report


def dumps(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def schema():
    return json.loads(resources.files("prehomog.schemas").joinpath("report.schema.json").read_text())
