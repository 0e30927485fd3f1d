"""Command-line interface.

Exit codes: 0 success, 1 invalid geometry or arguments (including points
outside the chart), 2 numerical failure (a transported state escaping the
chart, a singular frame or arrow, an inconsistent certificate), 3
certification failed (only with ``--expect-flat``).
"""

import argparse
import json
import sys
from typing import NamedTuple

import numpy as np

from . import affine, parallelism, riemannian
from .catalog import build, builtin_catalog, resolve
from .chart import JetVector, TensorBlock
from .errors import DomainError, DomainEscape, GeometryError, NumericalError
from .report import CURVATURE_TOL, build_report, dumps
from .sampling import orthogonal
from .transport import AffineState, certify_flat, loop_defect

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NOT_FLAT = 0, 1, 2, 3

OBJECTS = {
    "parallelism": ("gamma", "I", "R", "lin", "epsilon"),
    "affine": ("gamma", "I", "R", "lin"),
    "riemannian": ("gamma", "christoffel", "nabla_g", "I1", "I2", "I", "R", "lin", "lowered"),
}


class CommandResult(NamedTuple):
    code: int
    payload: object
    text: str


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _plane(text):
    parts = _floats(text)
    if len(parts) != 2 or any(p != int(p) for p in parts):
        raise argparse.ArgumentTypeError("plane must be two 1-based indices such as 1,2")
    return int(parts[0]) - 1, int(parts[1]) - 1


def make_parser():
    p = _Parser(prog="prehomog", description="Curvature and flatness of prehomogeneous geometries on a chart.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, geometry_required=True):
        g = sp.add_mutually_exclusive_group(required=geometry_required)
        g.add_argument("--geometry", help="catalog name or path to a geometry JSON file")
        g.add_argument("--all-catalog", action="store_true", help="run on every built-in geometry")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=100)
        sp.add_argument("--tol", type=float, default=CURVATURE_TOL)
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--expect-flat", action="store_true", help="exit 3 unless the verdict is flat")

    c = sub.add_parser("compute", help="evaluate one object at a point")
    c.add_argument("--geometry", required=True)
    c.add_argument("--object", required=True)
    c.add_argument("--point", type=_floats, required=True)
    c.add_argument("--point2", type=_floats)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--json", action="store_true")

    for name, helptext in (
        ("certify", "three-route flatness certificate"),
        ("lie3", "closed-form, linear and holonomy evidence side by side"),
        ("classify", "classify a metric pair"),
        ("report", "full JSON report"),
    ):
        common(sub.add_parser(name, help=helptext))

    h = sub.add_parser("holonomy", help="loop holonomy sweep at sizes h, h/2, h/4")
    h.add_argument("--geometry", required=True)
    h.add_argument("--point", type=_floats, help="loop corner (default: near the domain centre)")
    h.add_argument("--point2", type=_floats, help="initial image point for affine and metric transport")
    h.add_argument("--loop-size", type=float)
    h.add_argument("--plane", type=_plane, default=(0, 1))
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--json", action="store_true")
    return p


# --- helpers ---------------------------------------------------------------


def _block(t: TensorBlock):
    return {"variance": "".join(t.variance), "components": t.components.tolist(), "norm": t.norm()}


def _specs(args):
    if getattr(args, "all_catalog", False):
        return builtin_catalog()
    return [resolve(args.geometry)]


def _random_f1(rng, n):
    return orthogonal(n, rng) @ np.diag(rng.uniform(0.7, 1.4, n))


def _compute(args):
    spec = resolve(args.geometry)
    geo = build(spec)
    name = args.object
    if name not in OBJECTS[spec.kind]:
        raise GeometryError(f"object {name!r} is not defined for {spec.kind}; choose from {', '.join(OBJECTS[spec.kind])}")
    x = np.array(args.point, dtype=float)
    needs_pair = name in ("R", "epsilon")
    if needs_pair and args.point2 is None:
        raise GeometryError(f"object {name!r} needs --point2")
    y = None if args.point2 is None else np.array(args.point2, dtype=float)
    rng = np.random.default_rng(args.seed)
    n = spec.n
    out = {"geometry": spec.name, "object": name, "point": x.tolist()}
    if y is not None and needs_pair:
        out["point2"] = y.tolist()

    if spec.kind == "parallelism":
        if name == "gamma":
            out.update(_block(parallelism.gamma_of_w(geo, x)))
        elif name == "I":
            out.update(_block(parallelism.integrability_w(geo, x)))
        elif name == "R":
            out.update(_block(parallelism.nonlinear_curvature_w(geo, x, y)))
        elif name == "lin":
            out.update(_block(parallelism.linear_curvature_w(geo, x)))
        else:
            out["f1"] = parallelism.epsilon_arrow(geo, x, y).f1.tolist()
    elif spec.kind == "affine":
        if name == "gamma":
            out.update(_block(TensorBlock(("u", "l", "l"), geo(geo.point(x)), symmetric=((1, 2),))))
        elif name == "I":
            out.update(_block(affine.integrability_affine(geo, x)))
        elif name == "R":
            f1 = _random_f1(rng, n)
            out["f1"] = f1.tolist()
            out.update(_block(affine.nonlinear_curvature_affine(geo, x, y, f1)))
        else:
            jet = JetVector(rng.standard_normal(n), rng.standard_normal((n, n)))
            out["jet"] = {"xi0": jet.xi0.tolist(), "xi1": jet.xi1.tolist()}
            out.update(_block(affine.linear_curvature_affine(geo, jet, x)))
    else:
        if name == "gamma":
            out.update(_block(TensorBlock(("u", "l", "l"), geo.gamma(geo.point(x)), symmetric=((1, 2),))))
        elif name == "christoffel":
            out.update(_block(riemannian.christoffel(geo, x)))
        elif name == "nabla_g":
            out.update(_block(riemannian.nabla_g(geo, x)))
        elif name == "I1":
            out.update(_block(riemannian.I1(geo, x)))
        elif name == "I2":
            out.update(_block(riemannian.I2(geo, x)))
        elif name == "lowered":
            out.update(_block(riemannian.lowered_curvature(geo, x)))
        elif name == "I":
            pair = riemannian.full_I(geo, x)
            out.update(rho=_block(pair.rho), sigma=_block(pair.sigma), norm=pair.norm())
        elif name == "R":
            arrow = riemannian.metric_arrow_sampler(geo, x, y, seed=args.seed)
            pair = riemannian.riemann_curvature_pair(geo, x, y, arrow.f1)
            out.update(f1=arrow.f1.tolist(), rho=_block(pair.rho), sigma=_block(pair.sigma), norm=pair.norm())
        else:
            jet = riemannian.metric_jet(geo, x, rng.standard_normal(n), rng.standard_normal((n, n)))
            pair = riemannian.linear_curvature_riem(geo, jet, x)
            out.update(
                jet={"xi0": jet.xi0.tolist(), "xi1": jet.xi1.tolist()},
                rho=_block(pair.rho),
                sigma=_block(pair.sigma),
                norm=pair.norm(),
            )
    text = _text(out)
    return CommandResult(EXIT_OK, out, text)


def _text(obj, indent=""):
    lines = []
    for k, v in obj.items():
        if isinstance(v, dict):
            lines.append(f"{indent}{k}:")
            lines.append(_text(v, indent + "  "))
        elif k == "components":
            arr = np.array(v)
            body = np.array2string(arr, precision=10, suppress_small=False).replace("\n", "\n" + indent + "  ")
            lines.append(f"{indent}{k}:\n{indent}  {body}")
        else:
            lines.append(f"{indent}{k}: {v}")
    return "\n".join(lines)


def _certify(args, side_by_side=False):
    payload, lines, code = [], [], EXIT_OK
    for spec in _specs(args):
        cert = certify_flat(build(spec), samples=args.samples, tol=args.tol, seed=args.seed)
        ev = cert.evidence
        routes = {
            "R": (ev.R_max, cert.tol),
            "lin": (ev.lin_max, cert.tol),
            "holonomy": (ev.holonomy_max, cert.holonomy_tol),
        }
        flags = {k: v <= t for k, (v, t) in routes.items()}
        agree = len(set(flags.values())) == 1
        entry = {
            "geometry": spec.name,
            "verdict": cert.verdict,
            "consistent": cert.consistent,
            "evidence": {k: v for k, v in ev._asdict().items() if v is not None},
        }
        if side_by_side:
            entry["routes"] = {k: {"max": v, "tol": t, "flat": flags[k]} for k, (v, t) in routes.items()}
            entry["agree"] = agree
            cells = "  ".join(f"{k}={v:.3e}({'flat' if flags[k] else 'curved'})" for k, (v, _) in routes.items())
            lines.append(f"{spec.name}: {cells}  agree={'yes' if agree else 'NO'}")
            if not agree:
                code = max(code, EXIT_NUMERICAL)
        else:
            lines.append(
                f"{spec.name}: {cert.verdict}  I_max={ev.I_max:.3e} R_max={ev.R_max:.3e} "
                f"lin_max={ev.lin_max:.3e} holonomy={ev.holonomy_max:.3e}"
            )
        if cert.verdict == "Inconsistent":
            code = max(code, EXIT_NUMERICAL)
        elif args.expect_flat and cert.verdict != "Flat" and code == EXIT_OK:
            code = EXIT_NOT_FLAT
        payload.append(entry)
    return CommandResult(code, payload if len(payload) > 1 else payload[0], "\n".join(lines))


def _classify(args):
    payload, lines, code = [], [], EXIT_OK
    specs = [s for s in _specs(args) if s.kind == "riemannian" or not args.all_catalog]
    for spec in specs:
        if spec.kind != "riemannian":
            raise GeometryError(f"classify needs a riemannian geometry; {spec.name} is {spec.kind}")
        res = riemannian.classify(build(spec), samples=args.samples, tol=args.tol, seed=args.seed)
        entry = {
            "geometry": spec.name,
            "classification": res.verdict.value,
            "one_flat_residual": res.one_flat.max_residual,
        }
        if res.fit is not None:
            entry.update(
                c_min=float(res.fit.c.min()),
                c_max=float(res.fit.c.max()),
                spread=res.fit.spread,
                residual_max=float(res.fit.residual.max()),
            )
        payload.append(entry)
        lines.append(f"{spec.name}: {res.verdict.value}")
        if args.expect_flat and res.verdict is not riemannian.Classification.FLAT_PHG:
            code = EXIT_NOT_FLAT
    return CommandResult(code, payload if len(payload) > 1 else payload[0], "\n".join(lines))


def _report(args):
    reports, code = [], EXIT_OK
    for spec in _specs(args):
        r = build_report(spec, build(spec), samples=args.samples, seed=args.seed, tol=args.tol)
        reports.append(r)
        if r["verdict"] == "Inconsistent":
            code = max(code, EXIT_NUMERICAL)
        elif args.expect_flat and r["verdict"] != "Flat" and code == EXIT_OK:
            code = EXIT_NOT_FLAT
    payload = reports if len(reports) > 1 else reports[0]
    text = dumps(payload).rstrip("\n")
    return CommandResult(code, payload, text)


def _holonomy(args):
    spec = resolve(args.geometry)
    geo = build(spec)
    lo, hi = np.array(spec.domain).T
    width = hi - lo
    h = args.loop_size if args.loop_size is not None else 0.05 * float(width.min())
    centre = 0.5 * (lo + hi)
    base = np.array(args.point, dtype=float) if args.point is not None else centre - 0.5 * h
    rng = np.random.default_rng(args.seed)
    y0 = np.array(args.point2, dtype=float) if args.point2 is not None else centre + 0.1 * width
    if spec.kind == "parallelism":
        kinds = ["linear", "parallelism"]
        start = y0
    else:
        kinds = [spec.kind]
        if spec.kind == "affine":
            start = AffineState(y0, _random_f1(rng, spec.n))
        else:
            arrow = riemannian.metric_arrow_sampler(geo, base, y0, q=orthogonal(spec.n, rng))
            start = AffineState(y0, arrow.f1)
    payload, lines = [], []
    for kind in kinds:
        rep = loop_defect(kind, geo, base, args.plane, h, start)
        entry = {
            "geometry": spec.name,
            "kind": kind,
            "base": list(rep.base),
            "plane": [rep.plane[0] + 1, rep.plane[1] + 1],
            "sizes": list(rep.sizes),
            "defects": list(rep.defects),
            "defect_per_area": list(rep.per_area),
            "extrapolated_norm": rep.extrapolated_norm,
        }
        if rep.extrapolated is not None:
            entry["extrapolated"] = rep.extrapolated.tolist()
            entry["predicted"] = rep.predicted.tolist()
            entry["mismatch"] = rep.mismatch
        entry.update(rep.extra)
        payload.append(entry)
        sizes = ", ".join(f"{s:.4g}:{d:.3e}" for s, d in zip(rep.sizes, rep.defects))
        line = f"{spec.name} [{kind}] defects {sizes}  per-area->{rep.extrapolated_norm:.6g}"
        if rep.mismatch is not None:
            line += f"  mismatch={rep.mismatch:.3%}"
        lines.append(line)
    return CommandResult(EXIT_OK, payload if len(payload) > 1 else payload[0], "\n".join(lines))


def run_command(argv):
    """Parse ``argv`` and run it; never raises for user or numerical errors."""
    try:
        args = make_parser().parse_args(argv)
        handler = {
            "compute": _compute,
            "certify": _certify,
            "lie3": lambda a: _certify(a, side_by_side=True),
            "classify": _classify,
            "report": _report,
            "holonomy": _holonomy,
        }[args.command]
        result = handler(args)
        if getattr(args, "json", False) and args.command != "report":
            result = result._replace(text=json.dumps(result.payload, indent=2, sort_keys=True))
        return result
    except UsageError as err:
        return CommandResult(EXIT_INVALID, None, str(err))
    except DomainEscape as err:
        return CommandResult(EXIT_NUMERICAL, None, f"numerical failure: {err}")
    except DomainError as err:
        return CommandResult(EXIT_INVALID, None, f"error: {err}")
    except NumericalError as err:
        return CommandResult(EXIT_NUMERICAL, None, f"numerical failure: {err}")
    except (GeometryError, ValueError, OSError) as err:
        return CommandResult(EXIT_INVALID, None, f"error: {err}")


def main(argv=None):
    result = run_command(sys.argv[1:] if argv is None else argv)
    stream = sys.stdout if result.code in (EXIT_OK, EXIT_NOT_FLAT) else sys.stderr
    if result.text:
        print(result.text, file=stream)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
