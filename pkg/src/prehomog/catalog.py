"""Geometry definitions: the built-in catalog and the JSON file format.

File layout::

    {
      "name": "axb",
      "kind": "parallelism",            # or "affine", "riemannian"
      "n": 2,
      "domain": [[0.5, 3.0], [-6.0, 6.0]],
      "components": {
        "w": {"1,1": "x1", "2,2": "x1"}
      }
    }

Component keys are 1-based.  ``w`` uses ``"i,j"``; ``gamma`` uses
``"i,j,k"`` with the symmetric lower pair written once (``j <= k``); ``g``
uses ``"i,j"`` with ``i <= j``.  Missing entries are zero.  A riemannian
geometry carries both ``g`` and ``gamma``.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .affine import AffineObject
from .chart import Box
from .errors import ParseError, SchemaError, SymmetryError
from .expr import parse
from .parallelism import StructureObjectW
from .riemannian import MetricPair

KINDS = {
    "parallelism": ("w",),
    "affine": ("gamma",),
    "riemannian": ("g", "gamma"),
}
_ARITY = {"w": 2, "gamma": 3, "g": 2}


@dataclass(frozen=True)
class GeometrySpec:
    name: str
    kind: str
    n: int
    domain: tuple
    components: dict
    expected_flat: bool = field(default=None, compare=False)
    note: str = field(default="", compare=False)

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "n": self.n,
            "domain": [list(b) for b in self.domain],
            "components": {k: dict(sorted(v.items(), key=_key_order)) for k, v in self.components.items()},
        }


def _key_order(item):
    return tuple(int(p) for p in item[0].split(","))


def dump_geometry(spec: GeometrySpec):
    return json.dumps(spec.to_dict(), indent=2) + "\n"


def _schema(cond, message):
    if not cond:
        raise SchemaError(message)


def _normalise(kind_key, n, table):
    """Validate one component table and return it keyed canonically."""
    _schema(isinstance(table, dict), f"components.{kind_key} must be an object")
    arity = _ARITY[kind_key]
    out = {}
    for key, text in table.items():
        parts = key.split(",") if isinstance(key, str) else []
        _schema(
            len(parts) == arity and all(p.strip().isdigit() for p in parts),
            f"components.{kind_key}: bad index key {key!r} (expected {arity} comma-separated integers)",
        )
        idx = [int(p) for p in parts]
        _schema(all(1 <= i <= n for i in idx), f"components.{kind_key}: index {key!r} out of range 1..{n}")
        _schema(isinstance(text, str), f"components.{kind_key}[{key}] must be a string expression")
        try:
            expr = parse(text)
        except ParseError as err:
            raise ParseError(
                f"components.{kind_key}[{key}]: {str(err).rsplit(' (line', 1)[0]}", err.line, err.column, text
            ) from None
        _schema(expr.n_vars <= n, f"components.{kind_key}[{key}] uses x{expr.n_vars} but n = {n}")
        if kind_key == "gamma":
            i, j, k = idx
            canon = (i, min(j, k), max(j, k))
        elif kind_key == "g":
            canon = (min(idx), max(idx))
        else:
            canon = tuple(idx)
        ckey = ",".join(map(str, canon))
        if ckey in out and parse(out[ckey]).canonical() != expr.canonical():
            raise SymmetryError(f"components.{kind_key}: {key!r} disagrees with its symmetric partner {ckey!r}")
        out[ckey] = text
    return out


def spec_from_dict(data):
    _schema(isinstance(data, dict), "geometry must be a JSON object")
    extra = set(data) - {"name", "kind", "n", "domain", "components"}
    _schema(not extra, f"unknown top-level keys {sorted(extra)}")
    for key in ("name", "kind", "n", "domain", "components"):
        _schema(key in data, f"missing key {key!r}")
    name, kind, n = data["name"], data["kind"], data["n"]
    _schema(isinstance(name, str) and name, "name must be a non-empty string")
    _schema(kind in KINDS, f"kind must be one of {sorted(KINDS)}")
    _schema(isinstance(n, int) and not isinstance(n, bool) and 1 <= n <= 9, "n must be an integer in 1..9")
    dom = data["domain"]
    _schema(isinstance(dom, list) and len(dom) == n, f"domain must list {n} [lo, hi] pairs")
    bounds = []
    for pair in dom:
        _schema(
            isinstance(pair, list)
            and len(pair) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair),
            "each domain entry must be [lo, hi]",
        )
        _schema(pair[0] < pair[1], f"degenerate domain interval {pair}")
        bounds.append((float(pair[0]), float(pair[1])))
    comps = data["components"]
    _schema(isinstance(comps, dict), "components must be an object")
    _schema(
        set(comps) == set(KINDS[kind]),
        f"a {kind} geometry needs components {list(KINDS[kind])}, got {sorted(comps)}",
    )
    table = {k: _normalise(k, n, comps[k]) for k in KINDS[kind]}
    return GeometrySpec(name, kind, n, tuple(bounds), table)


def load_geometry(text):
    """Parse the JSON text of a geometry file into a validated :class:`GeometrySpec`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"invalid JSON: {err.msg} (line {err.lineno}, column {err.colno})") from None
    return spec_from_dict(data)


def _indices(key):
    return tuple(int(p) - 1 for p in key.split(","))


def build(spec: GeometrySpec):
    """Instantiate the geometry object described by ``spec``."""
    box = Box.from_bounds(spec.domain)
    n = spec.n
    if spec.kind == "parallelism":
        rows = [["0"] * n for _ in range(n)]
        for key, text in spec.components["w"].items():
            i, j = _indices(key)
            rows[i][j] = text
        return StructureObjectW.from_exprs(rows, box, spec.name)
    gamma = AffineObject.from_exprs(
        n, {_indices(k): v for k, v in spec.components["gamma"].items()}, box, spec.name
    )
    if spec.kind == "affine":
        return gamma
    g = {_indices(k): v for k, v in spec.components["g"].items()}
    return MetricPair.from_exprs(n, g, gamma, box, spec.name)


# --- built-in catalog ------------------------------------------------------

_Q = "(1+x1^2+x2^2)"
_H = "(1-x1^2-x2^2)"


_SPHERE_GAMMA = {
    "1,1,1": f"2*x1/{_Q}",
    "1,1,2": f"2*x2/{_Q}",
    "1,2,2": f"-2*x1/{_Q}",
    "2,1,1": f"-2*x2/{_Q}",
    "2,1,2": f"2*x1/{_Q}",
    "2,2,2": f"2*x2/{_Q}",
}
_HYPER_GAMMA = {
    "1,1,1": f"-2*x1/{_H}",
    "1,1,2": f"-2*x2/{_H}",
    "1,2,2": f"2*x1/{_H}",
    "2,1,1": f"2*x2/{_H}",
    "2,1,2": f"-2*x1/{_H}",
    "2,2,2": f"-2*x2/{_H}",
}
_UNIT = ((-1.0, 1.0), (-1.0, 1.0))
_WIDE = ((-1.5, 1.5), (-1.5, 1.5))


def builtin_catalog():
    """The twelve reference geometries, each tagged with its expected flatness."""
    S = GeometrySpec
    return [
        S("trans2", "parallelism", 2, ((-2.0, 2.0), (-2.0, 2.0)), {"w": {"1,1": "1", "2,2": "1"}}, True,
          "translation frame"),
        S("axb", "parallelism", 2, ((0.5, 3.0), (-6.0, 6.0)), {"w": {"1,1": "x1", "2,2": "x1"}}, True,
          "left-invariant frame of the ax+b group"),
        S("heis3", "parallelism", 3, ((-1.0, 1.0),) * 3,
          {"w": {"1,1": "1", "2,2": "1", "3,2": "x1", "3,3": "1"}}, True,
          "left-invariant frame of the Heisenberg group"),
        S("pert2", "parallelism", 2, ((-2.0, 2.0), (-2.0, 2.0)),
          {"w": {"1,1": "1", "2,2": "1+0.3*sin(x1)"}}, False, "perturbed translation frame"),
        S("affine-zero", "affine", 2, _UNIT, {"gamma": {}}, True, "gamma = 0"),
        S("affine-pullback-flat", "affine", 2, _UNIT, {"gamma": {"1,2,2": "-2"}}, True,
          "gamma = 0 transported by (x1 + x2^2, x2)"),
        S("affine-sphere", "affine", 2, _UNIT, {"gamma": dict(_SPHERE_GAMMA)}, False,
          "Levi-Civita object of the round sphere, no metric constraint"),
        S("euclid2", "riemannian", 2, _UNIT, {"g": {"1,1": "1", "2,2": "1"}, "gamma": {}}, True,
          "Euclidean plane"),
        S("sphere2", "riemannian", 2, _WIDE,
          {"g": {"1,1": f"4/{_Q}^2", "2,2": f"4/{_Q}^2"}, "gamma": dict(_SPHERE_GAMMA)}, True,
          "round sphere, stereographic chart"),
        S("hyper2", "riemannian", 2, ((-0.56, 0.56), (-0.56, 0.56)),
          {"g": {"1,1": f"4/{_H}^2", "2,2": f"4/{_H}^2"}, "gamma": dict(_HYPER_GAMMA)}, True,
          "hyperbolic plane, Poincare disk chart (box inscribed in |x| <= 0.8)"),
        S("mismatch2", "riemannian", 2, _WIDE, {"g": {"1,1": "1", "2,2": "1"}, "gamma": dict(_SPHERE_GAMMA)},
          False, "Euclidean metric with the sphere's gamma"),
        S("bump2", "riemannian", 2, ((-2.0, 2.0), (-2.0, 2.0)),
          {"g": {"1,1": "1", "2,2": "1+x1^2"}, "gamma": {"1,2,2": "x1", "2,1,2": "-x1/(1+x1^2)"}}, False,
          "diag(1, 1 + x1^2) with its Levi-Civita object; curvature not constant"),
    ]


def catalog_names():
    return [s.name for s in builtin_catalog()]


def get_spec(name):
    for s in builtin_catalog():
        if s.name == name:
            return s
    raise KeyError(name)


def resolve(name_or_path):
    """A catalog name, or a path to a geometry file."""
    for s in builtin_catalog():
        if s.name == name_or_path:
            return s
    p = Path(name_or_path)
    if p.is_file():
        return load_geometry(p.read_text())
    raise SchemaError(f"{name_or_path!r} is neither a catalog geometry ({', '.join(catalog_names())}) nor a file")
