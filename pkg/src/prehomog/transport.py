"""Path transport (fixed-step RK4), loop holonomy and the flatness certificate.

Paths are polylines traversed segment by segment; each segment gets
``ceil(steps_per_unit * length)`` steps (at least ``MIN_STEPS``).
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import affine, parallelism, riemannian
from .chart import Box, JetVector, as_point
from .errors import DomainEscape, NotMetricArrow, SingularArrow
from .sampling import orthogonal, points, rng_for

STEPS_PER_UNIT = 512
MIN_STEPS = 4
DET_TOL = 1e-12


@dataclass(frozen=True)
class PathSpec:
    vertices: np.ndarray
    closed: bool = False

    @classmethod
    def polyline(cls, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or len(v) < 2:
            raise ValueError("a polyline needs at least two vertices")
        return cls(v, bool(np.array_equal(v[0], v[-1])))

    @classmethod
    def segment(cls, a, b):
        return cls.polyline([a, b])

    @classmethod
    def rectangle(cls, corner, h1, h2, plane):
        """Closed loop: ``+h1 e_j``, ``+h2 e_k``, ``-h1 e_j``, ``-h2 e_k`` from ``corner``."""
        j, k = plane
        c = as_point(corner)
        if j == k or not (0 <= j < c.size and 0 <= k < c.size):
            raise ValueError(f"bad plane {plane}")
        ej, ek = np.eye(c.size)[j], np.eye(c.size)[k]
        return cls(np.array([c, c + h1 * ej, c + h1 * ej + h2 * ek, c + h2 * ek, c]), True)

    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))

    @property
    def length(self):
        return float(sum(np.linalg.norm(b - a) for a, b in self.segments()))

    def check(self, domain: Box):
        for v in self.vertices:
            domain.check(v, "path vertex")

    def then(self, other):
        if not np.allclose(self.vertices[-1], other.vertices[0]):
            raise ValueError("paths do not meet")
        return PathSpec.polyline(np.vstack([self.vertices, other.vertices[1:]]))


def _steps(a, b, steps_per_unit):
    return max(MIN_STEPS, math.ceil(steps_per_unit * float(np.linalg.norm(b - a))))


def integrate(path, rhs, state, steps_per_unit=STEPS_PER_UNIT, after_step=None):
    """RK4 for ``d state / ds = rhs(x, dx, state)`` along each segment (``s`` in [0, 1])."""
    state = np.array(state, dtype=float)
    for a, b in path.segments():
        dx = b - a
        m = _steps(a, b, steps_per_unit)
        h = 1.0 / m
        for step in range(m):
            s = step * h
            x0, xm, x1 = a + s * dx, a + (s + 0.5 * h) * dx, a + (s + h) * dx
            k1 = rhs(x0, dx, state)
            k2 = rhs(xm, dx, state + 0.5 * h * k1)
            k3 = rhs(xm, dx, state + 0.5 * h * k2)
            k4 = rhs(x1, dx, state + h * k3)
            state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if after_step is not None:
                after_step(x1, state)
    return state


def _inside(domain, y, what):
    if not np.all(np.isfinite(y)) or not domain.contains(y):
        raise DomainEscape(f"{what} {np.asarray(y).tolist()} left the chart {domain.bounds}")


def transport_parallelism(W, path: PathSpec, y0, steps_per_unit=STEPS_PER_UNIT):
    """Solve ``dy = w(y) w(x)^-1 dx`` along ``path``."""
    path.check(W.domain)
    y0 = W.point(y0, "initial point")

    def rhs(x, dx, y):
        _inside(W.domain, y, "image point")
        return W.frame(y) @ np.linalg.solve(W.frame(x), dx)

    y = integrate(path, rhs, y0, steps_per_unit)
    _inside(W.domain, y, "image point")
    return y


def transport_linear(W, path: PathSpec, xi0, steps_per_unit=STEPS_PER_UNIT):
    """Solve ``d xi^i = gamma[i, a, j] xi^a dx^j``; ``xi0`` may be a vector or a matrix of columns."""
    path.check(W.domain)
    gamma = parallelism.gamma_field(W)
    xi0 = np.array(xi0, dtype=float)
    return integrate(path, lambda x, dx, xi: np.einsum("iaj,a...,j->i...", gamma(x), xi, dx), xi0, steps_per_unit)


class AffineState(NamedTuple):
    f0: np.ndarray
    f1: np.ndarray


def _affine_system(A, path, state0, steps_per_unit, after=None):
    path.check(A.domain)
    n = A.n
    f0 = as_point(state0.f0, n)
    f1 = np.array(state0.f1, dtype=float)
    if abs(np.linalg.det(f1)) <= DET_TOL:
        raise SingularArrow("initial f1 is singular")
    _inside(A.domain, f0, "image point")

    def rhs(x, dx, s):
        y, f = s[:n], s[n:].reshape(n, n)
        _inside(A.domain, y, "image point")
        gy, gx = np.asarray(A(y)), np.asarray(A(x))
        df = np.einsum("iab,aj,bk,k->ij", gy, f, f, dx) - np.einsum("ajk,ia,k->ij", gx, f, dx)
        return np.concatenate([f @ dx, df.ravel()])

    def check(x, s):
        if abs(np.linalg.det(s[n:].reshape(n, n))) <= DET_TOL:
            raise SingularArrow(f"f1 degenerated near {x.tolist()}")
        if after is not None:
            after(x, s[:n], s[n:].reshape(n, n))

    s = integrate(path, rhs, np.concatenate([f0, f1.ravel()]), steps_per_unit, check)
    _inside(A.domain, s[:n], "image point")
    return AffineState(s[:n], s[n:].reshape(n, n))


def transport_affine(A, path: PathSpec, state0: AffineState, steps_per_unit=STEPS_PER_UNIT):
    """Solve the closed first-order system for ``(f0, f1)`` preserving ``gamma`` along ``path``."""
    return _affine_system(A, path, state0, steps_per_unit)


def transport_riemann(M, path: PathSpec, state0: AffineState, steps_per_unit=STEPS_PER_UNIT):
    """Affine transport of ``M.gamma`` plus the worst metric-constraint drift along the way."""
    start = as_point(path.vertices[0], M.n)
    r = riemannian.metric_residual(M, start, state0.f0, state0.f1)
    if r > riemannian.METRIC_TOL:
        raise NotMetricArrow(f"initial state does not preserve g (residual {r:.3g})")
    drift = [0.0]

    def watch(x, y, f):
        d = np.linalg.norm(f.T @ np.asarray(M.metric(y)) @ f - np.asarray(M.metric(x)))
        drift[0] = max(drift[0], float(d))

    state = _affine_system(M.gamma, path, state0, steps_per_unit, watch)
    return state, drift[0]


# --- holonomy -------------------------------------------------------------


@dataclass
class HolonomyReport:
    kind: str
    base: tuple
    plane: tuple
    sizes: tuple
    defects: tuple
    per_area: tuple
    extrapolated: np.ndarray = None
    predicted: np.ndarray = None
    mismatch: float = None
    extra: dict = field(default_factory=dict)

    @property
    def extrapolated_norm(self):
        if self.extrapolated is None:
            return float(self.per_area[-1])
        return float(np.linalg.norm(self.extrapolated))


def _richardson(e):
    """Remove the ``h`` and ``h^2`` error terms from values at ``h, h/2, h/4``."""
    r1 = [2 * e[1] - e[0], 2 * e[2] - e[1]]
    return (4 * r1[1] - r1[0]) / 3.0


def _geometry_kind(geometry):
    if isinstance(geometry, parallelism.StructureObjectW):
        return "parallelism"
    if isinstance(geometry, riemannian.MetricPair):
        return "riemannian"
    if isinstance(geometry, affine.AffineObject):
        return "affine"
    raise TypeError(f"not a geometry: {type(geometry).__name__}")


def loop_once(kind, geometry, base, plane, h, start=None, steps_per_unit=STEPS_PER_UNIT):
    """Transport once around the square loop of side ``h``; returns ``(defect_array, extra)``."""
    loop = PathSpec.rectangle(base, h, h, plane)
    n = geometry.n
    base = as_point(base, n)
    if kind == "linear":
        m = transport_linear(geometry, loop, np.eye(n), steps_per_unit)
        return m - np.eye(n), {}
    if kind == "parallelism":
        y0 = base if start is None else as_point(start, n)
        return transport_parallelism(geometry, loop, y0, steps_per_unit) - y0, {}
    state0 = start if start is not None else AffineState(base, np.eye(n))
    if kind == "affine":
        gam = geometry.gamma if isinstance(geometry, riemannian.MetricPair) else geometry
        out = transport_affine(gam, loop, state0, steps_per_unit)
        extra = {}
    elif kind == "riemannian":
        out, drift = transport_riemann(geometry, loop, state0, steps_per_unit)
        extra = {"drift": drift}
    else:
        raise ValueError(f"unknown transport kind {kind!r}")
    return np.concatenate([out.f0 - state0.f0, (out.f1 - state0.f1).ravel()]), extra


def loop_defect(kind, geometry, base, plane, h, start=None, steps_per_unit=STEPS_PER_UNIT):
    """Holonomy defects around square loops of side ``h, h/2, h/4`` based at ``base``.

    For the ``linear`` kind the holonomy matrix is extrapolated to
    ``lim (M(h) - I) / h^2`` and compared with the linear-curvature slice
    ``lin[:, j, k, :]``.
    """
    j, k = plane
    sizes = (h, h / 2, h / 4)
    raw, extras = [], {}
    for s in sizes:
        d, extra = loop_once(kind, geometry, base, plane, s, start, steps_per_unit)
        raw.append(d)
        for key, v in extra.items():
            extras[key] = max(extras.get(key, 0.0), v)
    defects = tuple(float(np.linalg.norm(d)) for d in raw)
    per_area = tuple(d / s**2 for d, s in zip(defects, sizes))
    report = HolonomyReport(kind, tuple(map(float, base)), (j, k), sizes, defects, per_area, extra=extras)
    if kind == "linear":
        report.extrapolated = _richardson([d / s**2 for d, s in zip(raw, sizes)])
        report.predicted = parallelism.linear_curvature_w(geometry, base).components[:, j, k, :]
        scale = float(np.linalg.norm(report.predicted))
        if scale > 1e-12:
            report.mismatch = float(np.linalg.norm(report.extrapolated - report.predicted) / scale)
    return report


# --- certification ----------------------------------------------------------

DEFAULT_TOL = 1e-7
HOLONOMY_TOL = 1e-6


class Evidence(NamedTuple):
    I_max: float
    R_max: float
    lin_max: float
    holonomy_max: float
    drift_max: float = None


class Certificate(NamedTuple):
    geometry: str
    kind: str
    verdict: str
    consistent: bool
    evidence: Evidence
    tol: float
    holonomy_tol: float
    samples: int
    loops: int
    seed: int


def _random_arrow(rng, n):
    """Well-conditioned random matrix: rotation times a positive diagonal in [0.7, 1.4]."""
    return orthogonal(n, rng) @ np.diag(rng.uniform(0.7, 1.4, n))


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _loop_fit(domain, fraction=0.05):
    """Loop side length and the box of admissible base points."""
    width = np.subtract(domain.hi, domain.lo)
    h = fraction * float(width.min())
    return h, Box(domain.lo, tuple(np.subtract(domain.hi, h)))


def _inner(domain):
    """Central part of the box, where loop images start (keeps them from escaping)."""
    return domain.shrink(0.25 * float(np.min(np.subtract(domain.hi, domain.lo))))


def _pairs(domain, count, seed):
    pts = points(domain, 2 * count, seed)
    return pts[:count], pts[count:]


def evidence_parallelism(W, samples, loops, seed):
    xs, ys = _pairs(W.domain, samples, seed)
    I_max = max((parallelism.integrability_w(W, x).norm() for x in xs), default=0.0)
    R_max = max((parallelism.nonlinear_curvature_w(W, x, y).norm() for x, y in zip(xs, ys)), default=0.0)
    lin_max = max((parallelism.linear_curvature_w(W, x).norm() for x in xs), default=0.0)
    h, bases = _loop_fit(W.domain)
    inner = _inner(W.domain)
    hol = 0.0
    for i, base in enumerate(points(bases, loops, seed + 1)):
        plane = _plane(W.n, i)
        d_lin, _ = loop_once("linear", W, base, plane, h)
        start = points(inner, 1, seed + 2 + i)[0]
        d_par, _ = loop_once("parallelism", W, base, plane, h, start)
        hol = max(hol, np.linalg.norm(d_lin) / h**2, np.linalg.norm(d_par) / h**2)
    return Evidence(I_max, R_max, lin_max, float(hol))


def _plane(n, i):
    planes = [(j, k) for j in range(n) for k in range(j + 1, n)]
    return planes[i % len(planes)]


def evidence_affine(A, samples, loops, seed):
    n = A.n
    xs, ys = _pairs(A.domain, samples, seed)
    I_max = max((affine.integrability_affine(A, x).norm() for x in xs), default=0.0)
    R_max = lin_max = 0.0
    for i, (x, y) in enumerate(zip(xs, ys)):
        rng = rng_for(seed, i)
        R_max = max(R_max, affine.nonlinear_curvature_affine(A, x, y, _random_arrow(rng, n)).norm())
        jet = JetVector(_unit(rng.standard_normal(n)), _unit(rng.standard_normal((n, n))))
        lin_max = max(lin_max, affine.linear_curvature_affine(A, jet, x).norm())
    hol = 0.0
    h, bases = _loop_fit(A.domain)
    inner = _inner(A.domain)
    for i, base in enumerate(points(bases, loops, seed + 1)):
        rng = rng_for(seed, i, stream=2)
        start = AffineState(points(inner, 1, seed + 2 + i)[0], _random_arrow(rng, n))
        d, _ = loop_once("affine", A, base, _plane(n, i), h, start)
        hol = max(hol, np.linalg.norm(d) / h**2)
    return Evidence(I_max, R_max, lin_max, float(hol))


def evidence_riemannian(M, samples, loops, seed):
    n = M.n
    xs, ys = _pairs(M.domain, samples, seed)
    I_max = max((riemannian.full_I(M, x).norm() for x in xs), default=0.0)
    R_max = lin_max = 0.0
    for i, (x, y) in enumerate(zip(xs, ys)):
        rng = rng_for(seed, i)
        arrow = riemannian.metric_arrow_sampler(M, x, y, q=orthogonal(n, rng))
        R_max = max(R_max, riemannian.riemann_curvature_pair(M, x, y, arrow.f1).norm())
        jet = riemannian.metric_jet(M, x, _unit(rng.standard_normal(n)), rng.standard_normal((n, n)))
        lin_max = max(lin_max, riemannian.linear_curvature_riem(M, jet, x).norm())
    hol = drift = 0.0
    h, bases = _loop_fit(M.domain)
    inner = _inner(M.domain)
    for i, base in enumerate(points(bases, loops, seed + 1)):
        rng = rng_for(seed, i, stream=2)
        y0 = points(inner, 1, seed + 2 + i)[0]
        arrow = riemannian.metric_arrow_sampler(M, base, y0, q=orthogonal(n, rng))
        d, extra = loop_once("riemannian", M, base, _plane(n, i), h, AffineState(y0, arrow.f1))
        hol = max(hol, np.linalg.norm(d) / h**2)
        drift = max(drift, extra["drift"])
    return Evidence(I_max, R_max, lin_max, float(hol), float(drift))


def certify_flat(geometry, samples=100, tol=DEFAULT_TOL, seed=0, loops=None, holonomy_tol=HOLONOMY_TOL):
    """Three independent flatness routes: closed-form curvature, linear curvature, loop holonomy.

    Verdict ``Flat`` iff all three maxima are within tolerance, ``NotFlat``
    iff none is, and ``Inconsistent`` when one route passes while another
    exceeds ten times its tolerance.
    """
    kind = _geometry_kind(geometry)
    loops = min(samples, 20) if loops is None else loops
    ev = {
        "parallelism": evidence_parallelism,
        "affine": evidence_affine,
        "riemannian": evidence_riemannian,
    }[kind](geometry, samples, loops, seed)
    passes = [ev.R_max <= tol, ev.lin_max <= tol, ev.holonomy_max <= holonomy_tol]
    far = [ev.R_max > 10 * tol, ev.lin_max > 10 * tol, ev.holonomy_max > 10 * holonomy_tol]
    consistent = not (any(passes) and any(far))
    if not consistent:
        verdict = "Inconsistent"
    else:
        verdict = "Flat" if all(passes) else "NotFlat"
    return Certificate(
        getattr(geometry, "name", kind), kind, verdict, consistent, ev, tol, holonomy_tol, samples, loops, seed
    )
