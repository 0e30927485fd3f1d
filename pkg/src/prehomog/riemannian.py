"""Riemannian pairs ``(g, gamma)``: a metric plus an independent symmetric ``gamma``.

``gamma`` follows the sign convention of :mod:`prehomog.affine`, so the
Levi-Civita choice is :func:`christoffel`, the negative of the textbook
Christoffel symbols.  Under this convention a metric of sectional curvature
``K`` fits the reference tensor with ``c = -K``.

Array layouts:

* ``I1[k, r, j]`` alternated over ``(r, j)``;
* ``I2[i, r, j, k]`` as in :mod:`prehomog.affine`;
* lowered curvature ``R[k, j, l, m] = g[l, i] I2[i, k, j, m]``.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import ad
from .affine import (
    AffineObject,
    FlatnessVerdict,
    eps_lift_jet_affine,
    integrability_field,
    lift_f2,
)
from .chart import (
    Box,
    ExprArray,
    JetFormField,
    JetVector,
    OneArrow,
    TensorBlock,
    TwoArrow,
    as_point,
    formal_lie_derivative,
    pushforward_jet2form,
)
from .errors import DegenerateMetric, NotMetricArrow, NotMetricJet, SymmetryError, ZeroReference
from .expr import parse
from .sampling import orthogonal, points, rng_for

EIG_TOL = 1e-10
METRIC_TOL = 1e-9
PAIR = ((1, 2),)


@dataclass(frozen=True)
class MetricPair:
    n: int
    g: ExprArray
    gamma: AffineObject
    domain: Box
    name: str = "g"

    @classmethod
    def from_exprs(cls, n, g_exprs, gamma, domain, name="g"):
        """``g_exprs`` maps ``(i, j)`` to strings; one of each symmetric pair suffices."""
        table = {}
        for (i, j), text in g_exprs.items():
            key = (min(i, j), max(i, j))
            e = parse(text)
            if key in table and table[key].canonical() != e.canonical():
                raise SymmetryError(f"g[{i + 1},{j + 1}] differs from g[{j + 1},{i + 1}]")
            table[key] = e
        aliases = {(j, i): (i, j) for i in range(n) for j in range(i + 1, n)}
        return cls(n, ExprArray((n, n), table, aliases), gamma, domain, name)

    def metric(self, x):
        """``g(x)``, generic in ad numbers; positive definiteness is checked on the real part."""
        value = self.g(x)
        lam = np.linalg.eigvalsh(np.asarray(ad.real(value)))
        if lam[0] <= EIG_TOL:
            raise DegenerateMetric(
                f"g is not positive definite at {np.asarray(ad.real(x)).tolist()} (min eigenvalue {lam[0]:.3g})"
            )
        return value

    def point(self, x, what="point"):
        x = as_point(x, self.n)
        self.domain.check(x, what)
        return x


def christoffel_field(metric):
    """Generic Levi-Civita object of a generic metric field (sign: see module doc)."""

    def gamma(x):
        g = metric(x)
        dg = ad.jacobian(metric, x)  # dg[j, a, r] = d_r g[j, a]
        t = ad.transpose(dg, (1, 2, 0)) - ad.transpose(dg, (2, 0, 1)) + dg
        # t[a, r, j] = d_r g[j, a] - d_a g[r, j] + d_j g[a, r]
        return -0.5 * ad.einsum("ka,arj->krj", ad.inv(g), t)

    return gamma


def christoffel(M, x):
    x = M.point(x)
    comps = christoffel_field(M.metric)(x)
    return TensorBlock.project(("u", "l", "l"), comps, symmetric=PAIR)


def nabla_g(M, x):
    """``d_r g[j, k] + g[j, a] gamma[a, r, k] + g[k, a] gamma[a, r, j]`` as ``[r, j, k]``."""
    x = M.point(x)
    g = M.metric(x)
    dg = ad.jacobian(M.metric, x)
    G = np.asarray(M.gamma(x))
    comps = (
        np.transpose(dg, (2, 0, 1))
        + np.einsum("ja,ark->rjk", g, G)
        + np.einsum("ka,arj->rjk", g, G)
    )
    return TensorBlock.project(("l", "l", "l"), comps, symmetric=PAIR)


def I1_field(M):
    def i1(x):
        g = M.metric(x)
        dg = ad.jacobian(M.metric, x)  # [j, a, r]
        inner = ad.transpose(dg, (2, 0, 1)) + ad.einsum("jb,bra->rja", g, M.gamma(x))
        t = ad.einsum("ak,rja->krj", ad.inv(g), inner)
        return t - ad.swapaxes(t, 1, 2)

    return i1


def I1(M, x):
    return TensorBlock(("u", "l", "l"), I1_field(M)(M.point(x)), PAIR)


def I2(M, x):
    return TensorBlock(("u", "l", "l", "l"), integrability_field(M.gamma)(M.point(x)), PAIR)


def full_I_field(M):
    i1 = I1_field(M)
    i2 = integrability_field(M.gamma)
    return JetFormField(lambda x: (i1(x), i2(x)))


class JetValued2Form(NamedTuple):
    rho: TensorBlock
    sigma: TensorBlock

    def norm(self):
        return float(np.hypot(self.rho.norm(), self.sigma.norm()))


def full_I(M, x):
    return JetValued2Form(*full_I_field(M).at(M.point(x)))


def metric_residual(M, x, y, f1):
    """Relative failure of ``f1^T g(y) f1 = g(x)``."""
    gx = np.asarray(M.metric(x))
    gy = np.asarray(M.metric(y))
    f1 = np.asarray(f1, dtype=float)
    return float(np.max(np.abs(f1.T @ gy @ f1 - gx)) / max(1.0, np.max(np.abs(gx))))


def eps_lift_arrow_riem(M, arrow: OneArrow, enforce_metric=True):
    x = M.point(arrow.source, "source")
    y = M.point(arrow.target, "target")
    if enforce_metric:
        r = metric_residual(M, x, y, arrow.f1)
        if r > METRIC_TOL:
            raise NotMetricArrow(f"arrow does not preserve g (residual {r:.3g})")
    return TwoArrow(x, y, arrow.f1, lift_f2(np.asarray(M.gamma(x)), np.asarray(M.gamma(y)), arrow.f1))


def _factor(M, p):
    # upper factor C with g = C^T C
    return np.linalg.cholesky(np.asarray(M.metric(p))).T


def metric_arrow_sampler(M, x, y, seed=0, q=None):
    """A 1-arrow ``x -> y`` preserving ``g``: ``C(y)^-1 Q C(x)`` with ``Q`` orthogonal.

    ``Q`` comes from ``seed`` unless given explicitly.
    """
    x = M.point(x, "source")
    y = M.point(y, "target")
    if q is None:
        q = orthogonal(M.n, np.random.default_rng(seed))
    f1 = np.linalg.solve(_factor(M, y), q @ _factor(M, x))
    return OneArrow(x, y, f1)


def riemann_curvature_pair(M, x, y, f1):
    """``I(y)`` minus the transport of ``I(x)`` by the lifted metric arrow."""
    two = eps_lift_arrow_riem(M, OneArrow(x, y, f1))
    rho_x, sigma_x = full_I(M, x)
    rho_y, sigma_y = full_I(M, y)
    rho_t, sigma_t = pushforward_jet2form(two, rho_x, sigma_x)
    return JetValued2Form(rho_y - rho_t, sigma_y - sigma_t)


def metric_jet_residual(M, xi: JetVector, x):
    """Max-norm of ``d_a g[j, k] xi^a + g[k, a] xi^a_j + g[j, a] xi^a_k``."""
    g = np.asarray(M.metric(x))
    dg = np.asarray(ad.derivative(M.metric, as_point(x), xi.xi0))
    s = g @ xi.xi1
    return float(np.max(np.abs(dg + s + s.T)))


def metric_jet(M, x, xi0, antisym):
    """The order-1 jet over ``xi0`` that is an infinitesimal isometry.

    Solutions differ by ``g^-1 A`` with ``A`` antisymmetric; ``antisym`` picks it.
    """
    x = M.point(x)
    xi0 = as_point(xi0, M.n)
    a = np.asarray(antisym, dtype=float)
    a = 0.5 * (a - a.T)
    dg = np.asarray(ad.derivative(M.metric, x, xi0))
    s = -0.5 * dg + a
    return JetVector(xi0, np.linalg.solve(np.asarray(M.metric(x)), s))


def linear_curvature_riem(M, xi: JetVector, x):
    x = M.point(x)
    r = metric_jet_residual(M, xi, x)
    if r > METRIC_TOL:
        raise NotMetricJet(f"jet is not an infinitesimal isometry (residual {r:.3g})")
    jet = eps_lift_jet_affine(M.gamma, xi, x)
    return JetValued2Form(*formal_lie_derivative(jet, full_I_field(M), x))


def is_one_flat(M, samples=64, tol=1e-10, seed=0):
    """Flat iff ``gamma`` equals :func:`christoffel` within ``tol`` at every sample."""
    worst, where = 0.0, None
    for p in points(M.domain, samples, seed):
        r = float(np.linalg.norm(np.asarray(M.gamma(p)) - christoffel(M, p).components))
        if where is None or r > worst:
            worst, where = r, tuple(p)
    return FlatnessVerdict(worst <= tol, worst, where, samples)


def lowered_curvature(M, x):
    x = M.point(x)
    g = np.asarray(M.metric(x))
    comps = np.einsum("li,ikjm->kjlm", g, I2(M, x).components)
    return TensorBlock.project(("l", "l", "l", "l"), comps, ((0, 1),))


def reference_tensor(g):
    """``g[l, k] g[j, m] - g[l, j] g[k, m]`` laid out as ``[k, j, l, m]``."""
    g = np.asarray(g, dtype=float)
    return np.einsum("lk,jm->kjlm", g, g) - np.einsum("lj,km->kjlm", g, g)


class CurvatureFit(NamedTuple):
    points: np.ndarray
    c: np.ndarray
    residual: np.ndarray
    spread: float


def fit_point(M, x):
    """Least-squares ``c`` with ``R ~ c * reference`` at one point, plus the relative residual."""
    R = lowered_curvature(M, x).components
    ref = reference_tensor(M.metric(M.point(x)))
    nref = np.linalg.norm(ref)
    if nref < 1e-12:
        raise ZeroReference("reference tensor vanishes")
    c = float(np.sum(R * ref) / nref**2)
    return c, float(np.linalg.norm(R - c * ref) / nref)


def constant_curvature_fit(M, samples=64, seed=0):
    pts = points(M.domain, samples, seed)
    cs, res = zip(*(fit_point(M, p) for p in pts)) if len(pts) else ((), ())
    cs = np.array(cs)
    spread = float(cs.max() - cs.min()) if cs.size else 0.0
    return CurvatureFit(pts, cs, np.array(res), spread)


def curvature_identities_check(R):
    """Residuals of the two antisymmetries and the cyclic identity of a ``[k, j, l, m]`` block."""
    r = np.asarray(getattr(R, "components", R), dtype=float)
    if r.ndim != 4:
        raise ValueError("a valence-4 block is required")
    anti_kj = np.max(np.abs(r + np.swapaxes(r, 0, 1)), initial=0.0)
    anti_lm = np.max(np.abs(r + np.swapaxes(r, 2, 3)), initial=0.0)
    cyclic = r + np.einsum("lkjm->kjlm", r) + np.einsum("jlkm->kjlm", r)
    return float(anti_kj), float(anti_lm), float(np.max(np.abs(cyclic), initial=0.0))


class Classification(str, Enum):
    FLAT_PHG = "FlatPHG"
    ONE_FLAT_NONCONSTANT = "OneFlatNonconstant"
    NOT_ONE_FLAT = "NotOneFlat"


class ClassifyResult(NamedTuple):
    verdict: Classification
    one_flat: FlatnessVerdict
    fit: CurvatureFit


def classify(M, samples=64, tol=1e-7, seed=0):
    one = is_one_flat(M, samples, tol, seed)
    if not one.flat:
        return ClassifyResult(Classification.NOT_ONE_FLAT, one, None)
    fit = constant_curvature_fit(M, samples, seed)
    ok = fit.spread <= tol and (fit.residual.size == 0 or fit.residual.max() <= tol)
    verdict = Classification.FLAT_PHG if ok else Classification.ONE_FLAT_NONCONSTANT
    return ClassifyResult(verdict, one, fit)


def random_metric_pair_sample(M, index, seed):
    """Deterministic ``(x, y, f1)`` sample number ``index``."""
    rng = rng_for(seed, index, stream=7)
    lo, hi = np.asarray(M.domain.lo), np.asarray(M.domain.hi)
    pad = 1e-6 * (hi - lo)
    x = rng.uniform(lo + pad, hi - pad)
    y = rng.uniform(lo + pad, hi - pad)
    return metric_arrow_sampler(M, x, y, q=orthogonal(M.n, rng))
