"""Affine structures given by a symmetric connection-like object ``gamma[i, j, k]``.

Sign convention: the object transforms so that a 2-arrow ``(x, y, f1, f2)``
preserves it iff ``f2 = gamma(y) f1 f1 - f1 gamma(x)``.  The Christoffel
symbols of a metric enter this module with the opposite sign to the usual
textbook ones (see :func:`prehomog.riemannian.christoffel`).

The integrability object is stored as ``I[i, r, j, k]``, alternated over
``(r, j)``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import ad
from .chart import (
    Box,
    ExprArray,
    JetVector,
    OneArrow,
    TensorBlock,
    TensorField,
    TwoArrow,
    as_point,
    formal_lie_derivative,
    pushforward_tensor,
)
from .errors import OrderError, SymmetryError
from .sampling import points

PAIR = ((1, 2),)
I_VARIANCE = ("u", "l", "l", "l")


def symmetric_gamma_table(n, exprs):
    """Expression table for ``gamma`` plus aliases making ``[i, k, j]`` share ``[i, j, k]``.

    ``exprs`` maps index triples to strings.  Entries given for both orders
    must agree structurally.
    """
    from .expr import parse

    table = {}
    for (i, j, k), text in exprs.items():
        key = (i, min(j, k), max(j, k))
        e = parse(text)
        if key in table and table[key].canonical() != e.canonical():
            raise SymmetryError(
                f"gamma[{i + 1},{j + 1},{k + 1}] = {text!r} differs from the entry with swapped lower indices"
            )
        table[key] = e
    aliases = {(i, k, j): (i, j, k) for i in range(n) for j in range(n) for k in range(j + 1, n)}
    return table, aliases


@dataclass(frozen=True)
class AffineObject:
    n: int
    gamma: ExprArray
    domain: Box
    name: str = "gamma"

    @classmethod
    def from_exprs(cls, n, exprs, domain, name="gamma"):
        table, aliases = symmetric_gamma_table(n, exprs)
        return cls(n, ExprArray((n, n, n), table, aliases), domain, name)

    @classmethod
    def from_field(cls, n, func, domain, name="gamma"):
        """Wrap a generic callable; symmetry is the caller's responsibility."""
        return cls(n, func, domain, name)

    def __call__(self, x):
        return self.gamma(x)

    def point(self, x, what="point"):
        x = as_point(x, self.n)
        self.domain.check(x, what)
        return x


def _sym(t):
    return 0.5 * (t + np.swapaxes(t, 1, 2))


def lift_f2(gamma_x, gamma_y, f1):
    """``gamma(y) f1 f1 - f1 gamma(x)`` symmetrised over the lower pair."""
    f2 = np.einsum("iab,aj,bk->ijk", gamma_y, f1, f1) - np.einsum("ia,ajk->ijk", f1, gamma_x)
    return _sym(f2)


def eps_lift_arrow_affine(A, arrow: OneArrow):
    """The unique 2-arrow above ``arrow`` that preserves ``gamma``."""
    x = A.point(arrow.source, "source")
    y = A.point(arrow.target, "target")
    f2 = lift_f2(np.asarray(A(x)), np.asarray(A(y)), arrow.f1)
    return TwoArrow(x, y, arrow.f1, f2)


def preservation_residual(A, arrow: TwoArrow):
    """Max-norm failure of ``f1 gamma(x) + f2 = gamma(y) f1 f1``."""
    lhs = np.einsum("ia,ajk->ijk", arrow.f1, A(arrow.source)) + arrow.f2
    rhs = np.einsum("iab,aj,bk->ijk", A(arrow.target), arrow.f1, arrow.f1)
    return float(np.max(np.abs(lhs - rhs)))


def integrability_field(gamma):
    """Generic ``x -> I[i, r, j, k]`` for a generic ``gamma`` field."""

    def integ(x):
        g = gamma(x)
        dg = ad.jacobian(gamma, x)  # dg[i, j, k, r] = d_r gamma[i, j, k]
        t = ad.transpose(dg, (0, 3, 1, 2)) + ad.einsum("ija,ark->irjk", g, g)
        return t - ad.swapaxes(t, 1, 2)

    return integ


def integrability_affine(A, x):
    return TensorBlock(I_VARIANCE, integrability_field(A)(A.point(x)), PAIR)


def nonlinear_curvature_affine(A, x, y, f1):
    arrow = OneArrow(A.point(x, "source"), A.point(y, "target"), f1)
    return integrability_affine(A, y) - pushforward_tensor(arrow, integrability_affine(A, x))


def eps_lift_jet_affine(A, xi: JetVector, x):
    """Extend an order-1 jet to the order-2 jet preserving ``gamma``."""
    if xi.order < 1:
        raise OrderError("an order-1 jet is needed")
    x = A.point(x)
    g = np.asarray(A(x))
    dg = np.asarray(ad.derivative(A, x, xi.xi0))
    x1 = xi.xi1
    xi2 = (
        dg
        + np.einsum("ika,aj->ijk", g, x1)
        + np.einsum("ija,ak->ijk", g, x1)
        - np.einsum("ia,ajk->ijk", x1, g)
    )
    return JetVector(xi.xi0, x1, _sym(xi2))


def _jet_at(xi, x):
    if isinstance(xi, JetVector):
        return xi
    f0, f1 = xi
    return JetVector(np.asarray(ad.real(f0(x)), dtype=float), np.asarray(ad.real(f1(x)), dtype=float))


def linear_curvature_affine(A, xi, x):
    """Formal Lie derivative of ``I(gamma)`` along the lifted jet of ``xi``.

    ``xi`` is an order-1 :class:`JetVector` at ``x`` or a pair of generic
    fields ``(xi0, xi1)``.
    """
    x = A.point(x)
    jet = eps_lift_jet_affine(A, _jet_at(xi, x), x)
    fld = TensorField(integrability_field(A), I_VARIANCE, PAIR)
    return formal_lie_derivative(jet, fld, x)


class FlatnessVerdict(NamedTuple):
    flat: bool
    max_residual: float
    worst_point: tuple
    samples: int


def is_flat_affine(A, samples=64, tol=1e-7, seed=0):
    """Sample ``|I(gamma)|`` at quasi-random points; flat iff the maximum is within ``tol``."""
    worst, where = 0.0, None
    for p in points(A.domain, samples, seed):
        r = integrability_affine(A, p).norm()
        if where is None or r > worst:
            worst, where = r, tuple(p)
    return FlatnessVerdict(worst <= tol, worst, where, samples)


def pullback_gamma(gamma, f, n):
    """Generic field of the object obtained by transporting ``gamma`` back along ``f``.

    ``f`` is a generic map ``x -> f(x)`` (a diffeomorphism onto its image);
    the result satisfies ``d2f = gamma(f(x)) df df - df gamma_new(x)``.
    """

    def new(x):
        df = ad.jacobian(f, x)  # df[i, j] = d_j f_i
        d2f = ad.jacobian(lambda p: ad.jacobian(f, p), x)  # [i, j, k]
        g = gamma(f(x))
        rhs = ad.einsum("iab,aj,bk->ijk", g, df, df) - d2f
        return ad.einsum("ia,ajk->ijk", ad.inv(df), rhs)

    return new


def zero_gamma(n):
    zero = np.zeros((n, n, n))
    return lambda x: zero

