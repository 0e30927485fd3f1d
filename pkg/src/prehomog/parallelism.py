"""Absolute parallelism: a frame field ``w`` and its curvature objects.

Index conventions (0-based arrays, same slot order as written):

* ``w[i, j]`` is the i-th coordinate of the j-th frame vector.
* ``gamma[i, j, k] = d_j w[i, a] * winv[a, k]``.
* ``I(w)[i, j, k] = gamma[i, j, k] - gamma[i, k, j]``.
* ``lin[i, k, j, a]`` is the linear curvature, alternated over ``(k, j)``.
"""

from dataclasses import dataclass

import numpy as np

from . import ad
from .chart import (
    Box,
    ExprArray,
    JetVector,
    OneArrow,
    TensorBlock,
    TensorField,
    as_point,
    pushforward_tensor,
)
from .errors import SingularFrame

FRAME_DET_TOL = 1e-12
PAIR = ((1, 2),)


@dataclass(frozen=True)
class StructureObjectW:
    n: int
    w: ExprArray
    domain: Box
    name: str = "w"

    @classmethod
    def from_exprs(cls, rows, domain, name="w"):
        n = len(rows)
        table = {(i, j): rows[i][j] for i in range(n) for j in range(n)}
        return cls(n, ExprArray((n, n), table), domain, name)

    def frame(self, x):
        """``w(x)``; generic in ad numbers, checked for invertibility."""
        value = self.w(x)
        if abs(np.linalg.det(np.asarray(ad.real(value)))) <= FRAME_DET_TOL:
            raise SingularFrame(f"det w = 0 at {np.asarray(ad.real(x)).tolist()}")
        return value

    def point(self, x, what="point"):
        x = as_point(x, self.n)
        self.domain.check(x, what)
        return x


def gamma_field(W):
    """Generic ``x -> gamma(x)``."""

    def gamma(x):
        w = W.frame(x)
        dw = ad.jacobian(W.frame, x)  # dw[i, a, j] = d_j w[i, a]
        return ad.einsum("iaj,ak->ijk", dw, ad.inv(w))

    return gamma


def integrability_field(W):
    gamma = gamma_field(W)

    def integ(x):
        g = gamma(x)
        return g - ad.swapaxes(g, 1, 2)

    return integ


def epsilon_arrow(W, x, y):
    """The unique 1-arrow from ``x`` to ``y`` preserving ``w``: ``w(y) w(x)^-1``."""
    x = W.point(x, "source")
    y = W.point(y, "target")
    return OneArrow(x, y, W.frame(y) @ np.linalg.inv(W.frame(x)))


def gamma_of_w(W, x):
    return TensorBlock(("u", "l", "l"), gamma_field(W)(W.point(x)))


def gamma_of_w_alt(W, x):
    """Same object computed as ``-w d(w^-1)``; kept as an independent check."""
    x = W.point(x)
    winv = lambda p: ad.inv(W.frame(p))
    d_winv = ad.jacobian(winv, x)  # [a, k, j]
    return TensorBlock(("u", "l", "l"), -np.einsum("ia,akj->ijk", W.frame(x), d_winv))


def integrability_w(W, x):
    return TensorBlock(("u", "l", "l"), integrability_field(W)(W.point(x)), PAIR)


def nonlinear_curvature_w(W, x, y):
    """``I(w; y)`` minus the transport of ``I(w; x)`` along ``epsilon(x, y)``."""
    arrow = epsilon_arrow(W, x, y)
    return integrability_w(W, y) - pushforward_tensor(arrow, integrability_w(W, x))


def linear_curvature_field(W):
    gamma = gamma_field(W)

    def lin(x):
        dg = ad.jacobian(gamma, x)  # dg[i, a, j, k] = d_k gamma[i, a, j]
        t = ad.transpose(dg, (0, 3, 2, 1)) + ad.einsum("ibj,bak->ikja", gamma(x), gamma(x))
        return t - ad.swapaxes(t, 1, 2)

    return lin


def linear_curvature_w(W, x):
    return TensorBlock(("u", "l", "l", "l"), linear_curvature_field(W)(W.point(x)), PAIR)


def contract_direction(lin, xi0):
    """``lin[i, k, j, a] xi0[a]`` rearranged into the ``[i, k, j]`` slots of ``R``."""
    return TensorBlock.project(("u", "l", "l"), np.einsum("ikja,a->ikj", lin.components, xi0), PAIR)


def _vector_field(xi0, n):
    if callable(xi0):
        return xi0
    v = as_point(xi0, n)
    return lambda x: v


def eps_lift_vector(W, xi0, x):
    """Order-1 jet ``(xi, gamma[i, a, j] xi[a])`` at ``x``; ``xi0`` is a field or a vector."""
    x = W.point(x)
    xi = np.asarray(ad.real(_vector_field(xi0, W.n)(x)), dtype=float)
    return JetVector(xi, np.einsum("iaj,a->ij", gamma_field(W)(x), xi))


def eps_lift_section(W, xi0):
    """Generic ``(xi0, xi1)`` field pair of the lifted section, for use with :func:`spencer_D`."""
    field = _vector_field(xi0, W.n)
    gamma = gamma_field(W)
    return field, lambda x: ad.einsum("iaj,a->ij", gamma(x), field(x))


def spencer_D(xi0, xi1, x):
    """``d_j xi^i - xi^i_j`` for a section given by two generic fields."""
    x = as_point(x)
    comps = np.asarray(ad.jacobian(xi0, x)) - np.asarray(ad.real(xi1(x)))
    return TensorBlock(("u", "l"), comps)


def frame_field(W):
    """``w`` as a field whose second slot is an inert frame label."""
    return TensorField(W.frame, ("u", "-"))


def check_linearization_w(W, x, xi0, step):
    """Residual of ``R(x, x + step*xi0) / step`` against the contracted linear curvature."""
    x = W.point(x)
    xi0 = as_point(xi0, W.n)
    y = x + step * xi0
    W.domain.check(y, "displaced point")
    lhs = nonlinear_curvature_w(W, x, y).components / step
    rhs = contract_direction(linear_curvature_w(W, x), xi0).components
    return float(np.linalg.norm(lhs - rhs))
