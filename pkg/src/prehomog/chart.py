"""Single-chart tensor machinery.

Points are plain ``numpy`` vectors inside an axis-aligned :class:`Box`.
Component fields are callables that accept either real points or
:class:`~prehomog.ad.Dual` points, so any field built from them can be
differentiated exactly with :func:`prehomog.ad.derivative`.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import ad
from .errors import DomainError, OrderError, SingularArrow, SymmetryError
from .expr import parse

DET_TOL = 1e-12
BOUNDARY_MARGIN = 1e-9
_LETTERS = "abcdefghijklmnopqrstuvwxy"


@dataclass(frozen=True)
class Box:
    """Axis-aligned chart domain ``[lo_1, hi_1] x ... x [lo_n, hi_n]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box needs matching, non-empty bounds")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"degenerate box {list(zip(lo, hi))}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_bounds(cls, bounds):
        return cls(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))

    @property
    def n(self):
        return len(self.lo)

    @property
    def bounds(self):
        return [[l, h] for l, h in zip(self.lo, self.hi)]

    def contains(self, x, margin=BOUNDARY_MARGIN):
        x = np.asarray(ad.real(x), dtype=float)
        return bool(np.all(x >= np.add(self.lo, margin)) and np.all(x <= np.subtract(self.hi, margin)))

    def check(self, x, what="point"):
        x = np.asarray(ad.real(x), dtype=float)
        if x.shape != (self.n,):
            raise DomainError(f"{what} has {x.size} coordinates, chart has {self.n}")
        if not self.contains(x):
            raise DomainError(f"{what} {x.tolist()} is outside (or within 1e-9 of the edge of) {self.bounds}")

    def shrink(self, amount):
        return Box(tuple(l + amount for l in self.lo), tuple(h - amount for h in self.hi))

    def scale(self, u):
        """Map points of the unit cube into the box."""
        u = np.asarray(u, dtype=float)
        return np.asarray(self.lo) + u * (np.asarray(self.hi) - np.asarray(self.lo))


def as_point(x, n=None):
    p = np.array(x, dtype=float).reshape(-1)
    if n is not None and p.shape != (n,):
        raise DomainError(f"expected {n} coordinates, got {p.size}")
    return p


def coords(x):
    """Split a (possibly dual) point into a list of coordinates."""
    return [x[i] for i in range(ad.shape(x)[0])]


class ExprArray:
    """A fixed-shape array of scalar expressions evaluated as one field.

    ``aliases`` maps an index tuple onto another index tuple whose expression
    (and value) it shares, which makes declared symmetries exact.
    """

    def __init__(self, shape, exprs, aliases=None):
        self.shape = tuple(shape)
        self.exprs = {idx: parse(e) for idx, e in exprs.items()}
        self.aliases = dict(aliases or {})
        for idx in np.ndindex(*self.shape):
            if idx not in self.exprs and idx not in self.aliases:
                self.exprs[idx] = parse("0")
        keys = list(self.exprs)
        slot = {k: i for i, k in enumerate(keys)}
        self._unique = [self.exprs[k] for k in keys]
        self._order = [slot[self.aliases.get(idx, idx)] for idx in np.ndindex(*self.shape)]

    def expr(self, idx):
        return self.exprs[self.aliases.get(idx, idx)]

    def __call__(self, x):
        cs = coords(x)
        values = [e(cs) for e in self._unique]
        return ad.pack([values[i] for i in self._order], self.shape)


class Jet(NamedTuple):
    value: float
    gradient: np.ndarray = None
    hessian: np.ndarray = None


def eval_jet(expr, x, order=1, domain=None):
    """Value and exact partials (up to second order) of a scalar expression."""
    expr = parse(expr)
    if order not in (0, 1, 2):
        raise OrderError(f"order {order} not supported (max 2)")
    x = as_point(x)
    if domain is not None:
        domain.check(x)
    f = lambda p: expr(coords(p))
    value = float(ad.real(f(x)))
    if order == 0:
        return Jet(value)
    n = x.size
    eye = np.eye(n)
    if order == 1:
        grad = np.array([float(ad.derivative(f, x, eye[j])) for j in range(n)])
        return Jet(value, grad)
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            _, da, db, dab = ad.second_directional(f, x, eye[a], eye[b])
            grad[a], grad[b] = da, db
            hess[a, b] = hess[b, a] = dab
    return Jet(value, grad, hess)


def fd_jet(expr, x, order=1, step=1e-4, domain=None):
    """Central-difference estimate of :func:`eval_jet` (error O(step**2))."""
    expr = parse(expr)
    if order not in (0, 1, 2):
        raise OrderError(f"order {order} not supported (max 2)")
    if step <= 0:
        raise ValueError("step must be positive")
    x = as_point(x)
    n = x.size
    if domain is not None:
        domain.check(x)
        for sign in (-1.0, 1.0):
            domain.check(x + sign * step, "finite-difference stencil")
    f = lambda p: float(expr(list(p)))
    f0 = f(x)
    if order == 0:
        return Jet(f0)
    eye = np.eye(n) * step
    fp = np.array([f(x + eye[i]) for i in range(n)])
    fm = np.array([f(x - eye[i]) for i in range(n)])
    grad = (fp - fm) / (2 * step)
    if order == 1:
        return Jet(f0, grad)
    hess = np.zeros((n, n))
    for a in range(n):
        hess[a, a] = (fp[a] - 2 * f0 + fm[a]) / step**2
        for b in range(a + 1, n):
            v = (
                f(x + eye[a] + eye[b])
                - f(x + eye[a] - eye[b])
                - f(x - eye[a] + eye[b])
                + f(x - eye[a] - eye[b])
            ) / (4 * step**2)
            hess[a, b] = hess[b, a] = v
    return Jet(f0, grad, hess)


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TensorBlock:
    """Dense components with a variance signature.

    ``variance`` holds one ``'u'`` (upper), ``'l'`` (lower) or ``'-'``
    (inert label, such as a frame index) per slot;
    ``antisymmetric`` and ``symmetric`` list slot pairs whose symmetry holds
    componentwise and exactly.
    """

    variance: tuple
    components: np.ndarray
    antisymmetric: tuple = ()
    symmetric: tuple = ()

    def __post_init__(self):
        variance = tuple(self.variance)
        comps = _freeze(self.components)
        if any(v not in ("u", "l", "-") for v in variance):
            raise ValueError(f"bad variance {variance}")
        if comps.ndim != len(variance):
            raise ValueError(f"{comps.ndim}-index array for variance {variance}")
        if comps.ndim and len(set(comps.shape)) != 1:
            raise ValueError(f"non-square component array {comps.shape}")
        anti = tuple(tuple(p) for p in self.antisymmetric)
        sym = tuple(tuple(p) for p in self.symmetric)
        for p, q in anti:
            if not np.array_equal(comps, -np.swapaxes(comps, p, q)):
                raise SymmetryError(f"slots {p},{q} are declared antisymmetric")
        for p, q in sym:
            if not np.array_equal(comps, np.swapaxes(comps, p, q)):
                raise SymmetryError(f"slots {p},{q} are declared symmetric")
        object.__setattr__(self, "variance", variance)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "antisymmetric", anti)
        object.__setattr__(self, "symmetric", sym)

    @classmethod
    def project(cls, variance, components, antisymmetric=(), symmetric=()):
        """Build a block after projecting onto the declared symmetries.

        Used for results that satisfy the symmetry only up to rounding.
        """
        return cls(variance, project(components, antisymmetric, symmetric), antisymmetric, symmetric)

    @property
    def valence(self):
        return len(self.variance)

    def norm(self):
        return float(np.sqrt(np.sum(self.components**2)))

    def __sub__(self, other):
        return TensorBlock.project(
            self.variance,
            self.components - other.components,
            set(self.antisymmetric) & set(other.antisymmetric),
            set(self.symmetric) & set(other.symmetric),
        )


def project(components, antisymmetric=(), symmetric=()):
    out = np.array(components, dtype=float)
    for p, q in antisymmetric:
        out = 0.5 * (out - np.swapaxes(out, p, q))
    for p, q in symmetric:
        out = 0.5 * (out + np.swapaxes(out, p, q))
    return out


def _check_invertible(f1):
    f1 = np.asarray(f1, dtype=float)
    if f1.ndim != 2 or f1.shape[0] != f1.shape[1]:
        raise ValueError(f"f1 must be square, got shape {f1.shape}")
    if not np.all(np.isfinite(f1)) or abs(np.linalg.det(f1)) <= DET_TOL:
        raise SingularArrow(f"|det f1| <= {DET_TOL}")
    return f1


@dataclass(frozen=True)
class OneArrow:
    """1-jet of a local diffeomorphism: ``(source, target, f1)``."""

    source: np.ndarray
    target: np.ndarray
    f1: np.ndarray

    def __post_init__(self):
        f1 = _check_invertible(self.f1)
        object.__setattr__(self, "source", _freeze(as_point(self.source, f1.shape[0])))
        object.__setattr__(self, "target", _freeze(as_point(self.target, f1.shape[0])))
        object.__setattr__(self, "f1", _freeze(f1))

    @classmethod
    def identity(cls, x):
        x = as_point(x)
        return cls(x, x, np.eye(x.size))

    @property
    def n(self):
        return self.f1.shape[0]

    @property
    def f1_inv(self):
        return np.linalg.inv(self.f1)

    def inverse(self):
        return OneArrow(self.target, self.source, self.f1_inv)

    def compose(self, first):
        """``self o first``: apply ``first`` and then ``self``."""
        return OneArrow(first.source, self.target, self.f1 @ first.f1)


@dataclass(frozen=True)
class TwoArrow:
    """2-jet of a local diffeomorphism: ``(source, target, f1, f2)``."""

    source: np.ndarray
    target: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    def __post_init__(self):
        f1 = _check_invertible(self.f1)
        n = f1.shape[0]
        f2 = np.asarray(self.f2, dtype=float)
        if f2.shape != (n, n, n):
            raise ValueError(f"f2 must have shape {(n, n, n)}")
        scale = max(1.0, float(np.max(np.abs(f2))))
        if not np.allclose(f2, np.swapaxes(f2, 1, 2), rtol=0, atol=1e-12 * scale):
            raise SymmetryError("f2 must be symmetric in its lower indices")
        object.__setattr__(self, "source", _freeze(as_point(self.source, n)))
        object.__setattr__(self, "target", _freeze(as_point(self.target, n)))
        object.__setattr__(self, "f1", _freeze(f1))
        object.__setattr__(self, "f2", _freeze(f2))

    @property
    def one_arrow(self):
        return OneArrow(self.source, self.target, self.f1)


@dataclass(frozen=True)
class JetVector:
    """Jet of a vector field at a point: ``xi0`` (order 0), ``xi1``, ``xi2``."""

    xi0: np.ndarray
    xi1: np.ndarray = None
    xi2: np.ndarray = None

    def __post_init__(self):
        xi0 = as_point(self.xi0)
        n = xi0.size
        object.__setattr__(self, "xi0", _freeze(xi0))
        if self.xi1 is None and self.xi2 is not None:
            raise OrderError("xi2 given without xi1")
        if self.xi1 is not None:
            xi1 = np.asarray(self.xi1, dtype=float)
            if xi1.shape != (n, n):
                raise ValueError(f"xi1 must have shape {(n, n)}")
            object.__setattr__(self, "xi1", _freeze(xi1))
        if self.xi2 is not None:
            xi2 = np.asarray(self.xi2, dtype=float)
            if xi2.shape != (n, n, n):
                raise ValueError(f"xi2 must have shape {(n, n, n)}")
            scale = max(1.0, float(np.max(np.abs(xi2))))
            if not np.allclose(xi2, np.swapaxes(xi2, 1, 2), rtol=0, atol=1e-12 * scale):
                raise SymmetryError("xi2 must be symmetric in its lower indices")
            object.__setattr__(self, "xi2", _freeze(xi2))

    @property
    def order(self):
        if self.xi2 is not None:
            return 2
        if self.xi1 is not None:
            return 1
        return 0

    @property
    def n(self):
        return self.xi0.size

    @classmethod
    def zero(cls, n, order=2):
        parts = [np.zeros(n), np.zeros((n, n)), np.zeros((n, n, n))]
        return cls(*parts[: order + 1])

    def __add__(self, other):
        return _combine(self, other, 1.0, 1.0)

    def __mul__(self, c):
        return _combine(self, self, float(c), 0.0)

    __rmul__ = __mul__


def _combine(a, b, ca, cb):
    order = min(a.order, b.order)
    parts = [ca * getattr(a, f) + cb * getattr(b, f) for f in ("xi0", "xi1", "xi2")[: order + 1]]
    return JetVector(*parts)


# --- pushforwards ---------------------------------------------------------


def _act(matrix, t, axis):
    """Contract ``matrix[i, a]`` with slot ``axis`` of ``t`` (new index i in place)."""
    nd = len(ad.shape(t))
    idx = list(_LETTERS[:nd])
    old = idx[axis]
    new = "z"
    out = idx.copy()
    out[axis] = new
    return ad.einsum(f"{new}{old},{''.join(idx)}->{''.join(out)}", matrix, t)


def push_components(f1, g1, t, variance):
    """Transport components along an arrow (``g1 = f1^-1``); generic in ad numbers."""
    gt = ad.swapaxes(g1, 0, 1)
    for axis, kind in enumerate(variance):
        if kind != "-":
            t = _act(f1 if kind == "u" else gt, t, axis)
    return t


def pushforward_tensor(arrow, t):
    """Push a tensor at ``arrow.source`` to ``arrow.target``.

    Upper slots contract with ``f1``, lower slots with ``f1^-1``.
    """
    if t.valence == 0:
        return t
    if t.components.shape[0] != arrow.n:
        raise ValueError("tensor and arrow dimensions differ")
    comps = push_components(arrow.f1, arrow.f1_inv, t.components, t.variance)
    return TensorBlock.project(t.variance, comps, t.antisymmetric, t.symmetric)


RHO_VARIANCE = ("u", "l", "l")
SIGMA_VARIANCE = ("u", "l", "l", "l")
FORM_PAIR = ((1, 2),)


def push_jet2form_components(f1, g1, f2, rho, sigma):
    """Generic core of :func:`pushforward_jet2form`."""
    rho_f = push_components(f1, g1, rho, RHO_VARIANCE)
    # J1T value (rho^a, sigma^a_b) -> (f^i_a rho^a, (f2^i_ab rho^a + f^i_a sigma^a_b) g^b_k)
    s = ad.einsum("iab,acd->icdb", f2, rho) + ad.einsum("ia,acdb->icdb", f1, sigma)
    s = ad.einsum("icdb,bk,cr,dj->irjk", s, g1, g1, g1)
    return rho_f, s


def pushforward_jet2form(arrow, rho, sigma):
    """Transport a 2-form with values in J1(T) along a 2-arrow."""
    rho_c, sigma_c = push_jet2form_components(
        arrow.f1, np.linalg.inv(arrow.f1), arrow.f2, rho.components, sigma.components
    )
    return (
        TensorBlock.project(RHO_VARIANCE, rho_c, FORM_PAIR),
        TensorBlock.project(SIGMA_VARIANCE, sigma_c, FORM_PAIR),
    )


# --- fields and Lie derivatives ------------------------------------------


@dataclass(frozen=True)
class TensorField:
    """A tensor field given by ``func(x) -> components`` (generic in ad numbers)."""

    func: object
    variance: tuple
    antisymmetric: tuple = ()
    symmetric: tuple = ()

    def __call__(self, x):
        return self.func(x)

    def at(self, x):
        return TensorBlock.project(self.variance, ad.real(self.func(as_point(x))), self.antisymmetric, self.symmetric)


@dataclass(frozen=True)
class JetFormField:
    """A J1(T)-valued 2-form field: ``func(x) -> (rho, sigma)``."""

    func: object

    def __call__(self, x):
        return self.func(x)

    def at(self, x):
        rho, sigma = self.func(as_point(x))
        return (
            TensorBlock.project(RHO_VARIANCE, ad.real(rho), FORM_PAIR),
            TensorBlock.project(SIGMA_VARIANCE, ad.real(sigma), FORM_PAIR),
        )


def formal_lie_derivative(jet, fld, x):
    """Formal Lie derivative of a tensor or J1(T)-valued 2-form field.

    Differentiates ``fld(x + t xi0) - push_{arrow(t)} fld(x)`` at ``t = 0``
    where ``arrow(t) = (x, x + t xi0, I + t xi1, t xi2)``.
    """
    x = as_point(x, jet.n)
    n = jet.n
    eye = np.eye(n)
    if isinstance(fld, JetFormField):
        if jet.order < 2:
            raise OrderError("a 2-jet is needed to transport J1(T)-valued forms")
        rho0, sigma0 = (np.asarray(ad.real(c)) for c in fld(x))

        def moved(t):
            y = x + t * jet.xi0
            f1 = eye + t * jet.xi1
            rho_t, sigma_t = push_jet2form_components(f1, ad.inv(f1), t * jet.xi2, rho0, sigma0)
            rho_y, sigma_y = fld(y)
            return rho_y - rho_t, sigma_y - sigma_t

        d_rho, d_sigma = ad.derivative(moved, 0.0, 1.0)
        return (
            TensorBlock.project(RHO_VARIANCE, d_rho, FORM_PAIR),
            TensorBlock.project(SIGMA_VARIANCE, d_sigma, FORM_PAIR),
        )
    if jet.order < 1 and fld.variance:
        raise OrderError("a 1-jet is needed to transport tensors")
    t0 = np.asarray(ad.real(fld(x)))

    def moved(t):
        y = x + t * jet.xi0
        if not fld.variance:
            return fld(y) - t0
        f1 = eye + t * jet.xi1
        return fld(y) - push_components(f1, ad.inv(f1), t0, fld.variance)

    d = ad.derivative(moved, 0.0, 1.0)
    return TensorBlock.project(fld.variance, d, fld.antisymmetric, fld.symmetric)


def lie_derivative_11_closed(jet, alpha, x):
    """``d_a alpha^i_j xi^a - alpha^a_j xi^i_a + alpha^i_a xi^a_j`` for a (1,1) field."""
    if jet.order < 1:
        raise OrderError("a 1-jet is needed")
    x = as_point(x, jet.n)
    a = np.asarray(ad.real(alpha(x)))
    da = np.asarray(ad.derivative(alpha, x, jet.xi0))
    comps = da - np.einsum("aj,ia->ij", a, jet.xi1) + np.einsum("ia,aj->ij", a, jet.xi1)
    return TensorBlock(("u", "l"), comps)


def field_from_exprs(exprs, variance):
    """Convenience: a :class:`TensorField` from a nested list of expression strings."""
    arr = np.array(exprs, dtype=object)
    table = {idx: arr[idx] for idx in np.ndindex(*arr.shape)}
    return TensorField(ExprArray(arr.shape, table), tuple(variance))
