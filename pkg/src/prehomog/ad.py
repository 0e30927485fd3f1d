"""Forward-mode automatic differentiation with tagged, nestable dual numbers.

A :class:`Dual` stands for ``re + eps * d`` where ``d`` is a nilpotent
infinitesimal identified by an integer ``tag``.  Both parts may be floats,
numpy arrays, or Duals carrying a *smaller* tag, so differentiating a function
that itself differentiates (``derivative`` inside ``derivative``) gives exact
higher derivatives without perturbation confusion: tags strictly decrease
from the outside in, and every operation works at the largest tag present.

Array-valued parts make a single Dual behave like an array of dual numbers,
which is how tensor fields are differentiated along a direction.

Only the operations needed by the geometry code are provided: arithmetic,
integer powers, the six elementary functions of the expression language,
``einsum``, matrix inverse, stacking and axis shuffling.
"""

import itertools
import math

import numpy as np

from .errors import DomainError

__all__ = [
    "Dual",
    "derivative",
    "jacobian",
    "real",
    "shape",
    "stack",
    "array",
    "pack",
    "einsum",
    "inv",
    "swapaxes",
    "transpose",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "tanh",
    "ipow",
]

_tags = itertools.count(1)


def _tag(x):
    return x.tag if isinstance(x, Dual) else 0


def _parts(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.re, x.eps
    return x, None


def shape(x):
    while isinstance(x, Dual):
        x = x.re
    return np.shape(x)


def real(x):
    """Strip every infinitesimal part and return the plain value."""
    while isinstance(x, Dual):
        x = x.re
    return x


def _broadcast(x, shp):
    if isinstance(x, Dual):
        return Dual(_broadcast(x.re, shp), _broadcast(x.eps, shp), x.tag)
    return np.broadcast_to(np.asarray(x, dtype=float), shp)


class Dual:
    """Dual number (or array of dual numbers) ``re + eps*d_tag``."""

    __slots__ = ("re", "eps", "tag")
    # make numpy defer to our reflected operators instead of building object arrays
    __array_ufunc__ = None

    def __init__(self, re, eps, tag):
        self.re = re
        self.tag = tag
        shp = shape(re)
        if eps is None:
            eps = np.zeros(shp) if shp else 0.0
        elif shape(eps) != shp:
            eps = _broadcast(eps, shp)
        self.eps = eps

    @property
    def shape(self):
        return shape(self)

    def __repr__(self):
        return f"Dual({self.re!r}, {self.eps!r}, tag={self.tag})"

    def __getitem__(self, idx):
        return Dual(self.re[idx], self.eps[idx], self.tag)

    def __len__(self):
        return self.shape[0]

    def __neg__(self):
        return Dual(-self.re, -self.eps, self.tag)

    def __pos__(self):
        return self

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, k):
        if isinstance(k, (int, np.integer)):
            return ipow(self, int(k))
        return NotImplemented


def _acc(acc, term):
    if term is None:
        return acc
    if acc is None:
        return term
    return add(acc, term)


def add(a, b):
    t = max(_tag(a), _tag(b))
    if t == 0:
        return a + b
    ar, ae = _parts(a, t)
    br, be = _parts(b, t)
    return Dual(add(ar, br), _acc(ae, be), t)


def neg(a):
    return -a


def sub(a, b):
    t = max(_tag(a), _tag(b))
    if t == 0:
        return a - b
    ar, ae = _parts(a, t)
    br, be = _parts(b, t)
    return Dual(sub(ar, br), _acc(ae, None if be is None else neg(be)), t)


def mul(a, b):
    t = max(_tag(a), _tag(b))
    if t == 0:
        return a * b
    ar, ae = _parts(a, t)
    br, be = _parts(b, t)
    eps = None if ae is None else mul(ae, br)
    if be is not None:
        eps = _acc(eps, mul(ar, be))
    return Dual(mul(ar, br), eps, t)


def div(a, b):
    t = max(_tag(a), _tag(b))
    if t == 0:
        if np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        return a / b
    ar, ae = _parts(a, t)
    br, be = _parts(b, t)
    q = div(ar, br)
    eps = None if ae is None else div(ae, br)
    if be is not None:
        eps = _acc(eps, neg(div(mul(q, be), br)))
    return Dual(q, eps, t)


def ipow(a, k):
    """``a**k`` for an integer exponent ``k`` (negative allowed)."""
    if not isinstance(a, Dual):
        if k < 0 and np.any(np.asarray(a) == 0):
            raise DomainError("zero raised to a negative power")
        if isinstance(a, (int, float)):
            return float(a) ** k
        return np.asarray(a, dtype=float) ** k
    if k == 0:
        shp = shape(a)
        return np.ones(shp) if shp else 1.0
    return Dual(ipow(a.re, k), mul(mul(float(k), ipow(a.re, k - 1)), a.eps), a.tag)


def _is_scalar(x):
    return isinstance(x, (int, float))


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.re), mul(cos(x.re), x.eps), x.tag)
    return math.sin(x) if _is_scalar(x) else np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.re), neg(mul(sin(x.re), x.eps)), x.tag)
    return math.cos(x) if _is_scalar(x) else np.cos(x)


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.re)
        return Dual(e, mul(e, x.eps), x.tag)
    try:
        return math.exp(x) if _is_scalar(x) else np.exp(x)
    except OverflowError as err:
        raise DomainError("exp overflow") from err


def log(x):
    if isinstance(x, Dual):
        return Dual(log(x.re), div(x.eps, x.re), x.tag)
    if np.any(np.asarray(x) <= 0):
        raise DomainError("log of a non-positive number")
    return math.log(x) if _is_scalar(x) else np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = sqrt(x.re)
        # div raises DomainError when s == 0: the derivative is unbounded there
        return Dual(s, div(x.eps, mul(2.0, s)), x.tag)
    if np.any(np.asarray(x) < 0):
        raise DomainError("sqrt of a negative number")
    return math.sqrt(x) if _is_scalar(x) else np.sqrt(x)


def tanh(x):
    if isinstance(x, Dual):
        th = tanh(x.re)
        return Dual(th, mul(sub(1.0, mul(th, th)), x.eps), x.tag)
    return math.tanh(x) if _is_scalar(x) else np.tanh(x)


def einsum(spec, *ops):
    """Multilinear contraction, differentiated by the product rule."""
    t = max(_tag(op) for op in ops)
    if t == 0:
        return np.einsum(spec, *ops)
    parts = [_parts(op, t) for op in ops]
    res = [p[0] for p in parts]
    eps = None
    for i, (_, e) in enumerate(parts):
        if e is not None:
            eps = _acc(eps, einsum(spec, *res[:i], e, *res[i + 1 :]))
    return Dual(einsum(spec, *res), eps, t)


def inv(a):
    """Matrix inverse; ``d(A^-1) = -A^-1 dA A^-1``."""
    if isinstance(a, Dual):
        ai = inv(a.re)
        return Dual(ai, neg(einsum("ij,jk,kl->il", ai, a.eps, ai)), a.tag)
    return np.linalg.inv(a)


def swapaxes(x, i, j):
    if isinstance(x, Dual):
        return Dual(swapaxes(x.re, i, j), swapaxes(x.eps, i, j), x.tag)
    return np.swapaxes(x, i, j)


def transpose(x, axes):
    if isinstance(x, Dual):
        return Dual(transpose(x.re, axes), transpose(x.eps, axes), x.tag)
    return np.transpose(x, axes)


def stack(items, axis=0):
    """``np.stack`` for sequences that may mix Duals and plain values."""
    t = max(_tag(i) for i in items)
    if t == 0:
        return np.stack([np.asarray(i, dtype=float) for i in items], axis)
    res, eps = [], []
    for item in items:
        r, e = _parts(item, t)
        res.append(r)
        eps.append(np.zeros(shape(r)) if e is None else e)
    return Dual(stack(res, axis), stack(eps, axis), t)


def array(nested):
    """Build a (possibly dual) array from nested lists of scalars."""
    if isinstance(nested, (list, tuple)):
        return stack([array(item) for item in nested])
    return nested


def pack(values, shp):
    """Reshape a flat list of scalars (plain or dual) into one array-valued number."""
    t = max(_tag(v) for v in values)
    if t == 0:
        return np.array(values, dtype=float).reshape(shp)
    res, eps = [], []
    for v in values:
        if isinstance(v, Dual) and v.tag == t:
            res.append(v.re)
            eps.append(v.eps)
        else:
            res.append(v)
            eps.append(0.0)
    return Dual(pack(res, shp), pack(eps, shp), t)


def _tangent(out, tag):
    if isinstance(out, tuple):
        return tuple(_tangent(o, tag) for o in out)
    if isinstance(out, Dual):
        if out.tag == tag:
            return out.eps
        if out.tag > tag:
            raise RuntimeError("inner perturbation escaped its derivative")
    shp = shape(out)
    return np.zeros(shp) if shp else 0.0


def derivative(f, x, v):
    """Directional derivative of ``f`` at ``x`` along ``v``.

    ``x`` may itself be a Dual (nested differentiation).  ``f`` may return a
    tuple of arrays, in which case a tuple of derivatives is returned.
    """
    tag = next(_tags)
    return _tangent(f(Dual(x, np.asarray(v, dtype=float), tag)), tag)


def jacobian(f, x):
    """Partials of ``f`` at ``x``, appended as a trailing axis."""
    n = shape(x)[0]
    eye = np.eye(n)
    return stack([derivative(f, x, eye[j]) for j in range(n)], axis=-1)


def second_directional(f, x, u, v):
    """Return ``(f, D_u f, D_v f, D_u D_v f)`` at ``x`` from one nested evaluation."""
    s = next(_tags)
    t = next(_tags)
    out = f(Dual(Dual(x, np.asarray(u, dtype=float), s), np.asarray(v, dtype=float), t))
    if isinstance(out, Dual) and out.tag == t:
        value, dv = out.re, out.eps
    else:
        value, dv = out, _tangent(out, t)
    return real(value), real(_tangent(value, s)), real(dv), real(_tangent(dv, s))
