import numpy as np
import pytest

from prehomog import ad, affine as A
from prehomog.catalog import build, get_spec
from prehomog.chart import Box, JetVector, OneArrow
from prehomog.errors import OrderError, SymmetryError
from prehomog.sampling import orthogonal, points

BOX = Box((-1, -1), (1, 1))
ZERO = build(get_spec("affine-zero"))
FLAT = build(get_spec("affine-pullback-flat"))
SPHERE = build(get_spec("affine-sphere"))


def random_arrow(rng, x, y):
    return OneArrow(x, y, orthogonal(2, rng) @ np.diag(rng.uniform(0.7, 1.4, 2)))


def random_gamma(seed):
    """A generic symmetric field built from random smooth terms."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((2, 2, 2, 3))
    c = 0.5 * (c + np.swapaxes(c, 1, 2))

    def gamma(x):
        basis = ad.stack([ad.sin(x[0]), x[0] * x[1], ad.exp(0.3 * x[1])])
        return ad.einsum("ijkm,m->ijk", c, basis)

    return A.AffineObject.from_field(2, gamma, BOX, "random")


def test_lift_examples():
    rng = np.random.default_rng(0)
    arrow = random_arrow(rng, (0.1, 0.2), (-0.3, 0.5))
    assert not A.eps_lift_arrow_affine(ZERO, arrow).f2.any()
    ident = OneArrow.identity((0.3, -0.2))
    assert np.allclose(A.eps_lift_arrow_affine(SPHERE, ident).f2, 0, atol=1e-16)
    for i in range(10):
        x, y = rng.uniform(-0.9, 0.9, (2, 2))
        two = A.eps_lift_arrow_affine(SPHERE, random_arrow(rng, x, y))
        assert A.preservation_residual(SPHERE, two) <= 1e-12


def test_integrability():
    assert A.integrability_affine(ZERO, (0.2, 0.1)).norm() == 0
    assert A.integrability_affine(FLAT, (0.2, 0.1)).norm() < 1e-14
    assert A.integrability_affine(SPHERE, (0.2, 0.1)).norm() > 1.0


def test_nonlinear_curvature():
    rng = np.random.default_rng(1)
    x = np.array([0.3, -0.4])
    assert A.nonlinear_curvature_affine(SPHERE, x, x, np.eye(2)).norm() == 0
    assert A.nonlinear_curvature_affine(ZERO, x, (0.1, 0.9), orthogonal(2, rng)).norm() == 0
    assert A.nonlinear_curvature_affine(SPHERE, x, (0.1, 0.9), np.eye(2)).norm() > 0.1


def test_eps_lift_jet():
    x = np.array([0.1, 0.2])
    assert not A.eps_lift_jet_affine(SPHERE, JetVector.zero(2, 1), x).xi2.any()
    rng = np.random.default_rng(2)
    jet = JetVector(rng.standard_normal(2), rng.standard_normal((2, 2)))
    assert not A.eps_lift_jet_affine(ZERO, jet, x).xi2.any()
    with pytest.raises(OrderError):
        A.eps_lift_jet_affine(SPHERE, JetVector([1.0, 0.0]), x)


@pytest.mark.parametrize("seed", range(5))
def test_eps_lift_jet_symmetry_for_random_gamma(seed):
    G = random_gamma(seed)
    rng = np.random.default_rng(seed + 10)
    jet = JetVector(rng.standard_normal(2), rng.standard_normal((2, 2)))
    xi2 = A.eps_lift_jet_affine(G, jet, rng.uniform(-0.9, 0.9, 2)).xi2
    assert np.max(np.abs(xi2 - np.swapaxes(xi2, 1, 2))) <= 1e-12


def test_linear_curvature():
    rng = np.random.default_rng(3)
    x = np.array([0.2, -0.1])
    jet = JetVector(rng.standard_normal(2), rng.standard_normal((2, 2)))
    assert A.linear_curvature_affine(ZERO, jet, x).norm() == 0
    assert A.linear_curvature_affine(SPHERE, JetVector.zero(2, 1), x).norm() == 0
    for p in points(FLAT.domain, 10, 4):
        jet = JetVector(rng.standard_normal(2), rng.standard_normal((2, 2)))
        assert A.linear_curvature_affine(FLAT, jet, p).norm() <= 1e-9
    assert A.linear_curvature_affine(SPHERE, jet, x).norm() > 0.1


def test_linear_curvature_accepts_field_pair():
    f0 = lambda p: ad.stack([p[1], -p[0]])
    f1 = lambda p: np.array([[0.0, 1.0], [-1.0, 0.0]])
    x = np.array([0.3, 0.4])
    via_fields = A.linear_curvature_affine(SPHERE, (f0, f1), x).components
    via_jet = A.linear_curvature_affine(SPHERE, JetVector([0.4, -0.3], [[0, 1], [-1, 0]]), x).components
    assert np.allclose(via_fields, via_jet, atol=1e-15)


def test_is_flat_affine():
    v = A.is_flat_affine(ZERO, 16)
    assert v.flat and v.max_residual == 0
    assert A.is_flat_affine(FLAT, 32, tol=1e-9).flat
    v = A.is_flat_affine(SPHERE, 32)
    assert not v.flat and v.max_residual >= 0.1


def test_pullback_reproduces_catalog_entry():
    f = lambda p: ad.stack([p[0] + p[1] * p[1], p[1]])
    gamma = A.pullback_gamma(A.zero_gamma(2), f, 2)
    x = np.array([0.3, 0.7])
    assert np.allclose(np.asarray(gamma(x)), FLAT(x), atol=1e-15)
    # and a pullback of a curved object is still curved
    curved = A.AffineObject.from_field(2, A.pullback_gamma(SPHERE, f, 2), Box((-0.5, -0.5), (0.5, 0.5)))
    assert A.integrability_affine(curved, (0.1, 0.1)).norm() > 0.1


def test_symmetry_error():
    with pytest.raises(SymmetryError):
        A.AffineObject.from_exprs(2, {(0, 0, 1): "x1", (0, 1, 0): "x2"}, BOX)
    G = A.AffineObject.from_exprs(2, {(0, 0, 1): "x1", (0, 1, 0): "x1"}, BOX)
    g = G((0.5, 0.0))
    assert g[0, 0, 1] == g[0, 1, 0] == 0.5
