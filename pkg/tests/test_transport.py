import numpy as np
import pytest

from prehomog import riemannian
from prehomog.catalog import build, builtin_catalog, get_spec
from prehomog.chart import Box
from prehomog.errors import DomainEscape
from prehomog.parallelism import StructureObjectW
from prehomog.transport import (
    AffineState,
    PathSpec,
    certify_flat,
    loop_defect,
    loop_once,
    transport_affine,
    transport_linear,
    transport_parallelism,
    transport_riemann,
)

IDENT = StructureObjectW.from_exprs([["1", "0"], ["0", "1"]], Box((-2, -2), (2, 2)))
AXB = build(get_spec("axb"))
HEIS = build(get_spec("heis3"))
PERT = build(get_spec("pert2"))
ZERO = build(get_spec("affine-zero"))
FLAT = build(get_spec("affine-pullback-flat"))
EUCLID = build(get_spec("euclid2"))
SPHERE = build(get_spec("sphere2"))
MISMATCH = build(get_spec("mismatch2"))


def test_pathspec():
    p = PathSpec.polyline([[0, 0], [1, 0], [1, 2]])
    assert p.length == 3 and not p.closed
    loop = PathSpec.rectangle((0, 0), 0.5, 0.25, (0, 1))
    assert loop.closed and loop.length == pytest.approx(1.5)
    assert PathSpec.segment((0, 0), (1, 0)).then(PathSpec.segment((1, 0), (1, 1))).length == 2
    with pytest.raises(ValueError):
        PathSpec.polyline([[0, 0]])
    with pytest.raises(ValueError):
        PathSpec.rectangle((0, 0), 1, 1, (0, 0))
    with pytest.raises(ValueError):
        PathSpec.segment((0, 0), (1, 0)).then(PathSpec.segment((2, 0), (3, 0)))


def test_parallelism_transport_identity_frame():
    path = PathSpec.polyline([[-1, 0.5], [0.3, 0.2], [1, 1]])
    y = transport_parallelism(IDENT, path, (-0.5, -0.5))
    assert np.allclose(y, np.array([-0.5, -0.5]) + [2.0, 0.5], atol=1e-12)


def test_parallelism_transport_axb_closed_form():
    # y(t) solves dy = (y1/x1) dx along x(t) = (1 + t, 3t): y = (2 y1, y2 + 3 y1) at t = 1
    y = transport_parallelism(AXB, PathSpec.segment((1, 0), (2, 3)), (1.2, -2.0))
    assert np.allclose(y, [2.4, 1.6], atol=1e-12)


@pytest.mark.parametrize("W, plane", [(AXB, (0, 1)), (HEIS, (0, 1)), (HEIS, (1, 2))])
def test_flat_frames_close_loops(W, plane):
    base = np.asarray(W.domain.lo) + 0.3 * (np.asarray(W.domain.hi) - np.asarray(W.domain.lo))
    loop = PathSpec.rectangle(base, 0.2, 0.3, plane)
    y0 = base + 0.05
    assert np.allclose(transport_parallelism(W, loop, y0), y0, atol=1e-8)
    assert np.allclose(transport_linear(W, loop, np.eye(W.n)), np.eye(W.n), atol=1e-8)


def test_linear_transport():
    assert np.allclose(transport_linear(IDENT, PathSpec.segment((1, 0), (0, 1)), (0.3, 0.4)), [0.3, 0.4], atol=1e-15)
    path = PathSpec.segment((1, 0), (2, 0))
    # d xi1 / dt = xi1 / (1 + t), d xi2 / dt = 0
    assert np.allclose(transport_linear(AXB, path, (1.0, 0.0)), [2.0, 0.0], atol=1e-12)


def test_affine_transport_zero_gamma():
    f1 = np.array([[0.6, 0.1], [-0.2, 0.5]])
    state = AffineState(np.array([0.1, -0.2]), f1)
    path = PathSpec.polyline([[-0.5, -0.5], [0.2, -0.1], [0.4, 0.3]])
    out = transport_affine(ZERO, path, state)
    assert np.allclose(out.f0, state.f0 + f1 @ np.array([0.9, 0.8]), atol=1e-14)
    assert np.array_equal(out.f1, f1)
    d, _ = loop_once("affine", ZERO, (0.0, 0.0), (0, 1), 0.1, AffineState(np.zeros(2), np.eye(2)))
    assert np.max(np.abs(d)) <= 1e-15


def test_affine_transport_flat_loop():
    state = AffineState(np.array([0.1, 0.2]), np.array([[1.1, 0.2], [-0.1, 0.9]]))
    loop = PathSpec.rectangle((-0.3, -0.2), 0.4, 0.5, (0, 1))
    out = transport_affine(FLAT, loop, state)
    assert np.allclose(out.f0, state.f0, atol=1e-7) and np.allclose(out.f1, state.f1, atol=1e-7)


def test_riemann_transport_drift():
    q = np.array([[0.6, -0.8], [0.8, 0.6]])
    path = PathSpec.polyline([[-0.4, 0.0], [0.2, 0.1], [0.3, 0.5]])
    _, drift = transport_riemann(EUCLID, path, AffineState(np.array([0.1, 0.1]), q))
    assert drift <= 1e-10
    for M, check in ((SPHERE, lambda d: d <= 1e-8), (MISMATCH, lambda d: d >= 1e-3)):
        arrow = riemannian.metric_arrow_sampler(M, (-0.4, 0.0), (-0.3, 0.1), seed=3)
        _, drift = transport_riemann(M, PathSpec.segment((-0.4, 0.0), (0.6, 0.0)), AffineState(arrow.target, arrow.f1))
        assert check(drift)


def test_riemann_transport_rejects_non_metric_start():
    from prehomog.errors import NotMetricArrow

    with pytest.raises(NotMetricArrow):
        transport_riemann(EUCLID, PathSpec.segment((0, 0), (0.1, 0)), AffineState(np.zeros(2), 2 * np.eye(2)))


def test_domain_escape():
    with pytest.raises(DomainEscape):
        transport_parallelism(IDENT, PathSpec.segment((0, 0), (1.5, 0)), (1.0, 0.0))


def test_loop_defect_flat_and_curved():
    for kind, geom in (("linear", AXB), ("parallelism", AXB), ("affine", FLAT)):
        rep = loop_defect(kind, geom, tuple(np.add(geom.domain.lo, 0.3)), (0, 1), 0.1,
                          start=None if kind != "parallelism" else (1.0, 0.5))
        assert max(rep.defects) <= 1e-8
    rep = loop_defect("linear", PERT, (0.5, 0.5), (0, 1), 1e-2)
    assert rep.mismatch <= 0.05
    assert rep.per_area[0] == pytest.approx(rep.extrapolated_norm, rel=0.05)


def test_certify_catalog_verdicts():
    for spec in builtin_catalog():
        cert = certify_flat(build(spec), samples=12, seed=1)
        assert cert.consistent, spec.name
        assert (cert.verdict == "Flat") == spec.expected_flat, spec.name
        ev = cert.evidence
        if spec.expected_flat:
            assert max(ev.R_max, ev.lin_max) <= 1e-8, spec.name
        else:
            assert min(ev.R_max, ev.lin_max) >= 100 * cert.tol, spec.name
            assert ev.holonomy_max >= 100 * cert.holonomy_tol, spec.name
