import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prehomog import ad
from prehomog.chart import (
    Box,
    ExprArray,
    JetVector,
    OneArrow,
    TensorBlock,
    TensorField,
    TwoArrow,
    eval_jet,
    fd_jet,
    field_from_exprs,
    formal_lie_derivative,
    lie_derivative_11_closed,
    pushforward_jet2form,
    pushforward_tensor,
)
from prehomog.errors import DomainError, OrderError, SingularArrow, SymmetryError
from prehomog.sampling import orthogonal


def random_matrix(rng, n):
    return orthogonal(n, rng) @ np.diag(rng.uniform(0.6, 1.6, n))


# --- jets -----------------------------------------------------------------


def test_eval_jet_identity_coordinate():
    j = eval_jet("x1", (3, 4), 1)
    assert j.value == 3
    assert np.array_equal(j.gradient, [1, 0])


def test_eval_jet_bilinear():
    j = eval_jet("x1*x2", (2, 5), 2)
    assert j.value == 10
    assert np.array_equal(j.gradient, [5, 2])
    assert np.array_equal(j.hessian, [[0, 1], [1, 0]])


def test_eval_jet_against_fd_tight():
    exact = eval_jet("sin(x1)^2", (0.7, 0.0), 1).gradient[0]
    assert exact == pytest.approx(2 * math.sin(0.7) * math.cos(0.7), rel=1e-15)
    approx = fd_jet("sin(x1)^2", (0.7, 0.0), 1, step=1e-5).gradient[0]
    assert approx == pytest.approx(exact, rel=1e-9)


def test_fd_jet_examples():
    assert np.allclose(fd_jet("x1", (0.3, -1.2), 1, 1e-4).gradient, [1, 0], atol=1e-10)
    j = fd_jet("5", (0.3, -1.2), 2, 1e-4)
    assert np.all(j.gradient == 0) and np.all(j.hessian == 0)
    assert fd_jet("exp(x1)", (0, 0), 1, 1e-4).gradient[0] == pytest.approx(1.0, abs=1e-8)


def test_jet_order_and_domain_checks():
    box = Box((-1, -1), (1, 1))
    with pytest.raises(OrderError):
        eval_jet("x1", (0, 0), 3)
    with pytest.raises(DomainError):
        eval_jet("x1", (1.0, 0.0), 1, domain=box)
    with pytest.raises(DomainError):
        fd_jet("x1", (1.0 - 5e-5, 0.0), 1, 1e-4, domain=box)
    with pytest.raises(ValueError):
        fd_jet("x1", (0, 0), 1, 0.0)


def test_box_margin():
    box = Box((0, 0), (1, 1))
    assert box.contains((1 - 2e-9, 0.5))
    assert not box.contains((1 - 5e-10, 0.5))
    with pytest.raises(ValueError):
        Box((0,), (0,))


def test_expr_array_aliases_share_values():
    arr = ExprArray((2, 2), {(0, 1): "x1*x2", (1, 1): "1"}, {(1, 0): (0, 1)})
    v = arr(np.array([2.0, 3.0]))
    assert np.array_equal(v, [[0, 6], [6, 1]])
    d = ad.derivative(arr, np.array([2.0, 3.0]), np.array([1.0, 0.0]))
    assert np.array_equal(d, [[0, 3], [3, 0]])


# --- blocks and arrows ----------------------------------------------------


def test_tensor_block_symmetry_is_exact():
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    TensorBlock(("l", "l"), a, ((0, 1),))
    with pytest.raises(SymmetryError):
        TensorBlock(("l", "l"), a + 1e-15 * np.eye(2) + np.array([[0, 0], [1e-16, 0]]), ((0, 1),))
    with pytest.raises(SymmetryError):
        TensorBlock(("l", "l"), a, (), ((0, 1),))
    blk = TensorBlock.project(("l", "l"), [[1.0, 2.0], [0.0, 3.0]], ((0, 1),))
    assert np.array_equal(blk.components, [[0, 1], [-1, 0]])
    with pytest.raises(ValueError):
        blk.components[0, 0] = 5.0


def test_tensor_block_shape_validation():
    with pytest.raises(ValueError):
        TensorBlock(("u",), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        TensorBlock(("u", "q"), np.zeros((2, 2)))


def test_singular_arrow():
    with pytest.raises(SingularArrow):
        OneArrow((0, 0), (1, 1), [[1, 2], [2, 4]])
    with pytest.raises(SingularArrow):
        OneArrow((0, 0), (1, 1), [[1e-7, 0], [0, 1e-7]])


def test_two_arrow_needs_symmetric_f2():
    f2 = np.zeros((2, 2, 2))
    f2[0, 0, 1] = 1.0
    with pytest.raises(SymmetryError):
        TwoArrow((0, 0), (0, 0), np.eye(2), f2)


def test_jet_vector_rules():
    assert JetVector.zero(3, 1).order == 1
    with pytest.raises(OrderError):
        JetVector([0, 0], None, np.zeros((2, 2, 2)))
    bad = np.zeros((2, 2, 2))
    bad[1, 0, 1] = 1.0
    with pytest.raises(SymmetryError):
        JetVector([0, 0], np.eye(2), bad)
    s = JetVector([1, 2], np.eye(2)) + 2 * JetVector([1, 0], np.ones((2, 2)))
    assert np.array_equal(s.xi0, [3, 2]) and np.array_equal(s.xi1, [[3, 2], [2, 3]])


def test_pushforward_examples():
    rng = np.random.default_rng(1)
    t = TensorBlock(("u", "l", "l"), rng.standard_normal((2, 2, 2)))
    assert np.array_equal(pushforward_tensor(OneArrow.identity((0.1, 0.2)), t).components, t.components)
    scalar = TensorBlock((), 4.5)
    assert pushforward_tensor(OneArrow((0, 0), (1, 1), random_matrix(rng, 2)), scalar) is scalar
    a = OneArrow((0, 0), (1, 0), np.diag([2.0, 1.0]))
    out = pushforward_tensor(a, TensorBlock(("u", "l"), [[0, 1], [0, 0]]))
    assert np.array_equal(out.components, [[0, 2], [0, 0]])


def test_inert_slot_is_not_transformed():
    f1 = np.diag([2.0, 3.0])
    t = TensorBlock(("u", "-"), np.eye(2))
    out = pushforward_tensor(OneArrow((0, 0), (0, 0), f1), t)
    assert np.array_equal(out.components, f1)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.sampled_from(["u", "l"]), st.sampled_from(["u", "l"]))
def test_pushforward_composition(n, seed, v1, v2):
    rng = np.random.default_rng(seed)
    a1 = OneArrow(np.zeros(n), np.ones(n), random_matrix(rng, n))
    a2 = OneArrow(np.ones(n), 2 * np.ones(n), random_matrix(rng, n))
    t = TensorBlock((v1, v2, "l"), rng.standard_normal((n, n, n)))
    direct = pushforward_tensor(a2.compose(a1), t).components
    stepwise = pushforward_tensor(a2, pushforward_tensor(a1, t)).components
    assert np.allclose(direct, stepwise, rtol=0, atol=1e-12)


# --- J1(T)-valued forms ---------------------------------------------------


def _push_j1(f1, f2, v, V):
    """Transport one J1(T) element ``(v, V)`` written out index by index."""
    n = len(v)
    g = np.linalg.inv(f1)
    v2 = np.zeros(n)
    V2 = np.zeros((n, n))
    for i in range(n):
        for a in range(n):
            v2[i] += f1[i, a] * v[a]
    for i in range(n):
        for k in range(n):
            for b in range(n):
                acc = 0.0
                for a in range(n):
                    acc += f2[i, a, b] * v[a] + f1[i, a] * V[a, b]
                V2[i, k] += acc * g[b, k]
    return v2, V2


def _brute_jet2form(f1, f2, rho, sigma):
    """Transport basis elements one at a time, then rotate the form slots."""
    n = f1.shape[0]
    g = np.linalg.inv(f1)
    rho_v = np.zeros_like(rho)
    sig_v = np.zeros_like(sigma)
    for r in range(n):
        for j in range(n):
            rho_v[:, r, j], sig_v[:, r, j, :] = _push_j1(f1, f2, rho[:, r, j], sigma[:, r, j, :])
    rho_out = np.einsum("iab,ar,bj->irj", rho_v, g, g)
    sig_out = np.einsum("iabk,ar,bj->irjk", sig_v, g, g)
    return rho_out, sig_out


def _random_form(rng, n):
    rho = rng.standard_normal((n, n, n))
    sigma = rng.standard_normal((n, n, n, n))
    rho = TensorBlock.project(("u", "l", "l"), rho, ((1, 2),))
    sigma = TensorBlock.project(("u", "l", "l", "l"), sigma, ((1, 2),))
    return rho, sigma


def _random_two_arrow(rng, n):
    f2 = rng.standard_normal((n, n, n))
    return TwoArrow(np.zeros(n), np.ones(n), random_matrix(rng, n), 0.5 * (f2 + np.swapaxes(f2, 1, 2)))


def test_jet2form_identity():
    rng = np.random.default_rng(3)
    rho, sigma = _random_form(rng, 2)
    out = pushforward_jet2form(TwoArrow((0, 0), (0, 0), np.eye(2), np.zeros((2, 2, 2))), rho, sigma)
    assert np.allclose(out[0].components, rho.components, atol=1e-15)
    assert np.allclose(out[1].components, sigma.components, atol=1e-15)


def test_jet2form_with_zero_rho_is_tensorial():
    rng = np.random.default_rng(4)
    _, sigma = _random_form(rng, 2)
    rho = TensorBlock(("u", "l", "l"), np.zeros((2, 2, 2)), ((1, 2),))
    arrow = _random_two_arrow(rng, 2)
    _, s = pushforward_jet2form(arrow, rho, sigma)
    assert np.allclose(s.components, pushforward_tensor(arrow.one_arrow, sigma).components, atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_jet2form_matches_basis_transport(seed):
    rng = np.random.default_rng(seed)
    rho, sigma = _random_form(rng, 2)
    arrow = _random_two_arrow(rng, 2)
    r, s = pushforward_jet2form(arrow, rho, sigma)
    rb, sb = _brute_jet2form(arrow.f1, arrow.f2, rho.components, sigma.components)
    assert np.allclose(r.components, rb, atol=1e-12)
    assert np.allclose(s.components, sb, atol=1e-12)


# --- Lie derivatives --------------------------------------------------------

ALPHA = field_from_exprs([["x1*x2", "sin(x2)"], ["exp(x1)", "1 + x2^2"]], ("u", "l"))
XI0 = ExprArray((2,), {(0,): "sin(x2)", (1,): "x1*x2 + 0.5"})


def xi_jet(x):
    x = np.asarray(x, dtype=float)
    return JetVector(XI0(x), np.asarray(ad.jacobian(XI0, x)))


def test_prolonged_jet_gives_ordinary_lie_derivative():
    x = np.array([0.4, -0.3])
    jet = xi_jet(x)
    formal = formal_lie_derivative(jet, ALPHA, x).components
    closed = lie_derivative_11_closed(jet, ALPHA, x).components
    assert np.allclose(formal, closed, atol=1e-12)


def _flow(x, t, step=1e-4):
    """Euler flow of ``XI0`` together with its Jacobian."""
    y, J = np.array(x, dtype=float), np.eye(2)
    for _ in range(int(round(t / step))):
        D = np.asarray(ad.jacobian(XI0, y))
        y, J = y + step * XI0(y), J + step * D @ J
    return y, J


def test_closed_form_matches_flow_lie_derivative():
    x = np.array([0.4, -0.3])
    closed = lie_derivative_11_closed(xi_jet(x), ALPHA, x).components
    errs = []
    for t in (2e-3, 1e-3):
        y, J = _flow(x, t)
        pulled = np.linalg.inv(J) @ ALPHA(y) @ J
        errs.append(np.max(np.abs((pulled - ALPHA(x)) / t - closed)))
    # first-order agreement: error shrinks proportionally with t
    assert errs[1] < 5e-3
    assert 1.6 < errs[0] / errs[1] < 2.4


def test_lie_derivative_trivial_cases():
    x = np.array([0.1, 0.2])
    zero = JetVector.zero(2, 1)
    assert np.all(formal_lie_derivative(zero, ALPHA, x).components == 0)
    assert np.all(lie_derivative_11_closed(zero, ALPHA, x).components == 0)
    const = TensorField(lambda p: 3.0, ())
    assert formal_lie_derivative(JetVector([1.0, 2.0]), const, x).components == 0
    ident = TensorField(lambda p: np.eye(2), ("u", "l"))
    jet = JetVector([1.0, -1.0], [[0.3, 2.0], [-1.0, 0.7]])
    assert np.allclose(lie_derivative_11_closed(jet, ident, x).components, 0, atol=1e-15)
    assert np.allclose(formal_lie_derivative(jet, ident, x).components, 0, atol=1e-15)


def test_lie_derivative_order_errors():
    with pytest.raises(OrderError):
        formal_lie_derivative(JetVector([1.0, 0.0]), ALPHA, (0.1, 0.1))
    with pytest.raises(OrderError):
        lie_derivative_11_closed(JetVector([1.0, 0.0]), ALPHA, (0.1, 0.1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_formal_lie_derivative_is_linear_in_jet(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 2)
    j1 = JetVector(rng.standard_normal(2), rng.standard_normal((2, 2)))
    j2 = JetVector(rng.standard_normal(2), rng.standard_normal((2, 2)))
    a, b = rng.uniform(-3, 3, 2)
    lhs = formal_lie_derivative(a * j1 + b * j2, ALPHA, x).components
    rhs = a * formal_lie_derivative(j1, ALPHA, x).components + b * formal_lie_derivative(j2, ALPHA, x).components
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-10)
