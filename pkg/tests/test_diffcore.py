import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from uwbnet.diffcore import (
    ShapeError,
    Tape,
    Tensor,
    backward,
    finite_diff_check,
    grad,
    no_grad,
    p_norm_rows,
    pairwise_p_distance,
    reduce,
    softplus,
    tensor_binary,
    tensor_unary,
    zero_grad,
)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def test_add_and_matmul_examples():
    np.testing.assert_array_equal(tensor_binary("add", Tensor([[1, 2]]), Tensor([[3, 4]])).data, [[4, 6]])
    m = Tensor([[5, 6], [7, 8]])
    np.testing.assert_array_equal(tensor_binary("matmul", Tensor(np.eye(2)), m).data, m.data)


@pytest.mark.parametrize("kind", ["add", "sub", "hadamard"])
def test_shape_mismatch_names_both_shapes(kind):
    with pytest.raises(ShapeError) as exc:
        tensor_binary(kind, Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
    msg = str(exc.value)
    assert kind in msg and "(2, 3)" in msg and "(3, 2)" in msg


def test_matmul_mismatch():
    with pytest.raises(ShapeError, match="matmul"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_row_broadcast_gradient_sums_over_batch(rng):
    a = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal((1, 3)), requires_grad=True)
    backward((a + b).sum())
    np.testing.assert_array_equal(b.grad, np.full((1, 3), 4.0))


def test_hadamard_gradient_equals_other_operand(rng):
    a0, b0 = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    a = Tensor(a0, requires_grad=True)
    backward((a * Tensor(b0)).sum())
    np.testing.assert_allclose(a.grad, b0, rtol=0, atol=0)
    assert finite_diff_check(lambda t: (t * Tensor(b0)).sum(), a0) < 1e-6


def test_unary_examples():
    assert tensor_unary("exp", Tensor([[0.0]])).item() == 1.0
    assert tensor_unary("power", Tensor([[2.0]]), 4).item() == 16.0
    assert tensor_unary("scale", Tensor([[2.0]]), 3).item() == 6.0
    assert tensor_unary("negate", Tensor([[2.0]])).item() == -2.0


def test_exp_derivative_at_one():
    x = Tensor([[1.0]], requires_grad=True)
    (g,) = grad(tensor_unary("exp", x).sum(), [x])
    assert g[0, 0] == pytest.approx(math.e, rel=1e-15)
    assert finite_diff_check(lambda t: t.exp().sum(), [[1.0]]) < 1e-8


def test_fractional_power_of_negative_base_is_a_domain_error():
    with pytest.raises(ValueError, match="negative base"):
        tensor_unary("power", Tensor([[-1.0]]), 0.5)


def test_reductions():
    a = Tensor([[2, 4], [6, 8]])
    assert reduce("mean", a).item() == 5.0
    np.testing.assert_array_equal(reduce("sum_rows", Tensor([[1, 2], [3, 4]])).data, [[3], [7]])
    assert reduce("sum", a).shape == (1, 1)


def test_mean_gradient_is_uniform(rng):
    x = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
    backward(x.mean())
    np.testing.assert_allclose(x.grad, np.full((3, 5), 1 / 15))


def test_p_norm_examples():
    assert p_norm_rows(Tensor([[3.0, 4.0]]), 2).item() == pytest.approx(5.0)
    assert p_norm_rows(Tensor([[1.0, 1.0, 1.0, 1.0]]), 4).item() == pytest.approx(4 ** 0.25, abs=1e-12)
    x = Tensor([[3.0, 4.0]], requires_grad=True)
    backward(p_norm_rows(x, 2).sum())
    np.testing.assert_allclose(x.grad, [[0.6, 0.8]], atol=1e-15)
    assert finite_diff_check(lambda t: p_norm_rows(t, 2).sum(), [[3.0, 4.0]]) < 1e-8


def test_p_norm_zero_row_has_zero_gradient():
    x = Tensor(np.zeros((1, 3)), requires_grad=True)
    backward(p_norm_rows(x, 4).sum())
    np.testing.assert_array_equal(x.grad, np.zeros((1, 3)))


def test_p_norm_rejects_other_orders():
    with pytest.raises(ValueError):
        p_norm_rows(Tensor([[1.0]]), 3)


@pytest.mark.parametrize("p", [2, 4])
def test_pairwise_distance_matches_row_norms(rng, p):
    x, c = rng.standard_normal((5, 7)), rng.standard_normal((3, 7))
    d = pairwise_p_distance(Tensor(x), Tensor(c), p).data
    for b in range(5):
        for u in range(3):
            assert d[b, u] == pytest.approx(np.sum(np.abs(x[b] - c[u]) ** p) ** (1 / p), rel=1e-13)


@pytest.mark.parametrize("p", [2, 4])
def test_pairwise_distance_gradients(rng, p):
    x0, c0 = rng.standard_normal((4, 6)), rng.standard_normal((3, 6))
    w = rng.standard_normal((4, 3))
    assert finite_diff_check(lambda t: (pairwise_p_distance(t, Tensor(c0), p) * Tensor(w)).sum(), x0) < 1e-6
    assert finite_diff_check(lambda t: (pairwise_p_distance(Tensor(x0), t, p) * Tensor(w)).sum(), c0) < 1e-6


def test_backward_of_sum_is_ones(rng):
    x = Tensor(rng.standard_normal((2, 5)), requires_grad=True)
    backward(x.sum())
    np.testing.assert_array_equal(x.grad, np.ones((2, 5)))


def test_backward_of_mse_is_hand_derivative(rng):
    x0, c0 = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    x = Tensor(x0, requires_grad=True)
    d = x - Tensor(c0)
    backward((d * d).mean())
    np.testing.assert_allclose(x.grad, 2 * (x0 - c0) / 12, atol=1e-15)
    assert finite_diff_check(lambda t: ((t - Tensor(c0)) * (t - Tensor(c0))).mean(), x0) < 1e-8


def test_two_backward_calls_accumulate_exactly(rng):
    x = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
    loss = (x * x).sum()
    backward(loss)
    once = x.grad.copy()
    backward(loss)
    np.testing.assert_array_equal(x.grad, 2 * once)


def test_backward_rejects_non_scalar(rng):
    x = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(x * x)


def test_grad_leaves_dot_grad_untouched(rng):
    x = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
    w = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
    (gx,) = grad((x @ w).sum(), [x])
    assert x.grad is None and w.grad is None
    np.testing.assert_allclose(gx, np.ones((2, 2)) @ w.data.T)


def test_tape_is_topological(rng):
    x = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    y = x * x
    z = (y + x).exp().sum() + y.sum()
    tape = Tape.record(z)
    pos = {id(n): i for i, n in enumerate(tape.nodes)}
    assert len(pos) == len(tape.nodes)
    for node in tape.nodes:
        for parent in node._parents:
            assert pos[id(parent)] < pos[id(node)]


def test_no_grad_records_nothing(rng):
    x = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    with no_grad():
        y = (x * x).sum()
    assert not y.on_tape


def test_finite_diff_check_self_test(rng):
    assert finite_diff_check(lambda t: (t * t).sum(), rng.standard_normal((3, 4))) < 1e-6
    assert finite_diff_check(lambda t: Tensor([[3.0]]), rng.standard_normal((2, 2))) == 0.0


def test_softplus_gradient(rng):
    assert finite_diff_check(lambda t: softplus(t).sum(), rng.standard_normal((3, 3)) * 3) < 1e-8


def test_backward_is_deterministic_and_replayable(rng):
    x0, w0 = rng.standard_normal((5, 4)), rng.standard_normal((4, 3))
    w = Tensor(w0, requires_grad=True)

    def run():
        zero_grad([w])
        backward(p_norm_rows(Tensor(x0) @ w, 4).exp().mean())
        return w.grad.copy()

    first, second = run(), run()
    assert first.tobytes() == second.tobytes()


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, (4, 2), elements=finite))
def test_matmul_gradient_property(a0, b0):
    assert finite_diff_check(lambda t: ((t @ Tensor(b0)) * (t @ Tensor(b0))).mean(), a0) < 1e-5
    assert finite_diff_check(lambda t: ((Tensor(a0) @ t) * (Tensor(a0) @ t)).mean(), b0) < 1e-5


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 3), elements=finite))
def test_outputs_stay_finite(a0):
    x = Tensor(a0, requires_grad=True)
    out = p_norm_rows(x, 4) + softplus(x).sum() + (x * x).mean()
    backward(out.sum())
    assert np.all(np.isfinite(out.data)) and np.all(np.isfinite(x.grad))
