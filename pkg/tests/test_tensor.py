import numpy as np
import pytest

from groupcontrast import tensor as T
from groupcontrast.tensor import (ContractError, DimensionError, NumericError,
                                  Tape, Tensor, backward, primitive_forward)


def leaf_pair(shape_a, shape_b, seed=0):
    rng = np.random.default_rng(seed)
    tape = Tape()
    a = tape.leaf(rng.standard_normal(shape_a))
    b = tape.leaf(rng.standard_normal(shape_b))
    return tape, a, b


def test_tensor_rejects_non_finite():
    with pytest.raises(NumericError):
        Tensor([1.0, np.inf])
    with pytest.raises(NumericError):
        Tensor(np.nan)


def test_constants_carry_no_tape():
    t = Tensor([[1.0, 2.0]])
    assert t.tape is None and t.node_id is None


def test_matmul_forward_and_grad():
    tape, a, b = leaf_pair((3, 4), (4, 2))
    out = T.matmul(a, b)
    assert np.allclose(out.values, a.values @ b.values)
    loss = T.tsum(out)
    grads = backward(tape, loss)
    ones = np.ones((3, 2))
    assert np.allclose(grads[a.node_id], ones @ b.values.T)
    assert np.allclose(grads[b.node_id], a.values.T @ ones)


def test_matmul_shape_error():
    with pytest.raises(DimensionError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(DimensionError):
        T.matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))


def test_add_broadcast_unbroadcasts_gradient():
    tape = Tape()
    a = tape.leaf(np.arange(6.0).reshape(2, 3))
    b = tape.leaf(np.ones(3))
    loss = T.tsum(T.add(a, b))
    grads = backward(tape, loss)
    assert grads[a.node_id].shape == (2, 3)
    assert grads[b.node_id].shape == (3,)
    assert np.allclose(grads[b.node_id], 2.0)


def test_mul_gradients_swap_operands():
    tape, a, b = leaf_pair((2, 2), (2, 2))
    loss = T.tsum(T.mul(a, b))
    grads = backward(tape, loss)
    assert np.allclose(grads[a.node_id], b.values)
    assert np.allclose(grads[b.node_id], a.values)


def test_sub_neg_square_smul():
    tape = Tape()
    a = tape.leaf(np.array([2.0, -3.0]))
    loss = T.tsum(T.square(T.sub(T.smul(a, 2.0), Tensor([1.0, 1.0]))))
    # d/da sum((2a - 1)^2) = 2(2a - 1) * 2
    grads = backward(tape, loss)
    assert np.allclose(grads[a.node_id], 4.0 * (2.0 * a.values - 1.0))


def test_relu_masks_gradient():
    tape = Tape()
    a = tape.leaf(np.array([-1.0, 0.0, 2.0]))
    grads = backward(tape, T.tsum(T.relu(a)))
    assert np.allclose(grads[a.node_id], [0.0, 0.0, 1.0])


def test_softplus_stable_at_large_inputs():
    out = T.softplus(Tensor([-800.0, 0.0, 800.0]))
    assert np.allclose(out.values, [0.0, np.log(2.0), 800.0])
    assert np.all(np.isfinite(out.values))


def test_exp_log_inverse_and_log_domain():
    x = np.array([0.5, 1.5])
    assert np.allclose(T.log(T.exp(Tensor(x))).values, x)
    with pytest.raises(NumericError):
        T.log(Tensor([1.0, 0.0]))


def test_sum_mean_axes():
    x = np.arange(12.0).reshape(3, 4)
    assert np.allclose(T.tsum(Tensor(x), axis=0).values, x.sum(axis=0))
    assert np.allclose(T.tmean(Tensor(x), axis=1, keepdims=True).values,
                       x.mean(axis=1, keepdims=True))
    tape = Tape()
    a = tape.leaf(x)
    grads = backward(tape, T.tmean(a))
    assert np.allclose(grads[a.node_id], 1.0 / 12.0)


def test_transpose_grad():
    tape = Tape()
    a = tape.leaf(np.arange(6.0).reshape(2, 3))
    w = np.arange(6.0).reshape(3, 2)
    loss = T.tsum(T.mul(T.transpose(a), Tensor(w)))
    grads = backward(tape, loss)
    assert np.allclose(grads[a.node_id], w.T)


def test_concat_slice_roundtrip():
    tape = Tape()
    a = tape.leaf(np.ones((2, 3)))
    b = tape.leaf(2 * np.ones((2, 2)))
    cat = T.concat([a, b], axis=1)
    assert cat.shape == (2, 5)
    back = T.slice_cols(cat, 3, 5)
    assert np.allclose(back.values, b.values)
    grads = backward(tape, T.tsum(back))
    assert np.allclose(grads[a.node_id], 0.0)
    assert np.allclose(grads[b.node_id], 1.0)


def test_row_softmax_rows_sum_to_one():
    out = T.row_softmax(Tensor(np.random.default_rng(1).standard_normal((5, 4))))
    assert np.allclose(out.values.sum(axis=1), 1.0)


def test_segment_softmax_columns_sum_per_segment():
    x = np.random.default_rng(2).standard_normal((7, 3))
    segments = [(0, 3), (3, 7)]
    out = T.segment_softmax(Tensor(x), segments)
    for lo, hi in segments:
        assert np.allclose(out.values[lo:hi].sum(axis=0), 1.0)
    with pytest.raises(DimensionError):
        T.segment_softmax(Tensor(x), [(0, 0)])


def test_segment_softmax_matches_shifted_exp():
    x = np.random.default_rng(3).standard_normal((4, 2))
    out = T.segment_softmax(Tensor(x), [(0, 4)])
    e = np.exp(x - x.max(axis=0))
    assert np.allclose(out.values, e / e.sum(axis=0), atol=1e-12)


def test_row_l2_normalize_unit_norms_and_zero_row():
    x = np.random.default_rng(4).standard_normal((6, 5))
    out = T.row_l2_normalize(Tensor(x))
    assert np.allclose(np.linalg.norm(out.values, axis=1), 1.0)
    with pytest.raises(NumericError):
        T.row_l2_normalize(Tensor(np.zeros((1, 3))))


def test_backward_requires_scalar_loss():
    tape = Tape()
    a = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ContractError):
        backward(tape, T.relu(a))


def test_backward_zero_for_unused_leaf():
    tape = Tape()
    a = tape.leaf(np.ones(3))
    b = tape.leaf(np.ones(3))
    grads = backward(tape, T.tsum(a))
    assert np.allclose(grads[b.node_id], 0.0)


def test_mixed_tapes_rejected():
    t1, t2 = Tape(), Tape()
    a = t1.leaf(np.ones(2))
    b = t2.leaf(np.ones(2))
    with pytest.raises(ContractError):
        T.add(a, b)


def test_fanout_accumulates():
    tape = Tape()
    a = tape.leaf(np.array([3.0]))
    loss = T.tsum(T.add(a, T.smul(a, 2.0)))
    grads = backward(tape, loss)
    assert np.allclose(grads[a.node_id], 3.0)


def test_primitive_forward_dispatch():
    out = primitive_forward("add", [Tensor([1.0]), Tensor([2.0])])
    assert out.values[0] == 3.0
    out = primitive_forward("concat-along-axis", [Tensor([1.0]), Tensor([2.0])], axis=0)
    assert out.shape == (2,)
    with pytest.raises(ContractError):
        primitive_forward("does-not-exist", [Tensor([1.0])])
