"""Gradient and semantics checks for the autodiff engine.

Every op is checked against central finite differences; segment ops are
additionally checked against dense numpy oracles. Tolerances: 1e-6
relative for linear ops, 1e-4 for nonlinear composites, 1e-5 for batch
norm and loss heads.
"""

import numpy as np
import pytest

from helpers import fd_grad, rel_err

from ssfgnet.autodiff import (
    BatchNormState,
    Parameter,
    Tensor,
    add,
    add_scalar,
    backward,
    batch_norm,
    concat_cols,
    div,
    elementwise,
    elu,
    gather_rows,
    l1_loss,
    leaky_relu,
    matmul,
    mul,
    relu,
    scale,
    segment_reduce,
    segment_softmax,
    sigmoid,
    softmax_cross_entropy,
    sub,
    sum_all,
    tanh,
)
from ssfgnet.errors import ShapeError

RNG = np.random.default_rng(20240811)


def check_grads(build, arrays, tol, step=1e-5):
    """build(tensors...) -> scalar Tensor; arrays are the leaf values."""
    leaves = [Tensor(a) for a in arrays]
    out = build(*leaves)
    backward(out)
    got = [t.grad for t in leaves]
    want = fd_grad(lambda: float(build(*[Tensor(a) for a in arrays]).data), arrays, step)
    for g, w in zip(got, want):
        assert rel_err(g, w) < tol


# ---------------------------------------------------------------------------
# elementwise and linear ops
# ---------------------------------------------------------------------------


def test_binary_ops_equal_shapes():
    a = RNG.standard_normal((5, 3))
    b = RNG.standard_normal((5, 3)) + 2.0  # keep divisor away from 0
    for op in (add, sub, mul, div):
        check_grads(lambda x, y, op=op: sum_all(mul(op(x, y), y)), [a, b], 1e-6)


def test_rowwise_and_colwise_broadcast():
    x = RNG.standard_normal((6, 4))
    row_factors = RNG.standard_normal(6)
    col_bias = RNG.standard_normal((1, 4))
    # (n,) scales rows, (1,d) adds down columns
    out = mul(Tensor(x), Tensor(row_factors))
    assert np.allclose(out.data, row_factors[:, None] * x)
    check_grads(lambda a, b: sum_all(mul(mul(a, b), a)), [x, row_factors], 1e-6)
    check_grads(lambda a, b: sum_all(mul(add(a, b), a)), [x, col_bias], 1e-6)
    check_grads(lambda a, b: sum_all(mul(mul(a, b), a)),
                [x, RNG.standard_normal((6, 1))], 1e-6)


def test_bad_broadcast_rejected():
    with pytest.raises(ShapeError):
        add(Tensor(np.zeros((5, 3))), Tensor(np.zeros(3)))


def test_unary_ops():
    x = RNG.standard_normal((6, 3)) * 2.0
    for op in (relu, leaky_relu, elu, sigmoid, tanh):
        check_grads(lambda t, op=op: sum_all(mul(op(t), t)), [x], 1e-4)


def test_relu_derivative_at_zero_is_zero():
    t = Tensor(np.array([[0.0, -1.0, 2.0]]))
    out = sum_all(relu(t))
    backward(out)
    assert np.array_equal(t.grad, np.array([[0.0, 0.0, 1.0]]))


def test_elementwise_dispatcher():
    a = Tensor(np.array([[1.0, -1.0]]))
    b = Tensor(np.array([[2.0, 3.0]]))
    assert np.allclose(elementwise("add", a, b).data, [[3.0, 2.0]])
    assert np.allclose(elementwise("relu", a).data, [[1.0, 0.0]])


def test_scale_add_scalar_concat_matmul():
    a = RNG.standard_normal((4, 3))
    b = RNG.standard_normal((4, 2))
    w = RNG.standard_normal((3, 5))
    check_grads(lambda x: sum_all(mul(scale(x, 2.5), x)), [a], 1e-6)
    check_grads(lambda x: sum_all(mul(add_scalar(x, 1.5), x)), [a], 1e-6)
    check_grads(lambda x, y: sum_all(mul(concat_cols(x, y), concat_cols(x, y))),
                [a, b], 1e-6)
    check_grads(lambda x, y: sum_all(mul(matmul(x, y), matmul(x, y))), [a, w], 1e-5)


def test_gather_rows_scatter_backward():
    x = RNG.standard_normal((5, 3))
    idx = np.array([0, 2, 2, 4, 0, 0])
    t = Tensor(x)
    out = sum_all(gather_rows(t, idx))
    backward(out)
    counts = np.bincount(idx, minlength=5).astype(float)
    assert np.array_equal(t.grad, np.repeat(counts[:, None], 3, axis=1))
    with pytest.raises(IndexError, match=r"edge 1.*5"):
        gather_rows(Tensor(x), np.array([0, 5]))


# ---------------------------------------------------------------------------
# segment ops vs dense oracles
# ---------------------------------------------------------------------------


def _dense_segment_matrix(dst, n):
    m = np.zeros((n, dst.size))
    m[dst, np.arange(dst.size)] = 1.0
    return m


def test_segment_sum_matches_dense():
    vals = RNG.standard_normal((7, 3))
    dst = np.array([0, 1, 1, 3, 3, 3, 0])
    m = _dense_segment_matrix(dst, 4)
    out = segment_reduce(Tensor(vals), dst, 4, "sum")
    assert np.allclose(out.data, m @ vals, atol=1e-12)
    check_grads(lambda v: sum_all(mul(segment_reduce(v, dst, 4, "sum"),
                                      segment_reduce(v, dst, 4, "sum"))),
                [vals], 1e-6)


def test_segment_mean_matches_dense_and_zeros_empty():
    vals = RNG.standard_normal((6, 2))
    dst = np.array([0, 0, 2, 2, 2, 3])
    m = _dense_segment_matrix(dst, 5)
    counts = m.sum(axis=1, keepdims=True)
    dense = np.divide(m @ vals, counts, out=np.zeros((5, 2)), where=counts > 0)
    out = segment_reduce(Tensor(vals), dst, 5, "mean")
    assert np.allclose(out.data, dense, atol=1e-12)
    assert np.array_equal(out.data[1], np.zeros(2))  # empty segment stays zero
    assert np.array_equal(out.data[4], np.zeros(2))
    check_grads(lambda v: sum_all(mul(segment_reduce(v, dst, 5, "mean"),
                                      segment_reduce(v, dst, 5, "mean"))),
                [vals], 1e-6)


def test_segment_softmax_matches_dense():
    scores = RNG.standard_normal((8, 1)) * 3.0
    dst = np.array([0, 0, 0, 1, 1, 2, 2, 2])
    out = segment_softmax(Tensor(scores), dst, 3)
    for seg in range(3):
        rows = out.data[dst == seg, 0]
        e = np.exp(scores[dst == seg, 0] - scores[dst == seg, 0].max())
        assert np.allclose(rows, e / e.sum(), atol=1e-12)
        assert abs(rows.sum() - 1.0) < 1e-12
    check_grads(lambda s: sum_all(mul(segment_softmax(s, dst, 3), s)), [scores], 1e-4)


def test_segment_softmax_extreme_scores_stable():
    scores = Tensor(np.array([[1000.0], [1001.0], [-1000.0]]))
    out = segment_softmax(scores, np.array([0, 0, 1]), 2)
    assert np.isfinite(out.data).all()
    assert abs(out.data[:2, 0].sum() - 1.0) < 1e-12
    assert out.data[2, 0] == 1.0


# ---------------------------------------------------------------------------
# batch norm
# ---------------------------------------------------------------------------


def test_batch_norm_train_normalizes_and_updates_running():
    x = RNG.standard_normal((20, 4)) * 3.0 + 1.0
    gamma = Parameter(np.ones(4))
    beta = Parameter(np.zeros(4))
    state = BatchNormState(4)
    out = batch_norm(Tensor(x), gamma, beta, state, "train")
    assert np.allclose(out.data.mean(axis=0), 0.0, atol=1e-10)
    assert np.allclose(out.data.var(axis=0), 1.0, atol=1e-4)
    assert np.allclose(state.running_mean, 0.1 * x.mean(axis=0), atol=1e-12)
    n = x.shape[0]
    assert np.allclose(state.running_var,
                       0.9 * 1.0 + 0.1 * x.var(axis=0) * n / (n - 1), atol=1e-12)


def test_batch_norm_eval_uses_running_stats():
    x = RNG.standard_normal((6, 3))
    gamma = Parameter(np.full(3, 2.0))
    beta = Parameter(np.full(3, -1.0))
    state = BatchNormState(3)
    state.running_mean = np.array([1.0, 2.0, 3.0])
    state.running_var = np.array([4.0, 4.0, 4.0])
    out = batch_norm(Tensor(x), gamma, beta, state, "eval")
    want = 2.0 * (x - state.running_mean) / np.sqrt(4.0 + state.eps) - 1.0
    assert np.allclose(out.data, want, atol=1e-12)


def test_batch_norm_gradcheck():
    x = RNG.standard_normal((8, 3))
    gamma_v = RNG.standard_normal(3) + 1.5
    beta_v = RNG.standard_normal(3)

    def run(phase):
        def f():
            state = BatchNormState(3)
            state.running_mean = np.full(3, 0.3)
            state.running_var = np.full(3, 1.7)
            t, gm, bt = Tensor(x), Parameter(gamma_v), Parameter(beta_v)
            out = batch_norm(t, gm, bt, state, phase)
            return t, gm, bt, sum_all(mul(out, out))
        t, gm, bt, out = f()
        backward(out)
        want = fd_grad(lambda: float(f()[3].data), [x, gamma_v, beta_v])
        for got, w in zip((t.grad, gm.grad, bt.grad), want):
            assert rel_err(got, w) < 1e-5

    run("train")
    run("eval")


def test_batch_norm_train_needs_two_rows():
    state = BatchNormState(2)
    with pytest.raises(ValueError, match="at least 2 rows"):
        batch_norm(Tensor(np.ones((1, 2))), Parameter(np.ones(2)),
                   Parameter(np.zeros(2)), state, "train")


# ---------------------------------------------------------------------------
# loss heads
# ---------------------------------------------------------------------------


def test_cross_entropy_uniform_logits():
    k = 7
    out = softmax_cross_entropy(Tensor(np.zeros((5, k))), np.zeros(5, dtype=int))
    assert abs(float(out.data) - np.log(k)) < 1e-12


def test_cross_entropy_gradcheck_weighted():
    logits = RNG.standard_normal((6, 4))
    labels = np.array([0, 1, 2, 3, 1, 2])
    w = np.array([2.0, 1.0, 0.5, 1.5])

    def build(t):
        return softmax_cross_entropy(t, labels, w)

    t = Tensor(logits)
    backward(build(t))
    want = fd_grad(lambda: float(build(Tensor(logits)).data), [logits])
    assert rel_err(t.grad, want[0]) < 1e-5


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError, match="label 4"):
        softmax_cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 4]))


def test_l1_loss_value_and_grad():
    pred = RNG.standard_normal((5, 1))
    target = RNG.standard_normal((5, 1))
    t = Tensor(pred)
    out = l1_loss(t, target)
    assert abs(float(out.data) - np.abs(pred - target).mean()) < 1e-12
    backward(out)
    assert np.array_equal(t.grad, np.sign(pred - target) / pred.size)


# ---------------------------------------------------------------------------
# tape semantics
# ---------------------------------------------------------------------------


def test_backward_twice_doubles_gradients():
    x = RNG.standard_normal((4, 3))
    t = Tensor(x)
    w = Tensor(RNG.standard_normal((3, 2)))
    out = sum_all(mul(matmul(t, w), matmul(t, w)))
    backward(out)
    first = t.grad.copy()
    backward(out)
    assert np.array_equal(t.grad, 2.0 * first)


def test_diamond_reuse_accumulates_once_per_pass():
    t = Tensor(np.array([[2.0]]))
    y = mul(t, t)  # t used twice
    out = sum_all(y)
    backward(out)
    assert np.allclose(t.grad, [[4.0]])


def test_backward_requires_scalar_root():
    with pytest.raises(ValueError, match="scalar"):
        backward(Tensor(np.zeros((2, 2))))


def test_composite_two_layer_mlp_gradcheck():
    x = RNG.standard_normal((6, 5))
    w1 = RNG.standard_normal((5, 4)) * 0.5
    w2 = RNG.standard_normal((4, 2)) * 0.5
    labels = np.array([0, 1, 0, 1, 1, 0])

    def build(tx, tw1, tw2):
        h = elu(matmul(tx, tw1))
        return softmax_cross_entropy(matmul(h, tw2), labels)

    leaves = [Tensor(x), Tensor(w1), Tensor(w2)]
    backward(build(*leaves))
    want = fd_grad(lambda: float(build(Tensor(x), Tensor(w1), Tensor(w2)).data),
                   [x, w1, w2])
    for leaf, w in zip(leaves, want):
        assert rel_err(leaf.grad, w) < 1e-4
