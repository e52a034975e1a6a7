"""Primitive op tests: values against hand oracles, gradients against finite differences."""

import math

import numpy as np
import pytest

from distrank.nn import (
    LossOutput,
    conv2d,
    conv2d_backward,
    conv_output_size,
    fully_connected,
    fully_connected_backward,
    global_avg_pool,
    global_avg_pool_backward,
    relu,
    relu_backward,
    softmax_cross_entropy,
)

from _gradcheck import numeric_grad, rel_error


# ---------------------------------------------------------------------------
# conv2d values
# ---------------------------------------------------------------------------


def test_conv_identity_one_by_one():
    rng = np.random.default_rng(1)
    x = rng.random((2, 3, 4, 4))
    w = np.zeros((3, 3, 1, 1))
    for i in range(3):
        w[i, i, 0, 0] = 1.0
    out, _ = conv2d(x, w, np.zeros(3))
    assert np.allclose(out, x, atol=1e-12)


def test_conv_hand_dot_product():
    x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
    w = np.array([[1.0, 0.0], [0.0, 1.0]]).reshape(1, 1, 2, 2)
    out, _ = conv2d(x, w, np.zeros(1))
    assert out.shape == (1, 1, 1, 1)
    assert out[0, 0, 0, 0] == 5.0


def test_conv_output_size_formula():
    assert conv_output_size(7, 3, 2, 1) == 4
    assert conv_output_size(64, 3, 1, 1) == 64
    assert conv_output_size(5, 2, 1, 0) == 4
    rng = np.random.default_rng(2)
    x = rng.random((1, 2, 7, 9))
    w = rng.random((3, 2, 3, 3))
    out, _ = conv2d(x, w, np.zeros(3), stride=2, padding=1)
    assert out.shape == (1, 3, 4, 5)


def test_conv_bias_added_per_filter():
    x = np.zeros((1, 1, 3, 3))
    w = np.zeros((2, 1, 1, 1))
    out, _ = conv2d(x, w, np.array([1.5, -0.5]))
    assert np.all(out[0, 0] == 1.5)
    assert np.all(out[0, 1] == -0.5)


def test_conv_rejects_bad_shapes():
    x = np.zeros((1, 2, 4, 4))
    with pytest.raises(ValueError):
        conv2d(x, np.zeros((1, 3, 3, 3)), np.zeros(1))
    with pytest.raises(ValueError):
        conv2d(x, np.zeros((1, 2, 3, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        conv2d(x, np.zeros((1, 2, 3, 3)), np.zeros(1), stride=0)


# ---------------------------------------------------------------------------
# conv2d gradients
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("stride,padding", [(1, 1), (2, 0), (2, 1)])
def test_conv_gradients_match_finite_differences(stride, padding):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((4, 3, 5, 5))
    w = rng.standard_normal((2, 3, 3, 3))
    b = rng.standard_normal(2)
    out, cache = conv2d(x, w, b, stride=stride, padding=padding)
    proj = rng.standard_normal(out.shape)

    def f():
        return float((conv2d(x, w, b, stride=stride, padding=padding)[0] * proj).sum())

    gx, gw, gb = conv2d_backward(proj, cache)
    assert rel_error(gx, numeric_grad(f, x)) < 1e-4
    assert rel_error(gw, numeric_grad(f, w)) < 1e-4
    assert rel_error(gb, numeric_grad(f, b)) < 1e-4


# ---------------------------------------------------------------------------
# relu
# ---------------------------------------------------------------------------


def test_relu_values():
    x = np.array([[-3.0, -0.5], [0.0, 2.0]])
    out, _ = relu(x)
    assert np.array_equal(out, [[0.0, 0.0], [0.0, 2.0]])
    pos = np.array([[0.5, 1.0]])
    out_pos, _ = relu(pos)
    assert np.array_equal(out_pos, pos)


def test_relu_gradient_away_from_kink():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 6))
    x[np.abs(x) < 0.1] = 0.5  # keep clear of the nondifferentiable point
    out, cache = relu(x)
    proj = rng.standard_normal(out.shape)

    def f():
        return float((relu(x)[0] * proj).sum())

    assert rel_error(relu_backward(proj, cache), numeric_grad(f, x)) < 1e-6


# ---------------------------------------------------------------------------
# global average pooling
# ---------------------------------------------------------------------------


def test_gap_values():
    x = np.full((2, 3, 4, 4), 0.7)
    out, _ = global_avg_pool(x)
    assert np.allclose(out, 0.7, atol=1e-12)
    x2 = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
    out2, _ = global_avg_pool(x2)
    assert out2[0, 0] == 2.5


def test_gap_backward_uniform():
    x = np.zeros((1, 2, 2, 2))
    _, cache = global_avg_pool(x)
    g = np.array([[4.0, 8.0]])
    gx = global_avg_pool_backward(g, cache)
    assert np.all(gx[0, 0] == 1.0)
    assert np.all(gx[0, 1] == 2.0)


def test_gap_gradient_check():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 3, 4, 5))
    out, cache = global_avg_pool(x)
    proj = rng.standard_normal(out.shape)

    def f():
        return float((global_avg_pool(x)[0] * proj).sum())

    assert rel_error(global_avg_pool_backward(proj, cache), numeric_grad(f, x)) < 1e-6


def test_gap_rejects_non_4d():
    with pytest.raises(ValueError):
        global_avg_pool(np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# fully connected
# ---------------------------------------------------------------------------


def test_fc_zero_weights_returns_bias():
    x = np.ones((3, 5))
    b = np.arange(4.0)
    out, _ = fully_connected(x, np.zeros((4, 5)), b)
    assert np.array_equal(out, np.tile(b, (3, 1)))


def test_fc_identity_weights():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    out, _ = fully_connected(x, np.eye(2), np.zeros(2))
    assert np.array_equal(out, x)


def test_fc_gradient_check():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 6))
    w = rng.standard_normal((4, 6))
    b = rng.standard_normal(4)
    out, cache = fully_connected(x, w, b)
    proj = rng.standard_normal(out.shape)

    def f():
        return float((fully_connected(x, w, b)[0] * proj).sum())

    gx, gw, gb = fully_connected_backward(proj, cache)
    assert rel_error(gx, numeric_grad(f, x)) < 1e-6
    assert rel_error(gw, numeric_grad(f, w)) < 1e-6
    assert rel_error(gb, numeric_grad(f, b)) < 1e-6


def test_fc_rejects_mismatch():
    with pytest.raises(ValueError):
        fully_connected(np.zeros((2, 3)), np.zeros((4, 5)), np.zeros(4))


# ---------------------------------------------------------------------------
# softmax cross-entropy
# ---------------------------------------------------------------------------


def test_ce_near_one_hot():
    logits = np.zeros((1, 20))
    logits[0, 7] = 1000.0
    out = softmax_cross_entropy(logits, [7])
    assert out.loss < 1e-6


def test_ce_uniform_logits():
    out = softmax_cross_entropy(np.zeros((4, 20)), [0, 5, 10, 19])
    assert out.loss == pytest.approx(math.log(20.0), rel=1e-12)


def test_ce_rows_sum_to_one_and_grad_identity():
    rng = np.random.default_rng(6)
    logits = rng.standard_normal((5, 20))
    targets = rng.integers(0, 20, size=5)
    out = softmax_cross_entropy(logits, targets)
    assert np.allclose(out.probs.sum(axis=1), 1.0, atol=1e-6)
    onehot = np.zeros((5, 20))
    onehot[np.arange(5), targets] = 1.0
    assert np.allclose(out.grad_logits, (out.probs - onehot) / 5, atol=1e-12)


def test_ce_shift_invariance():
    rng = np.random.default_rng(8)
    logits = rng.standard_normal((3, 20))
    targets = [1, 2, 3]
    a = softmax_cross_entropy(logits, targets)
    b = softmax_cross_entropy(logits + 123.456, targets)
    assert a.loss == pytest.approx(b.loss, abs=1e-6)


def test_ce_gradient_check():
    rng = np.random.default_rng(9)
    logits = rng.standard_normal((3, 20))
    targets = np.array([4, 0, 19])

    def f():
        return softmax_cross_entropy(logits, targets).loss

    analytic = softmax_cross_entropy(logits, targets).grad_logits
    assert rel_error(analytic, numeric_grad(f, logits)) < 1e-6


def test_ce_extreme_logits_stay_finite():
    logits = np.array([[1e4, -1e4] + [0.0] * 18, [-1e4, 1e4] + [0.0] * 18])
    out = softmax_cross_entropy(logits, [0, 1])
    assert np.isfinite(out.loss)
    assert np.isfinite(out.probs).all()
    assert np.isfinite(out.grad_logits).all()


def test_ce_rejects_bad_targets():
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 20)), [0, 20])
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 20)), [-1, 0])
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 20)), [0])


def test_loss_output_is_plain_record():
    out = softmax_cross_entropy(np.zeros((1, 20)), [0])
    assert isinstance(out, LossOutput)
    assert out.loss >= 0.0
