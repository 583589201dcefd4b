"""Forward-pass contracts of the tensor core layers."""
import numpy as np
import numpy.testing as npt
import pytest

from clueai import tensor as T
from clueai.errors import DimensionError, NumericError, ParameterError


def t(data, grad=False, dtype=np.float64):
    return T.Tensor(np.asarray(data, dtype=dtype), requires_grad=grad)


# -- conv2d -----------------------------------------------------------------

def test_conv2d_identity_kernel():
    x = t(np.ones((1, 3, 3)))
    w = t(np.full((1, 1, 1, 1), 2.0))
    b = t(np.zeros(1))
    out = T.conv2d(x, w, b)
    npt.assert_array_equal(out.data, np.full((1, 3, 3), 2.0))


def test_conv2d_hand_case():
    x = t([[[1.0, 2.0], [3.0, 4.0]]])
    w = t(np.array([[[[1.0, 0.0], [0.0, 1.0]]]]))
    b = t([1.0])
    out = T.conv2d(x, w, b)
    assert out.shape == (1, 1, 1)
    assert out.data[0, 0, 0] == pytest.approx(6.0)


def test_conv2d_zero_input_gives_bias():
    rng = np.random.default_rng(0)
    x = t(np.zeros((2, 5, 5)))
    w = t(rng.normal(size=(3, 2, 3, 3)))
    b = t([0.5, -1.0, 2.0])
    out = T.conv2d(x, w, b, padding=(1, 1))
    for f in range(3):
        npt.assert_allclose(out.data[f], b.data[f])


def test_conv2d_output_geometry():
    x = t(np.zeros((1, 7, 9)))
    w = t(np.zeros((4, 1, 3, 3)))
    b = t(np.zeros(4))
    out = T.conv2d(x, w, b, stride=(2, 3), padding=(1, 0))
    assert out.shape == (4, (7 + 2 - 3) // 2 + 1, (9 - 3) // 3 + 1)


def test_conv2d_shape_errors():
    x = t(np.zeros((2, 4, 4)))
    w = t(np.zeros((1, 3, 3, 3)))     # channel mismatch
    b = t(np.zeros(1))
    with pytest.raises(DimensionError):
        T.conv2d(x, w, b)
    with pytest.raises(DimensionError):
        T.conv2d(t(np.zeros((1, 2, 2))), t(np.zeros((1, 1, 5, 5))), t(np.zeros(1)))


def test_conv2d_nonfinite_input():
    x = t(np.full((1, 3, 3), np.nan))
    w = t(np.zeros((1, 1, 1, 1)))
    b = t(np.zeros(1))
    with pytest.raises(NumericError):
        T.conv2d(x, w, b)


# -- maxpool2d ----------------------------------------------------------------

def test_maxpool_single_window():
    out, _ = T.maxpool2d(t([[[1.0, 2.0], [3.0, 4.0]]]), (2, 2))
    assert out.data.reshape(-1)[0] == 4.0


def test_maxpool_tie_break_lowest_index():
    x = t(np.full((1, 4, 4), 3.25), grad=True)
    out, idx = T.maxpool2d(x, (2, 2), (2, 2))
    npt.assert_array_equal(out.data, np.full((1, 2, 2), 3.25))
    # each window's winner is its own top-left corner (lowest linear index)
    npt.assert_array_equal(idx.reshape(-1), [0, 2, 8, 10])
    T.tsum(out).backward()
    expect = np.zeros((1, 4, 4))
    expect[0, 0::2, 0::2] = 1.0
    npt.assert_array_equal(x.grad, expect)


def test_maxpool_ramp():
    x = t(np.arange(16, dtype=np.float64).reshape(1, 4, 4))
    out, _ = T.maxpool2d(x, (2, 2), (2, 2))
    npt.assert_array_equal(out.data[0], [[5.0, 7.0], [13.0, 15.0]])


def test_maxpool_backward_conserves_gradient_sum():
    rng = np.random.default_rng(7)
    x = T.Tensor(rng.normal(size=(2, 3, 9, 9)), requires_grad=True)
    out, _ = T.maxpool2d(x, (3, 3), (2, 2))
    g = rng.integers(-5, 6, size=out.shape).astype(np.float64)
    out._backward(g)
    assert x.grad.sum() == g.sum()


def test_maxpool_kernel_too_large():
    with pytest.raises(DimensionError):
        T.maxpool2d(t(np.zeros((1, 2, 2))), (3, 3))


# -- dense ---------------------------------------------------------------------

def test_dense_identity():
    x = t([1.0, -2.0, 3.0])
    out = T.dense(x, t(np.eye(3)), t(np.zeros(3)))
    npt.assert_array_equal(out.data, x.data)


def test_dense_hand_case():
    out = T.dense(t([2.0, 3.0]), t([[1.0, 1.0]]), t([0.5]))
    npt.assert_allclose(out.data, [5.5])


def test_dense_zero_weights():
    b = np.array([4.0, -1.0])
    out = T.dense(t([9.0, 9.0, 9.0]), t(np.zeros((2, 3))), t(b))
    npt.assert_array_equal(out.data, b)


def test_dense_mismatch():
    with pytest.raises(DimensionError):
        T.dense(t([1.0, 2.0]), t(np.zeros((2, 3))), t(np.zeros(2)))


# -- relu -------------------------------------------------------------------------

def test_relu_sign_cases():
    npt.assert_array_equal(T.relu(t([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])
    npt.assert_array_equal(T.relu(t([-5.0, -0.1])).data, [0.0, 0.0])


def test_relu_gradient():
    x = t([-1.0, 3.0], grad=True)
    T.tsum(T.relu(x)).backward()
    npt.assert_array_equal(x.grad, [0.0, 1.0])


# -- dropout -----------------------------------------------------------------------

def test_dropout_p0_and_eval_are_identity():
    x = t(np.linspace(-1, 1, 11))
    npt.assert_array_equal(T.dropout(x, 0.0, "train", 0).data, x.data)
    npt.assert_array_equal(T.dropout(x, 0.9, "eval", 0).data, x.data)


def test_dropout_zeroed_fraction():
    x = t(np.ones(10_000))
    out = T.dropout(x, 0.5, "train", np.random.default_rng(42))
    frac = float((out.data == 0).mean())
    assert 0.48 <= frac <= 0.52


def test_dropout_preserves_expectation():
    x = t(np.ones(100_000))
    out = T.dropout(x, 0.4, "train", np.random.default_rng(3))
    assert abs(out.data.mean() - 1.0) < 0.01


def test_dropout_invalid_p():
    with pytest.raises(ParameterError):
        T.dropout(t([1.0]), 1.0, "train", 0)


# -- lstm_cell ------------------------------------------------------------------------

def _zero_lstm(d, h):
    return t(np.zeros((d + h, 4 * h))), t(np.zeros(4 * h))


def test_lstm_zero_params_zero_state():
    w, b = _zero_lstm(3, 2)
    h, c = T.lstm_cell(t([[1.0, 2.0, 3.0]]), t(np.zeros((1, 2))), t(np.zeros((1, 2))), w, b)
    npt.assert_array_equal(h.data, np.zeros((1, 2)))
    npt.assert_array_equal(c.data, np.zeros((1, 2)))


def test_lstm_zero_params_carries_half_cell():
    w, b = _zero_lstm(3, 2)
    c_prev = np.array([[0.8, -1.2]])
    h, c = T.lstm_cell(t([[0.0, 0.0, 0.0]]), t(np.zeros((1, 2))), t(c_prev), w, b)
    npt.assert_allclose(c.data, 0.5 * c_prev, rtol=1e-12)
    npt.assert_allclose(h.data, 0.5 * np.tanh(0.5 * c_prev), rtol=1e-12)


# -- softmax -----------------------------------------------------------------------------

def test_softmax_uniform():
    npt.assert_allclose(T.softmax(t([0.0, 0.0, 0.0])).data, np.full(3, 1 / 3), rtol=1e-12)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(5)
    x = rng.normal(size=9)
    a = T.softmax(t(x)).data
    b = T.softmax(t(x + 123.456)).data
    assert np.abs(a - b).max() < 1e-9


def test_softmax_analytic():
    out = T.softmax(t(np.log([1.0, 2.0, 3.0]))).data
    npt.assert_allclose(out, [1 / 6, 2 / 6, 3 / 6], rtol=1e-12)


def test_softmax_sums_and_range():
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = rng.normal(scale=50, size=rng.integers(1, 12))
        s = T.softmax(t(x)).data
        assert abs(s.sum() - 1.0) < 1e-6
        assert (s > 0).all() and (s <= 1).all()


# -- weighted cross-entropy ----------------------------------------------------------------

def test_wce_onehot_is_near_zero():
    probs = t([0.0, 1.0, 0.0])
    loss = T.weighted_cross_entropy(probs, 1, np.ones(3))
    assert abs(loss.item()) < 1e-10


def test_wce_uniform_seven_classes():
    probs = t(np.full(7, 1 / 7))
    loss = T.weighted_cross_entropy(probs, 3, np.ones(7))
    assert loss.item() == pytest.approx(np.log(7.0), rel=1e-9)


def test_wce_linear_in_weight():
    rng = np.random.default_rng(2)
    raw = rng.random(5)
    p1 = t(raw / raw.sum(), grad=True)
    p2 = t(raw / raw.sum(), grad=True)
    w = np.ones(5)
    w2 = w.copy()
    w2[2] *= 2
    l1 = T.weighted_cross_entropy(p1, 2, w)
    l2 = T.weighted_cross_entropy(p2, 2, w2)
    assert l2.item() == pytest.approx(2 * l1.item(), rel=1e-12)
    l1.backward()
    l2.backward()
    npt.assert_allclose(p2.grad, 2 * p1.grad, rtol=1e-12)


def test_softmax_wce_composition_gradient():
    # the gradient reaching the logits must be w[label] * (p - onehot)
    rng = np.random.default_rng(9)
    logits = T.Tensor(rng.normal(size=7), requires_grad=True)
    weights = rng.uniform(0.5, 3.0, size=7)
    probs = T.softmax(logits)
    loss = T.weighted_cross_entropy(probs, 4, weights)
    loss.backward()
    onehot = np.zeros(7)
    onehot[4] = 1.0
    expect = weights[4] * (probs.data - onehot)
    npt.assert_allclose(logits.grad, expect, rtol=1e-6, atol=1e-12)


def test_wce_bad_label():
    with pytest.raises(IndexError):
        T.weighted_cross_entropy(t([0.5, 0.5]), 2, np.ones(2))


# -- determinism -------------------------------------------------------------------------------

def test_forward_ops_deterministic():
    rng = np.random.default_rng(21)
    x = rng.normal(size=(2, 3, 8, 8))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    outs = []
    for _ in range(2):
        o = T.conv2d(T.Tensor(x), T.Tensor(w), T.Tensor(b), padding=(1, 1))
        o, _ = T.maxpool2d(T.relu(o), (2, 2), (2, 2))
        outs.append(o.data)
    assert (outs[0] == outs[1]).all()
