import numpy as np
import pytest

from rffp.cxnn import layers as L


# ---------------------------------------------------------------------------
# complex convolution == structured real-matrix map


def _structured_real_conv(x, w, bias, stride):
    """Real-arithmetic twin of the complex convolution.

    Each window is flattened to [re; im] and multiplied by the block matrix
    [[A, -B], [B, A]] built from w = A + jB, which is exactly how a complex
    linear map embeds in real matrices.
    """
    b, t, cin = x.shape
    k, _, cout = w.shape
    t_out = (t - k) // stride + 1
    a_mat = w.reshape(k * cin, cout).real
    b_mat = w.reshape(k * cin, cout).imag
    out = np.empty((b, t_out, cout), dtype=np.complex128)
    for bi in range(b):
        for to in range(t_out):
            v = x[bi, to * stride : to * stride + k].reshape(-1)
            re = v.real @ a_mat - v.imag @ b_mat
            im = v.real @ b_mat + v.imag @ a_mat
            out[bi, to] = re + 1j * im
    if bias is not None:
        out += bias
    return out


def test_complex_conv_equals_structured_real_matrix_100_instances():
    rng = np.random.default_rng(0)
    for trial in range(100):
        k = int(rng.integers(1, 9))
        cin = int(rng.integers(1, 5))
        cout = int(rng.integers(1, 6))
        stride = int(rng.integers(1, 4))
        t = k + stride * int(rng.integers(0, 6))
        b = int(rng.integers(1, 3))
        x = rng.standard_normal((b, t, cin)) + 1j * rng.standard_normal((b, t, cin))
        w = rng.standard_normal((k, cin, cout)) + 1j * rng.standard_normal((k, cin, cout))
        bias = None
        if trial % 2:
            bias = rng.standard_normal(cout) + 1j * rng.standard_normal(cout)
        got, _ = L.conv1d_forward(x, w, bias, stride)
        want = _structured_real_conv(x, w, bias, stride)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_conv_output_length_and_validation():
    assert L._conv_out_len(3200, 200, 100) == 31
    assert L._conv_out_len(31, 10, 1) == 22
    assert L._conv_out_len(320, 40, 20) == 15
    with pytest.raises(ValueError):
        L._conv_out_len(5, 6, 1)


def test_real_conv_matches_direct_sum():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 20, 3))
    w = rng.standard_normal((4, 3, 5))
    bias = rng.standard_normal(5)
    got, _ = L.conv1d_forward(x, w, bias, stride=2)
    t_out = (20 - 4) // 2 + 1
    want = np.zeros((2, t_out, 5))
    for to in range(t_out):
        for tau in range(4):
            want[:, to] += x[:, to * 2 + tau] @ w[tau]
    want += bias
    np.testing.assert_allclose(got, want, atol=1e-12)


# ---------------------------------------------------------------------------
# activations


def test_modrelu_examples():
    b = np.array([0.5])
    x = np.array([[[2.0 * np.exp(0.25j * np.pi)]]])
    y, _ = L.modrelu_forward(x, b)
    np.testing.assert_allclose(y, 1.5 * np.exp(0.25j * np.pi), atol=1e-12)
    # below the threshold the unit dies
    y2, _ = L.modrelu_forward(np.array([[[0.3 + 0.0j]]]), b)
    assert y2[0, 0, 0] == 0.0
    # a negative bias boosts magnitude instead
    y3, _ = L.modrelu_forward(np.array([[[2.0j]]]), np.array([-0.5]))
    np.testing.assert_allclose(y3, 2.5j, atol=1e-12)
    # zero input never divides by zero
    y4, _ = L.modrelu_forward(np.zeros((1, 1, 1), dtype=complex), np.array([-1.0]))
    assert y4[0, 0, 0] == 0.0
    # zero bias is the identity away from the origin
    y5, _ = L.modrelu_forward(x, np.array([0.0]))
    np.testing.assert_allclose(y5, x, atol=1e-15)


def test_modrelu_is_phase_equivariant():
    rng = np.random.default_rng(2)
    x = (rng.standard_normal((10, 100, 10)) + 1j * rng.standard_normal((10, 100, 10)))
    b = rng.uniform(-1.0, 1.0, 10)
    phases = rng.uniform(-np.pi, np.pi, 10000)
    y, _ = L.modrelu_forward(x, b)
    for phi in phases[:32]:  # dense check on a few global rotations
        y_rot, _ = L.modrelu_forward(x * np.exp(1j * phi), b)
        np.testing.assert_allclose(y_rot, y * np.exp(1j * phi), atol=1e-12)
    # scalar sweep over all 10000 sampled phases
    x0 = 0.9 + 0.4j
    b0 = np.array([0.3])
    y0, _ = L.modrelu_forward(np.array([[[x0]]]), b0)
    rot, _ = L.modrelu_forward(np.exp(1j * phases)[None, :, None] * x0, b0)
    np.testing.assert_allclose(rot[0, :, 0], np.exp(1j * phases) * y0[0, 0, 0], atol=1e-12)


def test_crelu_is_not_phase_equivariant():
    # pi rotation of a positive real input: crelu kills it entirely
    y, _ = L.crelu_forward(np.array([[[1.0 + 0.0j]]]))
    y_rot, _ = L.crelu_forward(np.array([[[-1.0 + 0.0j]]]))
    assert y[0, 0, 0] == 1.0 and y_rot[0, 0, 0] == 0.0
    rng = np.random.default_rng(3)
    x0 = 0.9 + 0.4j
    phases = rng.uniform(-np.pi, np.pi, 10000)
    base, _ = L.crelu_forward(np.array([[[x0]]]))
    rot, _ = L.crelu_forward(np.exp(1j * phases)[None, :, None] * x0)
    dev = np.abs(rot[0, :, 0] - np.exp(1j * phases) * base[0, 0, 0])
    assert np.mean(dev > 1e-6) > 0.5  # equivariance broken for most rotations


def test_crelu_acts_per_component():
    x = np.array([[[1.0 - 2.0j, -3.0 + 4.0j]]])
    y, _ = L.crelu_forward(x)
    np.testing.assert_array_equal(y, np.array([[[1.0 + 0.0j, 0.0 + 4.0j]]]))


def test_abs_squared():
    y, _ = L.abs_squared_forward(np.array([[[3.0 + 4.0j]]]))
    assert y[0, 0, 0] == pytest.approx(25.0)
    assert not np.iscomplexobj(y)


def test_relu_and_dense_per_step():
    x = np.array([-1.0, 0.5])
    y, mask = L.relu_forward(x)
    np.testing.assert_array_equal(y, [0.0, 0.5])
    np.testing.assert_array_equal(mask, [False, True])

    rng = np.random.default_rng(4)
    x3 = rng.standard_normal((2, 5, 3))
    w = rng.standard_normal((3, 4))
    b = rng.standard_normal(4)
    out = L.dense_forward(x3, w, b)
    assert out.shape == (2, 5, 4)
    for bi in range(2):
        for t in range(5):
            np.testing.assert_allclose(out[bi, t], x3[bi, t] @ w + b, atol=1e-12)


def test_dropout_statistics_and_scaling():
    rng = np.random.default_rng(5)
    x = np.ones((200, 500))
    y, mask = L.dropout_forward(x, 0.5, rng)
    zero_frac = np.mean(y == 0.0)
    assert zero_frac == pytest.approx(0.5, abs=0.01)
    # inverted scaling keeps the expectation
    assert y.mean() == pytest.approx(1.0, abs=0.01)
    assert set(np.unique(y)) == {0.0, 2.0}
    np.testing.assert_array_equal(mask == 0.0, y == 0.0)


def test_temporal_average_forward_backward():
    x = np.arange(24, dtype=float).reshape(2, 4, 3)
    y = L.temporal_average_forward(x)
    np.testing.assert_allclose(y, x.mean(axis=1))
    g = np.ones((2, 3))
    dx = L.temporal_average_backward(g, 4)
    np.testing.assert_allclose(dx, np.full((2, 4, 3), 0.25))


def test_softmax_and_cross_entropy():
    z = np.zeros((1, 19))
    p = L.softmax(z)
    np.testing.assert_allclose(p, 1.0 / 19.0)
    probs, loss, dlogits = L.softmax_xent(z, np.array([7]))
    assert loss == pytest.approx(np.log(19.0))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    want = probs.copy()
    want[0, 7] -= 1.0
    np.testing.assert_allclose(dlogits, want, atol=1e-12)
    # shift invariance
    rng = np.random.default_rng(6)
    z2 = rng.standard_normal((5, 8))
    np.testing.assert_allclose(L.softmax(z2 + 123.0), L.softmax(z2), atol=1e-12)
    with pytest.raises(ValueError):
        L.softmax_xent(np.zeros((2, 3, 4)), np.zeros(2, dtype=int))
