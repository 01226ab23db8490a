"""Layer descriptors and their forward/backward kernels.

Complex layers follow the packed-gradient convention: for a real loss L the
gradient carried through a complex activation x is dL/dRe(x) + j dL/dIm(x).
With that convention every update below is the plain real-space gradient
written in complex arithmetic, and a complex convolution is numerically
identical to the structured real convolution

    [Re(y); Im(y)] = [[Re(W), -Im(W)], [Im(W), Re(W)]] [Re(x); Im(x)]

Convolutions are "valid", stride >= 1, computed as one GEMM per layer over
an im2col matrix; that single matrix product carries nearly all of the
arithmetic, so throughput tracks BLAS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class ComplexConv1d:
    kernel_len: int
    in_channels: int
    out_channels: int
    stride: int = 1
    bias: bool = True


@dataclass(frozen=True)
class ModReLU:
    """|x| thresholded by a learned per-channel bias, phase preserved:
    y = (|x| - b)_+ * x / |x|. Equivariant to a global phase rotation."""

    channels: int


@dataclass(frozen=True)
class CReLU:
    """ReLU on real and imaginary parts independently. Not phase equivariant."""


@dataclass(frozen=True)
class AbsSquared:
    """Squared magnitude; the transition from the complex to the real part
    of a network."""


@dataclass(frozen=True)
class RealConv1d:
    kernel_len: int
    in_channels: int
    out_channels: int
    stride: int = 1
    bias: bool = True
    relu: bool = True


@dataclass(frozen=True)
class RealDense:
    """Affine map on the last axis; applied per time step on [b, t, c]."""

    in_dim: int
    out_dim: int
    relu: bool = False


@dataclass(frozen=True)
class Dropout:
    p: float = 0.5


@dataclass(frozen=True)
class TemporalAverage:
    """Mean over the time axis: [b, t, c] -> [b, c]."""


@dataclass(frozen=True)
class Softmax:
    """Terminal probability map; training fuses it with the cross entropy."""


LayerSpec = (
    ComplexConv1d | ModReLU | CReLU | AbsSquared | RealConv1d | RealDense
    | Dropout | TemporalAverage | Softmax
)


# ---------------------------------------------------------------------------
# im2col plumbing


def _conv_out_len(t: int, k: int, s: int) -> int:
    if t < k:
        raise ValueError(f"input length {t} shorter than kernel {k}")
    return (t - k) // s + 1


def _im2col(x: np.ndarray, k: int, s: int) -> np.ndarray:
    """[b, t, c] -> [b*t_out, k*c] patch matrix (one row per output position)."""
    b, t, c = x.shape
    t_out = _conv_out_len(t, k, s)
    windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)[:, ::s]
    patches = np.ascontiguousarray(windows.transpose(0, 1, 3, 2))
    return patches.reshape(b * t_out, k * c)


def _col2im_add(da: np.ndarray, b: int, t: int, c: int, k: int, s: int) -> np.ndarray:
    """Scatter-add [b*t_out, k*c] patch gradients back onto [b, t, c]."""
    t_out = _conv_out_len(t, k, s)
    da = da.reshape(b, t_out, k, c)
    dx = np.zeros((b, t, c), dtype=da.dtype)
    for tau in range(k):
        dx[:, tau : tau + (t_out - 1) * s + 1 : s] += da[:, :, tau]
    return dx


# ---------------------------------------------------------------------------
# convolutions


def conv1d_forward(x: np.ndarray, w: np.ndarray, bias: np.ndarray | None, stride: int):
    """Shared by the complex and real convolutions; dtype follows the inputs.

    x [b, t, cin], w [k, cin, cout] -> y [b, t_out, cout].
    """
    b, t, cin = x.shape
    k, _, cout = w.shape
    a = _im2col(x, k, stride)
    y = a @ w.reshape(k * cin, cout)
    if bias is not None:
        y += bias
    t_out = _conv_out_len(t, k, stride)
    return y.reshape(b, t_out, cout), a


def conv1d_backward(
    g: np.ndarray,
    a: np.ndarray,
    w: np.ndarray,
    x_shape: tuple[int, int, int],
    stride: int,
    has_bias: bool,
    need_dx: bool,
    conjugate: bool,
):
    """Gradients of conv1d_forward.

    g is [b, t_out, cout] in the packed convention. For complex layers
    (conjugate=True) dW = A^H G and dX = G W^H, which reduce to the ordinary
    transposes in the real case.
    """
    b, t, cin = x_shape
    k, _, cout = w.shape
    g2 = g.reshape(-1, cout)
    w2 = w.reshape(k * cin, cout)
    if conjugate:
        dw = np.conj(a.T @ np.conj(g2))
        dwt = np.conj(w2).T
    else:
        dw = a.T @ g2
        dwt = w2.T
    grads = {"w": dw.reshape(w.shape)}
    if has_bias:
        grads["b"] = g2.sum(axis=0)
    dx = None
    if need_dx:
        da = g2 @ dwt
        dx = _col2im_add(da, b, t, cin, k, stride)
    return dx, grads


# ---------------------------------------------------------------------------
# activations


def modrelu_forward(x: np.ndarray, b: np.ndarray):
    m = np.abs(x)
    active = m > np.maximum(b, 0.0)
    # floor |x| so b/|x| here and b/|x|^3 in backward stay finite in float32
    # even for denormal inputs (active units with b < 0 divide by |x|)
    eps = np.cbrt(np.finfo(m.dtype).tiny * 1e6)
    m_safe = np.maximum(m, eps)
    scale = np.where(active, 1.0 - b / m_safe, 0.0)
    y = scale.astype(m.dtype) * x
    return y, (x, m_safe, active, scale)


def modrelu_backward(g: np.ndarray, cache):
    x, m_safe, active, scale = cache
    rg = g.real * x.real + g.imag * x.imag
    b_over_m3 = np.where(active, (1.0 - scale) / (m_safe * m_safe), 0.0)
    dx = scale.astype(x.dtype) * g + (b_over_m3 * rg).astype(x.dtype) * x
    db_map = np.where(active, -rg / m_safe, 0.0)
    db = db_map.reshape(-1, db_map.shape[-1]).sum(axis=0)
    return dx, {"b": db.astype(m_safe.dtype)}


def crelu_forward(x: np.ndarray):
    mr = x.real > 0
    mi = x.imag > 0
    y = x.real * mr + 1j * (x.imag * mi)
    return y.astype(x.dtype), (mr, mi)


def crelu_backward(g: np.ndarray, cache):
    mr, mi = cache
    return (g.real * mr + 1j * (g.imag * mi)).astype(g.dtype), {}


def abs_squared_forward(x: np.ndarray):
    return x.real**2 + x.imag**2, x


def abs_squared_backward(g: np.ndarray, x: np.ndarray):
    return (2.0 * g).astype(x.real.dtype) * x, {}


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


# ---------------------------------------------------------------------------
# real tail


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b


def dense_backward(g: np.ndarray, x: np.ndarray, w: np.ndarray):
    x2 = x.reshape(-1, x.shape[-1])
    g2 = g.reshape(-1, g.shape[-1])
    dw = x2.T @ g2
    db = g2.sum(axis=0)
    dx = (g2 @ w.T).reshape(x.shape)
    return dx, {"w": dw, "b": db}


def dropout_forward(x: np.ndarray, p: float, rng: np.random.Generator):
    keep = 1.0 - p
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
    return x * mask, mask


def temporal_average_forward(x: np.ndarray):
    return x.mean(axis=1)


def temporal_average_backward(g: np.ndarray, t: int):
    return np.repeat(g[:, None, :], t, axis=1) / t


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(g: np.ndarray, y: np.ndarray) -> np.ndarray:
    dot = np.sum(g * y, axis=-1, keepdims=True)
    return y * (g - dot)


def softmax_xent(logits: np.ndarray, labels: np.ndarray):
    """Mean cross entropy and its logit gradient.

    Returns (probs [b, k], loss, dlogits [b, k]).
    """
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ValueError("logits must be [b, k] with one label per row")
    probs = softmax(logits.astype(np.float64))
    b = logits.shape[0]
    picked = probs[np.arange(b), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny))))
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    return probs, loss, dlogits.astype(logits.dtype)
