"""Network specification, parameter handling and end-to-end passes.

A network is a frozen NetworkSpec (input geometry plus a layer tuple) and a
NetworkParams list holding one dict of arrays per layer. Parameters are
accounted as real numbers: a complex weight contributes two. Checkpoints
serialize a JSON header followed by a little-endian float32 blob with the
real components of each block ahead of the imaginary ones.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from ..rng import keyed_rng
from . import layers as L

NetworkParams = list[dict[str, np.ndarray]]

_MAGIC = b"RFFPNET1"

_COMPLEX_LAYERS = (L.ComplexConv1d, L.ModReLU, L.CReLU)
_LAYER_TYPES = {
    cls.__name__: cls
    for cls in (
        L.ComplexConv1d, L.ModReLU, L.CReLU, L.AbsSquared, L.RealConv1d,
        L.RealDense, L.Dropout, L.TemporalAverage, L.Softmax,
    )
}


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable architecture description.

    input_len     : samples per input
    in_channels   : input channels (1 for a plain waveform)
    layers        : tuple of layer descriptors, applied in order
    complex_input : whether inputs are complex waveforms or stacked I/Q
    """

    input_len: int
    in_channels: int
    layers: tuple[L.LayerSpec, ...]
    complex_input: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        shapes = propagate_shapes(self)
        n_abs = sum(isinstance(l, L.AbsSquared) for l in self.layers)
        if self.complex_input and n_abs != 1:
            raise ValueError("a complex network needs exactly one AbsSquared layer")
        if not self.complex_input and n_abs != 0:
            raise ValueError("a real network cannot contain AbsSquared")
        if shapes[-1][1]:
            raise ValueError("network output must be real")


def propagate_shapes(spec: NetworkSpec) -> list[tuple[tuple[int, ...], bool]]:
    """Activation shape (without batch) and complex-domain flag after each
    layer, starting with the input. Raises ValueError on any mismatch."""
    shape: tuple[int, ...] = (spec.input_len, spec.in_channels)
    cplx = spec.complex_input
    out = [(shape, cplx)]
    for i, layer in enumerate(spec.layers):
        try:
            shape, cplx = _propagate_one(layer, shape, cplx)
        except ValueError as e:
            raise ValueError(f"layer {i} ({type(layer).__name__}): {e}") from None
        out.append((shape, cplx))
    return out


def _propagate_one(layer, shape, cplx):
    if isinstance(layer, (L.ComplexConv1d, L.RealConv1d)):
        want_cplx = isinstance(layer, L.ComplexConv1d)
        if cplx != want_cplx:
            raise ValueError("domain mismatch")
        if len(shape) != 2 or shape[1] != layer.in_channels:
            raise ValueError(f"expected [t, {layer.in_channels}], got {shape}")
        t_out = L._conv_out_len(shape[0], layer.kernel_len, layer.stride)
        return (t_out, layer.out_channels), cplx
    if isinstance(layer, L.ModReLU):
        if not cplx or shape[-1] != layer.channels:
            raise ValueError(f"needs complex input with {layer.channels} channels")
        return shape, True
    if isinstance(layer, L.CReLU):
        if not cplx:
            raise ValueError("needs complex input")
        return shape, True
    if isinstance(layer, L.AbsSquared):
        if not cplx:
            raise ValueError("needs complex input")
        return shape, False
    if isinstance(layer, L.RealDense):
        if cplx or shape[-1] != layer.in_dim:
            raise ValueError(f"needs real input with last dim {layer.in_dim}, got {shape}")
        return shape[:-1] + (layer.out_dim,), False
    if isinstance(layer, L.Dropout):
        if cplx:
            raise ValueError("dropout sits in the real part of the network")
        if not 0.0 <= layer.p < 1.0:
            raise ValueError("p must be in [0, 1)")
        return shape, False
    if isinstance(layer, L.TemporalAverage):
        if cplx or len(shape) != 2:
            raise ValueError("needs a real [t, c] input")
        return (shape[1],), False
    if isinstance(layer, L.Softmax):
        if cplx or len(shape) != 1:
            raise ValueError("needs a real class vector")
        return shape, False
    raise ValueError(f"unknown layer {layer!r}")


def layer_param_count(layer) -> int:
    """Trainable parameter count in real numbers."""
    if isinstance(layer, L.ComplexConv1d):
        n = 2 * layer.kernel_len * layer.in_channels * layer.out_channels
        return n + (2 * layer.out_channels if layer.bias else 0)
    if isinstance(layer, L.ModReLU):
        return layer.channels
    if isinstance(layer, L.RealConv1d):
        n = layer.kernel_len * layer.in_channels * layer.out_channels
        return n + (layer.out_channels if layer.bias else 0)
    if isinstance(layer, L.RealDense):
        return layer.in_dim * layer.out_dim + layer.out_dim
    return 0


def count_parameters(spec: NetworkSpec) -> int:
    return sum(layer_param_count(l) for l in spec.layers)


def params_real_count(params: NetworkParams) -> int:
    """Real numbers actually stored in a parameter list (complex counts twice)."""
    total = 0
    for block in params:
        for v in block.values():
            total += v.size * (2 if np.iscomplexobj(v) else 1)
    return total


# ---------------------------------------------------------------------------
# initialization


def _dtypes(dtype: str) -> tuple[np.dtype, np.dtype]:
    if dtype == "float32":
        return np.dtype(np.float32), np.dtype(np.complex64)
    if dtype == "float64":
        return np.dtype(np.float64), np.dtype(np.complex128)
    raise ValueError("dtype must be 'float32' or 'float64'")


def complex_glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int, cdtype):
    """Rayleigh magnitude, uniform phase, E|w|^2 = 2 / (fan_in + fan_out)."""
    sigma = np.sqrt(1.0 / (fan_in + fan_out))
    mag = rng.rayleigh(scale=sigma, size=shape)
    phase = rng.uniform(-np.pi, np.pi, size=shape)
    return (mag * np.exp(1j * phase)).astype(cdtype)


def real_glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int, rdtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(rdtype)


def init_params(spec: NetworkSpec, seed: int, dtype: str = "float32") -> NetworkParams:
    """Fresh parameters drawn from one stream keyed by (seed, 'init')."""
    rdt, cdt = _dtypes(dtype)
    rng = keyed_rng(seed, "init")
    params: NetworkParams = []
    for layer in spec.layers:
        block: dict[str, np.ndarray] = {}
        if isinstance(layer, L.ComplexConv1d):
            fan_in = layer.kernel_len * layer.in_channels
            fan_out = layer.kernel_len * layer.out_channels
            block["w"] = complex_glorot(
                rng, (layer.kernel_len, layer.in_channels, layer.out_channels), fan_in, fan_out, cdt
            )
            if layer.bias:
                block["b"] = np.zeros(layer.out_channels, dtype=cdt)
        elif isinstance(layer, L.ModReLU):
            block["b"] = np.zeros(layer.channels, dtype=rdt)
        elif isinstance(layer, L.RealConv1d):
            fan_in = layer.kernel_len * layer.in_channels
            fan_out = layer.kernel_len * layer.out_channels
            block["w"] = real_glorot(
                rng, (layer.kernel_len, layer.in_channels, layer.out_channels), fan_in, fan_out, rdt
            )
            if layer.bias:
                block["b"] = np.zeros(layer.out_channels, dtype=rdt)
        elif isinstance(layer, L.RealDense):
            block["w"] = real_glorot(rng, (layer.in_dim, layer.out_dim), layer.in_dim, layer.out_dim, rdt)
            block["b"] = np.zeros(layer.out_dim, dtype=rdt)
        params.append(block)
    return params


# ---------------------------------------------------------------------------
# passes


def forward(
    spec: NetworkSpec,
    params: NetworkParams,
    x: np.ndarray,
    train: bool = False,
    dropout_rng: np.random.Generator | None = None,
    until: int | None = None,
):
    """Run the network, returning (output, caches).

    ``until`` stops after that many layers (exclusive); the training loop
    uses it to grab logits ahead of the terminal Softmax. Dropout is active
    only when train=True, drawing masks from dropout_rng.
    """
    rdt, cdt = (np.float64, np.complex128) if _is_double(params) else (np.float32, np.complex64)
    x = np.asarray(x)
    if spec.complex_input:
        x = x.astype(cdt, copy=False)
    else:
        # real networks take complex packets as stacked re/im channels
        if np.iscomplexobj(x):
            if x.ndim != 2 or spec.in_channels != 2:
                raise ValueError("complex input to a real network must be [batch, t] with in_channels=2")
            x = np.stack([x.real, x.imag], axis=-1)
        x = x.astype(rdt, copy=False)
    if x.ndim == 2 and spec.in_channels == 1 and x.shape[1] == spec.input_len:
        x = x[:, :, None]
    if x.ndim != 3 or x.shape[1:] != (spec.input_len, spec.in_channels):
        raise ValueError(
            f"input shape {x.shape} does not match [batch, {spec.input_len}, {spec.in_channels}]"
        )
    caches: list = []
    n = len(spec.layers) if until is None else until
    for layer, block in zip(spec.layers[:n], params[:n]):
        x, cache = _forward_one(layer, block, x, train, dropout_rng)
        caches.append(cache)
    return x, caches


def _is_double(params: NetworkParams) -> bool:
    for block in params:
        for v in block.values():
            return v.dtype in (np.float64, np.complex128)
    return False


def _forward_one(layer, block, x, train, dropout_rng):
    if isinstance(layer, (L.ComplexConv1d, L.RealConv1d)):
        y, a = L.conv1d_forward(x, block["w"], block.get("b"), layer.stride)
        mask = None
        if isinstance(layer, L.RealConv1d) and layer.relu:
            y, mask = L.relu_forward(y)
        return y, (a, x.shape, mask)
    if isinstance(layer, L.ModReLU):
        return L.modrelu_forward(x, block["b"])
    if isinstance(layer, L.CReLU):
        return L.crelu_forward(x)
    if isinstance(layer, L.AbsSquared):
        return L.abs_squared_forward(x)
    if isinstance(layer, L.RealDense):
        y = L.dense_forward(x, block["w"], block["b"])
        mask = None
        if layer.relu:
            y, mask = L.relu_forward(y)
        return y, (x, mask)
    if isinstance(layer, L.Dropout):
        if train:
            if dropout_rng is None:
                raise ValueError("training through Dropout needs a dropout_rng")
            return L.dropout_forward(x, layer.p, dropout_rng)
        return x, None
    if isinstance(layer, L.TemporalAverage):
        return L.temporal_average_forward(x), x.shape[1]
    if isinstance(layer, L.Softmax):
        return L.softmax(x), None
    raise ValueError(f"unknown layer {layer!r}")


def backward(
    spec: NetworkSpec,
    params: NetworkParams,
    caches: list,
    g: np.ndarray,
    until: int | None = None,
) -> list[dict[str, np.ndarray]]:
    """Backpropagate the packed gradient g through the layers run by
    forward(..., until=until). Returns per-layer gradient dicts aligned
    with params (empty dict for parameterless layers)."""
    n = len(spec.layers) if until is None else until
    grads: list[dict[str, np.ndarray]] = [dict() for _ in range(len(spec.layers))]
    for i in range(n - 1, -1, -1):
        layer, block, cache = spec.layers[i], params[i], caches[i]
        need_dx = i > 0
        if isinstance(layer, (L.ComplexConv1d, L.RealConv1d)):
            a, x_shape, mask = cache
            if mask is not None:
                g = g * mask
            g, grads[i] = L.conv1d_backward(
                g, a, block["w"], x_shape, layer.stride,
                has_bias="b" in block, need_dx=need_dx,
                conjugate=isinstance(layer, L.ComplexConv1d),
            )
        elif isinstance(layer, L.ModReLU):
            g, grads[i] = L.modrelu_backward(g, cache)
        elif isinstance(layer, L.CReLU):
            g, grads[i] = L.crelu_backward(g, cache)
        elif isinstance(layer, L.AbsSquared):
            g, grads[i] = L.abs_squared_backward(g, cache)
        elif isinstance(layer, L.RealDense):
            x, mask = cache
            if mask is not None:
                g = g * mask
            g, grads[i] = L.dense_backward(g, x, block["w"])
        elif isinstance(layer, L.Dropout):
            if cache is not None:
                g = g * cache
        elif isinstance(layer, L.TemporalAverage):
            g = L.temporal_average_backward(g, cache)
        elif isinstance(layer, L.Softmax):
            g = L.softmax_backward(g, cache)
        if not need_dx:
            break
    return grads


# ---------------------------------------------------------------------------
# reference architectures


def build_wifi_complex(n_classes: int = 19, oversample_factor: int = 10) -> NetworkSpec:
    """Two complex conv blocks, squared magnitude, per-step dense tail."""
    return NetworkSpec(
        input_len=320 * oversample_factor,
        in_channels=1,
        layers=(
            L.ComplexConv1d(20 * oversample_factor, 1, 100, stride=10 * oversample_factor),
            L.ModReLU(100),
            L.ComplexConv1d(10, 100, 100, stride=1),
            L.ModReLU(100),
            L.AbsSquared(),
            L.RealDense(100, 100, relu=True),
            L.RealDense(100, 100, relu=True),
            L.TemporalAverage(),
            L.RealDense(100, n_classes),
            L.Softmax(),
        ),
        complex_input=True,
    )


def build_wifi_real(n_classes: int = 19, oversample_factor: int = 10, width: int = 100) -> NetworkSpec:
    """Real-valued counterpart on stacked I/Q channels; width 100/140/200
    gives roughly 0.6x/1.1x/2x the complex network's parameter count."""
    return NetworkSpec(
        input_len=320 * oversample_factor,
        in_channels=2,
        layers=(
            L.RealConv1d(20 * oversample_factor, 2, width, stride=10 * oversample_factor),
            L.RealConv1d(10, width, width, stride=1),
            L.RealDense(width, 100, relu=True),
            L.Dropout(0.5),
            L.RealDense(100, 100, relu=True),
            L.Dropout(0.5),
            L.TemporalAverage(),
            L.RealDense(100, n_classes),
            L.Softmax(),
        ),
        complex_input=False,
    )


def build_adsb_complex(n_classes: int = 100) -> NetworkSpec:
    """Shorter single-channel variant for 320-sample inputs; the convs carry
    no bias and the tail is a plain two-layer classifier."""
    return NetworkSpec(
        input_len=320,
        in_channels=1,
        layers=(
            L.ComplexConv1d(40, 1, 100, stride=20, bias=False),
            L.ModReLU(100),
            L.ComplexConv1d(5, 100, 100, stride=1, bias=False),
            L.ModReLU(100),
            L.AbsSquared(),
            L.TemporalAverage(),
            L.RealDense(100, 100, relu=True),
            L.RealDense(100, n_classes),
            L.Softmax(),
        ),
        complex_input=True,
    )


def build_adsb_real(n_classes: int = 100, width: int = 100) -> NetworkSpec:
    return NetworkSpec(
        input_len=320,
        in_channels=2,
        layers=(
            L.RealConv1d(40, 2, width, stride=20),
            L.RealConv1d(5, width, width, stride=1),
            L.TemporalAverage(),
            L.RealDense(width, 100, relu=True),
            L.Dropout(0.5),
            L.RealDense(100, n_classes),
            L.Softmax(),
        ),
        complex_input=False,
    )


# ---------------------------------------------------------------------------
# serialization


def spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "input_len": spec.input_len,
        "in_channels": spec.in_channels,
        "complex_input": spec.complex_input,
        "layers": [
            {"type": type(l).__name__, **dataclasses.asdict(l)} for l in spec.layers
        ],
    }


def spec_from_dict(d: dict) -> NetworkSpec:
    layers = []
    for entry in d["layers"]:
        entry = dict(entry)
        cls = _LAYER_TYPES[entry.pop("type")]
        layers.append(cls(**entry))
    return NetworkSpec(
        input_len=int(d["input_len"]),
        in_channels=int(d["in_channels"]),
        layers=tuple(layers),
        complex_input=bool(d["complex_input"]),
    )


def save_checkpoint(path, spec: NetworkSpec, params: NetworkParams, seed: int, epoch: int) -> None:
    """Magic, u32 header length, JSON header, then the float32 blob with
    every block in layer order (real components before imaginary)."""
    blocks = []
    blob = []
    for i, block in enumerate(params):
        for name in sorted(block):
            v = block[name]
            cplx = np.iscomplexobj(v)
            blocks.append({"layer": i, "name": name, "shape": list(v.shape), "complex": cplx})
            if cplx:
                blob.append(np.ascontiguousarray(v.real, dtype="<f4"))
                blob.append(np.ascontiguousarray(v.imag, dtype="<f4"))
            else:
                blob.append(np.ascontiguousarray(v, dtype="<f4"))
    header = json.dumps(
        {"spec": spec_to_dict(spec), "seed": int(seed), "epoch": int(epoch), "blocks": blocks}
    ).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for arr in blob:
            f.write(arr.tobytes())


def load_checkpoint(path) -> tuple[NetworkSpec, NetworkParams, dict]:
    """Inverse of save_checkpoint; returns (spec, params, meta)."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(_MAGIC) + 4 or raw[: len(_MAGIC)] != _MAGIC:
        raise ValueError("not a network checkpoint (bad magic)")
    (hlen,) = struct.unpack_from("<I", raw, len(_MAGIC))
    start = len(_MAGIC) + 4
    try:
        header = json.loads(raw[start : start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"corrupt checkpoint header: {e}") from None
    spec = spec_from_dict(header["spec"])
    params: NetworkParams = [dict() for _ in spec.layers]
    off = start + hlen
    for entry in header["blocks"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        if entry["complex"]:
            need = 8 * n
            if off + need > len(raw):
                raise ValueError("checkpoint blob truncated")
            re = np.frombuffer(raw, "<f4", n, off).reshape(shape)
            im = np.frombuffer(raw, "<f4", n, off + 4 * n).reshape(shape)
            params[entry["layer"]][entry["name"]] = (re + 1j * im).astype(np.complex64)
            off += need
        else:
            need = 4 * n
            if off + need > len(raw):
                raise ValueError("checkpoint blob truncated")
            params[entry["layer"]][entry["name"]] = (
                np.frombuffer(raw, "<f4", n, off).reshape(shape).astype(np.float32)
            )
            off += need
    if off != len(raw):
        raise ValueError("checkpoint has trailing bytes")
    meta = {"seed": header["seed"], "epoch": header["epoch"]}
    return spec, params, meta
