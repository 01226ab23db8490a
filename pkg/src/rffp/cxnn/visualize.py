"""Gradient-ascent synthesis of the waveform a convolution filter likes.

Starting from unit-power complex noise spanning exactly the filter's
receptive field, ascend the mean output magnitude of one filter, projecting
back to unit power after every accepted step. The result shows what input
structure (tones, chirps, transients) the filter has tuned itself to.
"""

from __future__ import annotations

import numpy as np

from ..rng import keyed_rng
from ..signal import ComplexSignal
from . import layers as L
from .network import NetworkParams, NetworkSpec, _forward_one


def receptive_field(spec: NetworkSpec, layer_index: int) -> int:
    """Input samples feeding one output position of layers[layer_index]."""
    rf, jump = 1, 1
    for layer in spec.layers[: layer_index + 1]:
        if isinstance(layer, (L.ComplexConv1d, L.RealConv1d)):
            rf += (layer.kernel_len - 1) * jump
            jump *= layer.stride
    return rf


def _check_target(spec: NetworkSpec, layer_index: int, filter_index: int) -> None:
    if not 0 <= layer_index < len(spec.layers):
        raise ValueError("layer_index out of range")
    target = spec.layers[layer_index]
    if not isinstance(target, L.ComplexConv1d):
        raise ValueError("visualization targets a ComplexConv1d layer")
    if not 0 <= filter_index < target.out_channels:
        raise ValueError("filter_index out of range")
    for layer in spec.layers[:layer_index]:
        if not isinstance(layer, (L.ComplexConv1d, L.ModReLU, L.CReLU)):
            raise ValueError("layers ahead of the target must be complex conv/activation")
    if spec.in_channels != 1:
        raise ValueError("visualization expects a single-channel input")


def _objective_and_grad(layers_prefix, params_prefix, x):
    """Mean |target filter output| and its packed input gradient."""
    acts = x
    caches = []
    for layer, block in zip(layers_prefix, params_prefix):
        acts, cache = _forward_one(layer, block, acts, False, None)
        caches.append(cache)
    mag = np.abs(acts)
    obj = float(np.mean(mag))
    safe = np.where(mag > 0, mag, 1.0)
    g = (acts / safe / mag.size).astype(acts.dtype)
    for i in range(len(layers_prefix) - 1, -1, -1):
        layer, block, cache = layers_prefix[i], params_prefix[i], caches[i]
        if isinstance(layer, L.ComplexConv1d):
            a, x_shape, _ = cache
            g, _ = L.conv1d_backward(
                g, a, block["w"], x_shape, layer.stride,
                has_bias=False, need_dx=True, conjugate=True,
            )
        elif isinstance(layer, L.ModReLU):
            g, _ = L.modrelu_backward(g, cache)
        elif isinstance(layer, L.CReLU):
            g, _ = L.crelu_backward(g, cache)
    return obj, g


def _slice_filter(params: NetworkParams, layer_index: int, filter_index: int):
    """Parameter view reduced to the one filter under study."""
    prefix = [dict(b) for b in params[: layer_index + 1]]
    target = dict(prefix[layer_index])
    target["w"] = target["w"][:, :, filter_index : filter_index + 1]
    if "b" in target:
        target["b"] = target["b"][filter_index : filter_index + 1]
    prefix[layer_index] = target
    return prefix


def visualize_filter(
    spec: NetworkSpec,
    params: NetworkParams,
    layer_index: int,
    filter_index: int,
    steps: int = 200,
    step_size: float = 0.1,
    seed: int = 0,
    sample_rate_hz: float = 1.0,
) -> tuple[ComplexSignal, list[float]]:
    """Return (synthesized unit-power waveform, objective after each step).

    The step size adapts: a step that would lower the objective is rejected
    and halved, an accepted one is mildly grown, so the objective history
    is non-decreasing.
    """
    _check_target(spec, layer_index, filter_index)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rf = receptive_field(spec, layer_index)
    layers_prefix = spec.layers[: layer_index + 1]
    params_prefix = _slice_filter(params, layer_index, filter_index)
    cdt = params[layer_index]["w"].dtype
    rng = keyed_rng(seed, "viz", layer_index, filter_index)
    x = rng.normal(size=(1, rf, 1)) + 1j * rng.normal(size=(1, rf, 1))
    x = (x / np.sqrt(np.mean(np.abs(x) ** 2))).astype(cdt)

    obj, grad = _objective_and_grad(layers_prefix, params_prefix, x)
    history = []
    eta = step_size
    for _ in range(steps):
        cand = x + eta * grad
        cand /= np.sqrt(np.mean(np.abs(cand) ** 2))
        cand_obj, cand_grad = _objective_and_grad(layers_prefix, params_prefix, cand)
        if cand_obj >= obj:
            x, obj, grad = cand, cand_obj, cand_grad
            eta *= 1.1
        else:
            eta *= 0.5
        history.append(obj)
    return ComplexSignal(x[0, :, 0].astype(np.complex128), sample_rate_hz), history
