import numpy as np
import pytest

from rffp.cxnn import layers as L
from rffp.cxnn.network import NetworkSpec, build_wifi_complex, init_params
from rffp.cxnn.visualize import receptive_field, visualize_filter


def _single_conv_spec(kernel_len=32, n_filters=2):
    return NetworkSpec(
        input_len=kernel_len,
        in_channels=1,
        layers=(
            L.ComplexConv1d(kernel_len, 1, n_filters, stride=1),
            L.AbsSquared(),
            L.TemporalAverage(),
            L.Softmax(),
        ),
        complex_input=True,
    )


def test_receptive_field_growth():
    spec = build_wifi_complex()
    assert receptive_field(spec, 0) == 200
    assert receptive_field(spec, 1) == 200  # activation adds nothing
    assert receptive_field(spec, 2) == 200 + 9 * 100


def test_planted_exponential_filter_is_recovered():
    spec = _single_conv_spec()
    params = init_params(spec, 0, dtype="float64")
    n = np.arange(32)
    planted = np.exp(2j * np.pi * 0.19 * n) / np.sqrt(32.0)
    params[0]["w"][:, 0, 1] = planted
    params[0]["b"][:] = 0.0

    sig, history = visualize_filter(spec, params, layer_index=0, filter_index=1,
                                    steps=300, step_size=0.2, seed=0)
    x = sig.samples
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=1e-9)
    # matched filter: the optimum input is the conjugate waveform
    corr = np.abs(np.vdot(x, np.conj(planted))) / (
        np.linalg.norm(x) * np.linalg.norm(planted)
    )
    assert corr > 0.99
    # ascent history never decreases
    assert all(b >= a - 1e-12 for a, b in zip(history, history[1:]))
    assert len(history) == 300


def test_objective_improves_from_noise():
    spec = _single_conv_spec()
    params = init_params(spec, 1, dtype="float64")
    _, history = visualize_filter(spec, params, 0, 0, steps=50, step_size=0.1, seed=3)
    assert history[-1] > history[0]


def test_target_validation():
    spec = _single_conv_spec()
    params = init_params(spec, 0)
    with pytest.raises(ValueError):
        visualize_filter(spec, params, layer_index=5, filter_index=0)
    with pytest.raises(ValueError):
        visualize_filter(spec, params, layer_index=0, filter_index=7)
    with pytest.raises(ValueError):
        visualize_filter(spec, params, layer_index=1, filter_index=0)  # not a conv
    with pytest.raises(ValueError):
        visualize_filter(spec, params, 0, 0, steps=0)
