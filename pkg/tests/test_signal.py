import numpy as np
import pytest

from rffp.signal import ComplexSignal, normalize_power, normalize_power_array


def test_container_coerces_and_validates():
    s = ComplexSignal([1, 2, 3], 20e6)
    assert s.samples.dtype == np.complex128
    assert len(s) == 3
    assert s.sample_rate_hz == 20e6

    with pytest.raises(ValueError):
        ComplexSignal(np.ones((2, 2)), 1.0)
    with pytest.raises(ValueError):
        ComplexSignal(np.array([]), 1.0)
    with pytest.raises(ValueError):
        ComplexSignal([1.0, np.nan], 1.0)
    with pytest.raises(ValueError):
        ComplexSignal([1.0, np.inf * 1j], 1.0)
    with pytest.raises(ValueError):
        ComplexSignal([1.0], 0.0)


def test_power_and_with_samples():
    s = ComplexSignal([3 + 4j, 0.0], 1.0)
    assert s.power == pytest.approx(12.5)  # (25 + 0) / 2
    t = s.with_samples([1j])
    assert t.sample_rate_hz == 1.0
    assert t.samples[0] == 1j


def test_normalize_power():
    rng = np.random.default_rng(0)
    s = ComplexSignal(5.0 * (rng.standard_normal(64) + 1j * rng.standard_normal(64)), 2.0)
    n = normalize_power(s)
    assert n.power == pytest.approx(1.0, abs=1e-12)
    # direction preserved
    np.testing.assert_allclose(n.samples / s.samples, n.samples[0] / s.samples[0])
    with pytest.raises(ValueError):
        normalize_power(ComplexSignal([0.0, 0.0], 1.0))


def test_normalize_power_array_rows_and_zero_rows():
    rng = np.random.default_rng(1)
    x = (rng.standard_normal((4, 32)) + 1j * rng.standard_normal((4, 32))).astype(np.complex64)
    x[2] = 0.0
    out = normalize_power_array(x)
    assert out.dtype == np.complex64
    p = np.mean(np.abs(out) ** 2, axis=1)
    np.testing.assert_allclose(p[[0, 1, 3]], 1.0, rtol=1e-5)
    np.testing.assert_array_equal(out[2], 0.0)
