import numpy as np
import pytest

from rffp.preamble import (
    FFT_SIZE_NATIVE,
    LTF_SEQUENCE,
    NATIVE_LENGTH,
    NATIVE_RATE_HZ,
    PreambleSpec,
    field_slices,
    generate_preamble,
    occupied_subcarriers,
)


def test_spec_geometry():
    spec = PreambleSpec(oversample_factor=10)
    assert spec.sample_rate_hz == 200e6
    assert spec.n_samples == 3200
    assert spec.fft_size == 640
    assert PreambleSpec(oversample_factor=1).n_samples == NATIVE_LENGTH


def test_spec_validation():
    with pytest.raises(ValueError):
        PreambleSpec(oversample_factor=0)
    with pytest.raises(ValueError):
        PreambleSpec(oversample_factor=2.5)
    with pytest.raises(ValueError):
        PreambleSpec(native_rate_hz=0.0)
    with pytest.raises(ValueError):
        PreambleSpec(carrier_freq_hz=-1.0)


def test_field_slices_tile_the_preamble():
    for os_ in (1, 4, 10):
        sl = field_slices(os_)
        assert sl["stf"] == slice(0, 160 * os_)
        assert sl["ltf_cp"] == slice(160 * os_, 192 * os_)
        assert sl["ltf_sym1"].stop == sl["ltf_sym2"].start
        assert sl["ltf_sym2"].stop == 320 * os_


@pytest.mark.parametrize("os_", [1, 4, 10])
def test_structural_periodicities(os_):
    x = generate_preamble(PreambleSpec(oversample_factor=os_)).samples
    sl = field_slices(os_)
    stf = x[sl["stf"]]
    period = 16 * os_
    for rep in range(1, 10):
        np.testing.assert_array_equal(stf[rep * period : (rep + 1) * period], stf[:period])
    sym1, sym2, cp = x[sl["ltf_sym1"]], x[sl["ltf_sym2"]], x[sl["ltf_cp"]]
    np.testing.assert_array_equal(sym1, sym2)
    np.testing.assert_array_equal(cp, sym1[-32 * os_ :])


def test_unit_power_and_field_balance():
    sig = generate_preamble(PreambleSpec(oversample_factor=10))
    assert sig.power == pytest.approx(1.0, abs=1e-12)
    sl = field_slices(10)
    p_stf = np.mean(np.abs(sig.samples[sl["stf"]]) ** 2)
    p_ltf = np.mean(np.abs(sig.samples[sl["ltf_sym1"]]) ** 2)
    # the 13/6 scaling puts the same power in the 12 short tones as in the
    # 52 long ones
    assert p_stf == pytest.approx(p_ltf, rel=1e-12)


def test_band_limited_spectrum():
    os_ = 4
    x = generate_preamble(PreambleSpec(oversample_factor=os_)).samples
    sl = field_slices(os_)
    fft_size = FFT_SIZE_NATIVE * os_
    sym = np.fft.fft(x[sl["ltf_sym1"]]) / fft_size
    occupied = occupied_subcarriers()
    mask = np.zeros(fft_size, dtype=bool)
    mask[occupied % fft_size] = True
    assert np.abs(sym[~mask]).max() < 1e-12
    # loaded bins carry the BPSK pattern up to one common scale
    vals = sym[occupied % fft_size]
    scale = vals[0] / LTF_SEQUENCE[0]
    np.testing.assert_allclose(vals, scale * LTF_SEQUENCE[LTF_SEQUENCE != 0], atol=1e-12)

    stf_sym = np.fft.fft(x[sl["stf"]][: fft_size]) / fft_size
    loaded = np.flatnonzero(np.abs(stf_sym) > 1e-12)
    signed = np.where(loaded > fft_size // 2, loaded - fft_size, loaded)
    assert set(signed.tolist()) <= {k for k in range(-24, 25) if k % 4 == 0 and k != 0}


def test_direct_dft_oracle_native_rate():
    # independent reconstruction from the subcarrier tables with explicit
    # DFT sums, no shared ifft plumbing
    stf_tones = {
        -24: 1 + 1j, -20: -1 - 1j, -16: 1 + 1j, -12: -1 - 1j, -8: -1 - 1j, -4: 1 + 1j,
        4: -1 - 1j, 8: -1 - 1j, 12: 1 + 1j, 16: 1 + 1j, 20: 1 + 1j, 24: 1 + 1j,
    }
    n = np.arange(64)
    short = np.zeros(64, dtype=complex)
    for k, v in stf_tones.items():
        short += np.sqrt(13.0 / 6.0) * v * np.exp(2j * np.pi * k * n / 64.0)
    short /= 64.0
    long_sym = np.zeros(64, dtype=complex)
    for k, v in zip(range(-26, 27), LTF_SEQUENCE):
        long_sym += v * np.exp(2j * np.pi * k * n / 64.0)
    long_sym /= 64.0
    ref = np.concatenate([np.tile(short[:16], 10), long_sym[-32:], long_sym, long_sym])
    ref /= np.sqrt(np.mean(np.abs(ref) ** 2))

    got = generate_preamble(PreambleSpec(oversample_factor=1)).samples
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_oversampling_is_band_limited_interpolation():
    native = generate_preamble(PreambleSpec(oversample_factor=1)).samples
    for os_ in (3, 10):
        dense = generate_preamble(PreambleSpec(oversample_factor=os_)).samples
        np.testing.assert_allclose(dense[::os_], native, atol=1e-12)
