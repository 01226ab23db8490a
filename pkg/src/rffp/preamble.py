"""IEEE 802.11a OFDM preamble synthesis at an integer oversampling factor.

The preamble is the only payload this package transmits: ten repetitions of
the 0.8 us short training symbol followed by a 1.6 us guard and two 3.2 us
long training symbols. At the native 20 MHz rate that is 320 samples; at
oversampling factor ``os`` every field is synthesized directly on the dense
grid (band-limited, via a zero-padded 64*os point IFFT), so the structural
periodicities hold exactly:

    stf[n + 16*os] == stf[n]          within the short field
    ltf_sym1 == ltf_sym2, cp == tail of the long symbol
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .signal import ComplexSignal

# Occupied subcarriers of the short training symbol, scaled so the 12 tones
# carry the same total power as the 52 tones of the long symbol.
_STF_TONES = {
    -24: 1 + 1j, -20: -1 - 1j, -16: 1 + 1j, -12: -1 - 1j, -8: -1 - 1j, -4: 1 + 1j,
    4: -1 - 1j, 8: -1 - 1j, 12: 1 + 1j, 16: 1 + 1j, 20: 1 + 1j, 24: 1 + 1j,
}
_STF_SCALE = np.sqrt(13.0 / 6.0)

# Long training symbol BPSK values on subcarriers -26..26 (DC is null).
LTF_SEQUENCE = np.array(
    [1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1,
     0,
     1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1],
    dtype=np.complex128,
)

NATIVE_RATE_HZ = 20e6
NATIVE_LENGTH = 320
FFT_SIZE_NATIVE = 64


@dataclass(frozen=True)
class PreambleSpec:
    """Sampling parameters for preamble synthesis.

    oversample_factor : integer >= 1 (10 -> 200 MHz, 3200 samples)
    native_rate_hz    : chip rate of the 20 MHz OFDM grid
    carrier_freq_hz   : RF carrier the packet rides on (5.8e9 or 2.4e9)
    """

    oversample_factor: int = 10
    native_rate_hz: float = NATIVE_RATE_HZ
    carrier_freq_hz: float = 5.8e9

    def __post_init__(self):
        if not isinstance(self.oversample_factor, (int, np.integer)) or self.oversample_factor < 1:
            raise ValueError("oversample_factor must be an integer >= 1")
        if not (self.native_rate_hz > 0) or not (self.carrier_freq_hz > 0):
            raise ValueError("rates must be positive")

    @property
    def sample_rate_hz(self) -> float:
        return self.native_rate_hz * self.oversample_factor

    @property
    def n_samples(self) -> int:
        return NATIVE_LENGTH * self.oversample_factor

    @property
    def fft_size(self) -> int:
        return FFT_SIZE_NATIVE * self.oversample_factor


def occupied_subcarriers() -> np.ndarray:
    """Signed indices of the 52 data-bearing LTF subcarriers, -26..-1, 1..26."""
    return np.concatenate([np.arange(-26, 0), np.arange(1, 27)])


def field_slices(oversample_factor: int) -> dict[str, slice]:
    """Sample index ranges of the preamble fields on the oversampled grid."""
    os_ = int(oversample_factor)
    return {
        "stf": slice(0, 160 * os_),
        "ltf_cp": slice(160 * os_, 192 * os_),
        "ltf_sym1": slice(192 * os_, 256 * os_),
        "ltf_sym2": slice(256 * os_, 320 * os_),
    }


def _tones_to_symbol(tones: dict[int, complex] | np.ndarray, fft_size: int) -> np.ndarray:
    """IFFT of a sparse subcarrier loading onto a dense time grid."""
    freq = np.zeros(fft_size, dtype=np.complex128)
    if isinstance(tones, dict):
        items = tones.items()
    else:
        items = zip(range(-26, 27), tones)
    for k, v in items:
        if v != 0:
            freq[k % fft_size] = v
    return np.fft.ifft(freq)


@lru_cache(maxsize=8)
def _preamble_samples(oversample_factor: int) -> np.ndarray:
    os_ = int(oversample_factor)
    fft_size = FFT_SIZE_NATIVE * os_

    short_sym = _tones_to_symbol({k: _STF_SCALE * v for k, v in _STF_TONES.items()}, fft_size)
    # Tones sit on multiples of 4, so the short symbol repeats every 16*os
    # samples; ten periods make the 8 us short field.
    short_period = short_sym[: 16 * os_]
    stf = np.tile(short_period, 10)

    long_sym = _tones_to_symbol(LTF_SEQUENCE, fft_size)
    ltf = np.concatenate([long_sym[-32 * os_:], long_sym, long_sym])

    samples = np.concatenate([stf, ltf])
    samples = samples / np.sqrt(np.mean(np.abs(samples) ** 2))
    samples.flags.writeable = False
    return samples


def generate_preamble(spec: PreambleSpec) -> ComplexSignal:
    """Unit-power preamble waveform on the oversampled grid."""
    samples = _preamble_samples(spec.oversample_factor)
    return ComplexSignal(samples, spec.sample_rate_hz)
