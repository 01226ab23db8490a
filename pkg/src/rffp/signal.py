"""Complex baseband signal container and power helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ComplexSignal:
    """A finite complex baseband waveform sampled at a fixed rate.

    samples        : 1-D complex array, length >= 1, all entries finite
    sample_rate_hz : sampling rate in Hz, > 0
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples.view(np.float64))):
            raise ValueError("samples must be finite")
        if not (self.sample_rate_hz > 0):
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power(self) -> float:
        """Mean sample power E|x|^2."""
        return float(np.mean(np.abs(self.samples) ** 2))

    def with_samples(self, samples: np.ndarray) -> "ComplexSignal":
        """Same rate, new samples."""
        return ComplexSignal(samples, self.sample_rate_hz)


def normalize_power(sig: ComplexSignal) -> ComplexSignal:
    """Scale to unit average power. Raises ValueError on a zero-energy input."""
    p = sig.power
    if p <= 0.0:
        raise ValueError("cannot normalize a zero-energy signal")
    return sig.with_samples(sig.samples / np.sqrt(p))


def normalize_power_array(x: np.ndarray) -> np.ndarray:
    """Row-wise unit-power normalization of a [n, t] batch (complex).

    Zero-energy rows are left at zero rather than raising; batch callers
    filter or assert on those upstream.
    """
    x = np.asarray(x)
    p = np.mean(np.abs(x) ** 2, axis=-1, keepdims=True)
    scale = np.sqrt(np.where(p > 0, p, 1.0))
    return (x / scale).astype(x.dtype, copy=False)
