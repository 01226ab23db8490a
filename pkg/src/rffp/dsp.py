"""Receiver-side estimation and compensation built on preamble structure.

CFO is estimated from the phase of lag correlations over the periodic
training fields (coarse over the short symbols, fine over the long ones),
the channel from the two long training symbols in the frequency domain.
Compensation, equalization and linear-reconstruction residuals are the
nuisance-removal strategies the experiment harness toggles.

Array variants (``*_array``) operate on [n, t] batches and carry the actual
math; the single-signal functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .confounders import ChannelRealization
from .preamble import PreambleSpec, field_slices, generate_preamble, occupied_subcarriers
from .signal import ComplexSignal

COARSE_LAG_NATIVE = 16
FINE_LAG_NATIVE = 64
EQUALIZER_FLOOR = 1e-3


@dataclass(frozen=True)
class ChannelEstimate:
    """Frequency response on the 52 occupied subcarriers.

    freq_response     : complex gains ordered by signed subcarrier -26..-1, 1..26
    fft_size          : OFDM symbol length on the grid the estimate lives on
    oversample_factor : fft_size / 64
    """

    freq_response: np.ndarray
    fft_size: int
    oversample_factor: int

    def __post_init__(self):
        h = np.asarray(self.freq_response, dtype=np.complex128)
        if h.shape != (52,):
            raise ValueError("freq_response must hold the 52 occupied subcarriers")
        if self.fft_size != 64 * self.oversample_factor:
            raise ValueError("fft_size must be 64 * oversample_factor")
        object.__setattr__(self, "freq_response", h)


def cfo_correlation_angle_array(x: np.ndarray, lag: int, window: tuple[int, int]) -> np.ndarray:
    """Normalized offset estimate per row from the lag-correlation phase.

    theta_hat = angle(sum_n conj(x[n]) x[n+lag]) / (2 pi lag) over
    n in [window[0], window[1]). Estimates alias outside +/- 1/(2 lag).
    """
    x = np.atleast_2d(x)
    a, b = window
    if lag < 1 or a < 0 or b + lag > x.shape[1]:
        raise ValueError("correlation window does not fit the signal")
    if b - a < 2:
        raise ValueError("correlation window must cover at least 2 products")
    corr = np.sum(np.conj(x[:, a:b]) * x[:, a + lag : b + lag], axis=1)
    return np.angle(corr) / (2.0 * np.pi * lag)


def estimate_cfo_periodic(sig: ComplexSignal, lag: int, window: tuple[int, int]) -> float:
    """Single-signal wrapper over cfo_correlation_angle_array."""
    return float(cfo_correlation_angle_array(sig.samples[None, :], lag, window)[0])


def _two_step_windows(os_: int) -> tuple[tuple[int, tuple[int, int]], tuple[int, tuple[int, int]]]:
    coarse = (COARSE_LAG_NATIVE * os_, (80 * os_, 144 * os_))
    fine = (FINE_LAG_NATIVE * os_, (192 * os_, 256 * os_))
    return coarse, fine


def estimate_cfo_two_step_array(x: np.ndarray, oversample_factor: int) -> np.ndarray:
    """Coarse estimate over the second half of the short field, then a fine
    estimate across the two long symbols after derotation. Returns the sum.
    """
    x = np.atleast_2d(x)
    os_ = int(oversample_factor)
    (lag_c, win_c), (lag_f, win_f) = _two_step_windows(os_)
    coarse = cfo_correlation_angle_array(x, lag_c, win_c)
    n = np.arange(x.shape[1])
    derotated = x * np.exp(-2j * np.pi * coarse[:, None] * n)
    fine = cfo_correlation_angle_array(derotated, lag_f, win_f)
    return coarse + fine


def estimate_cfo_two_step(sig: ComplexSignal, spec: PreambleSpec) -> float:
    """Two-step preamble CFO estimate as a normalized offset."""
    _check_preamble_shape(sig, spec)
    return float(estimate_cfo_two_step_array(sig.samples[None, :], spec.oversample_factor)[0])


def compensate_cfo(sig: ComplexSignal, theta: float) -> ComplexSignal:
    """Undo a normalized offset: y[n] = x[n] exp(-j 2 pi n theta)."""
    n = np.arange(len(sig))
    return sig.with_samples(sig.samples * np.exp(-2j * np.pi * theta * n))


def _check_preamble_shape(sig: ComplexSignal, spec: PreambleSpec) -> None:
    if len(sig) != spec.n_samples:
        raise ValueError(f"expected a {spec.n_samples}-sample preamble, got {len(sig)}")


@lru_cache(maxsize=8)
def _ltf_reference_bins(oversample_factor: int) -> np.ndarray:
    """FFT of the ideal long training symbol at the occupied bins."""
    spec = PreambleSpec(oversample_factor=oversample_factor)
    ideal = generate_preamble(spec).samples
    sym = ideal[field_slices(oversample_factor)["ltf_sym1"]]
    bins = occupied_subcarriers() % spec.fft_size
    ref = np.fft.fft(sym)[bins]
    ref.flags.writeable = False
    return ref


def estimate_channel_ltf_array(x: np.ndarray, oversample_factor: int) -> np.ndarray:
    """Per-row LTF channel estimates, [n, 52].

    H_hat[k] = mean over the two long symbols of FFT(symbol)[k] / X_ref[k].
    """
    x = np.atleast_2d(x)
    os_ = int(oversample_factor)
    spec = PreambleSpec(oversample_factor=os_)
    if x.shape[1] != spec.n_samples:
        raise ValueError(f"expected {spec.n_samples}-sample rows, got {x.shape[1]}")
    slices = field_slices(os_)
    bins = occupied_subcarriers() % spec.fft_size
    ref = _ltf_reference_bins(os_)
    y1 = np.fft.fft(x[:, slices["ltf_sym1"]], axis=1)[:, bins]
    y2 = np.fft.fft(x[:, slices["ltf_sym2"]], axis=1)[:, bins]
    return 0.5 * (y1 + y2) / ref


def estimate_channel_ltf(sig: ComplexSignal, spec: PreambleSpec) -> ChannelEstimate:
    """Channel estimate from the two long training symbols."""
    _check_preamble_shape(sig, spec)
    h = estimate_channel_ltf_array(sig.samples[None, :], spec.oversample_factor)[0]
    return ChannelEstimate(h, spec.fft_size, spec.oversample_factor)


def channel_freq_response(channel: ChannelRealization, fft_size: int) -> ChannelEstimate:
    """Exact response of a tap channel on the occupied subcarriers."""
    if fft_size % 64:
        raise ValueError("fft_size must be a multiple of 64")
    k = occupied_subcarriers()
    phase = np.exp(-2j * np.pi * np.outer(k, channel.tap_delays_samples) / fft_size)
    h = phase @ channel.tap_gains
    return ChannelEstimate(h, fft_size, fft_size // 64)


def _band_bins(fft_size: int, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Signed occupied-band bin grid of the full-length FFT and the signed
    bins where estimates are known."""
    if n_samples % fft_size:
        raise ValueError("signal length must be a multiple of the estimate fft_size")
    ratio = n_samples // fft_size
    known = occupied_subcarriers() * ratio
    full = np.arange(-26 * ratio, 26 * ratio + 1)
    return known, full


def full_band_response_array(h: np.ndarray, fft_size: int, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Interpolate [n, 52] estimates onto the occupied band of the length-
    n_samples FFT grid. Returns (values [n, bins], signed bin indices).

    Magnitude and unwrapped phase are interpolated linearly between the
    subcarrier-aligned bins (including across the DC gap).
    """
    h = np.atleast_2d(h)
    known, full = _band_bins(fft_size, n_samples)
    mag = np.abs(h)
    ph = np.unwrap(np.angle(h), axis=1)
    out = np.empty((h.shape[0], full.size), dtype=np.complex128)
    for i in range(h.shape[0]):
        m = np.interp(full, known, mag[i])
        p = np.interp(full, known, ph[i])
        out[i] = m * np.exp(1j * p)
    return out, full


def apply_channel_freq_array(x: np.ndarray, h: np.ndarray, fft_size: int) -> np.ndarray:
    """Multiply each row's spectrum by its interpolated channel response.

    Bins outside the occupied band pass through unchanged.
    """
    x = np.atleast_2d(x)
    h_full, bins = full_band_response_array(h, fft_size, x.shape[1])
    spec = np.fft.fft(x, axis=1)
    spec[:, bins] *= h_full
    return np.fft.ifft(spec, axis=1)


def apply_channel_freq(sig: ComplexSignal, est: ChannelEstimate) -> ComplexSignal:
    """Circular frequency-domain application of an estimated channel."""
    y = apply_channel_freq_array(sig.samples[None, :], est.freq_response[None, :], est.fft_size)[0]
    return sig.with_samples(y)


def equalize_array(x: np.ndarray, h: np.ndarray, fft_size: int) -> np.ndarray:
    """Zero-forcing equalization against per-row channel estimates.

    Divides the occupied-band bins by the interpolated response, flooring
    its magnitude at EQUALIZER_FLOOR times the row's peak magnitude so
    spectral nulls do not blow up the noise. Out-of-band bins pass through.
    """
    x = np.atleast_2d(x)
    h_full, bins = full_band_response_array(h, fft_size, x.shape[1])
    mag = np.abs(h_full)
    floor = EQUALIZER_FLOOR * np.max(mag, axis=1, keepdims=True)
    mag_floored = np.maximum(mag, floor)
    safe = h_full * (mag_floored / np.where(mag > 0, mag, 1.0))
    safe = np.where(mag > 0, safe, mag_floored.astype(np.complex128))
    spec = np.fft.fft(x, axis=1)
    spec[:, bins] /= safe
    return np.fft.ifft(spec, axis=1)


def equalize(sig: ComplexSignal, est: ChannelEstimate) -> ComplexSignal:
    """Equalize one signal against one channel estimate."""
    y = equalize_array(sig.samples[None, :], est.freq_response[None, :], est.fft_size)[0]
    return sig.with_samples(y)


def compute_residual_array(
    x: np.ndarray,
    oversample_factor: int,
    theta_hat: np.ndarray,
    h: np.ndarray | None = None,
) -> np.ndarray:
    """Subtract the linear reconstruction of each row.

    The reconstruction is the ideal preamble rotated by that row's estimated
    offset and, when estimates are given, passed through the estimated
    channel. The difference is scaled by each row's RMS so the result is
    invariant to input amplitude; a perfect reconstruction leaves (near)
    zero rather than being blown back up to unit power.
    """
    x = np.atleast_2d(x)
    spec = PreambleSpec(oversample_factor=int(oversample_factor))
    if x.shape[1] != spec.n_samples:
        raise ValueError(f"expected {spec.n_samples}-sample rows, got {x.shape[1]}")
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=np.float64))
    ideal = generate_preamble(spec).samples
    n = np.arange(spec.n_samples)
    recon = ideal * np.exp(2j * np.pi * theta_hat[:, None] * n)
    if h is not None:
        recon = apply_channel_freq_array(recon, h, spec.fft_size)
    rms = np.sqrt(np.mean(np.abs(x) ** 2, axis=1, keepdims=True))
    if np.any(rms == 0):
        raise ValueError("zero-power row has no residual scale")
    return (x - recon) / rms


def compute_residual(
    sig: ComplexSignal,
    spec: PreambleSpec,
    theta_hat: float,
    estimate: ChannelEstimate | None = None,
) -> ComplexSignal:
    """Residual after removing the reconstructed preamble from a signal."""
    _check_preamble_shape(sig, spec)
    h = estimate.freq_response[None, :] if estimate is not None else None
    r = compute_residual_array(sig.samples[None, :], spec.oversample_factor, np.array([theta_hat]), h)[0]
    return sig.with_samples(r)
