"""Channel-side nuisance effects: carrier frequency offset, multipath, noise.

These vary with time and location rather than with the transmitting device,
so a classifier that keys on them stops working the moment conditions
change. A "day" fixes one realization per device (one CFO, one channel) and
applies it to every packet of that device, mimicking a capture session.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import keyed_rng
from .signal import ComplexSignal

CFO_RANGE_PPM = (-40.0, 40.0)
DEFAULT_CARRIER_HZ = 5.8e9

# Extended Pedestrian A power delay profile.
EPA_DELAYS_NS = np.array([0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0])
EPA_POWERS_DB = np.array([0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8])


@dataclass(frozen=True)
class CfoSpec:
    """Carrier frequency offset in parts per million of the carrier."""

    ppm: float
    carrier_freq_hz: float = DEFAULT_CARRIER_HZ
    sample_rate_hz: float = 200e6

    def __post_init__(self):
        if not np.isfinite(self.theta):
            raise ValueError("normalized offset must be finite")

    @property
    def theta(self) -> float:
        """Rotation per sample in cycles: ppm * 1e-6 * fc / fs."""
        return self.ppm * 1e-6 * self.carrier_freq_hz / self.sample_rate_hz


def normalized_offset(ppm, carrier_freq_hz: float, sample_rate_hz: float):
    """ppm -> cycles per sample; broadcasts over ppm arrays."""
    return np.asarray(ppm, dtype=np.float64) * 1e-6 * carrier_freq_hz / sample_rate_hz


@dataclass(frozen=True)
class ChannelRealization:
    """Sparse multipath taps on the receiver sample grid.

    tap_gains          : complex gains A_k e^{j phi_k}
    tap_delays_samples : non-negative, strictly increasing integer positions
    """

    tap_gains: np.ndarray
    tap_delays_samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        gains = np.asarray(self.tap_gains, dtype=np.complex128)
        delays = np.asarray(self.tap_delays_samples, dtype=np.int64)
        if delays.ndim != 1 or delays.shape != gains.shape:
            raise ValueError("tap delays and gains must be 1-D and of equal length")
        if delays.size == 0 or delays[0] < 0 or np.any(np.diff(delays) <= 0):
            raise ValueError("tap delays must be non-negative and strictly increasing")
        object.__setattr__(self, "tap_gains", gains)
        object.__setattr__(self, "tap_delays_samples", delays)


@dataclass(frozen=True)
class DayRealization:
    """The nuisance parameters fixed for one capture session."""

    day_index: int
    seed: int
    carrier_freq_hz: float
    per_device_cfo_ppm: dict[int, float] = field(default_factory=dict)
    per_device_channel: dict[int, ChannelRealization] = field(default_factory=dict)


def apply_cfo(sig: ComplexSignal, theta: float) -> ComplexSignal:
    """Rotate by the normalized offset theta: y[n] = x[n] exp(j 2 pi n theta)."""
    n = np.arange(len(sig))
    return sig.with_samples(sig.samples * np.exp(2j * np.pi * theta * n))


def epa_delays_samples(sample_rate_hz: float) -> np.ndarray:
    """EPA tap delays rounded to the sample grid.

    Raises ValueError when two taps fall on the same sample, which happens
    once the rate drops low enough that the tap spacing collapses.
    """
    delays = np.rint(EPA_DELAYS_NS * 1e-9 * sample_rate_hz).astype(np.int64)
    if np.unique(delays).size != delays.size:
        raise ValueError(
            f"EPA tap delays collide on the sample grid at {sample_rate_hz:g} Hz"
        )
    return delays


def sample_epa_gains(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw [n, 7] complex tap gains: Rayleigh amplitudes scaled to the
    per-tap mean power 10^(P_dB/10), phases uniform on [0, 2 pi)."""
    mean_power = 10.0 ** (EPA_POWERS_DB / 10.0)
    amp = rng.rayleigh(scale=np.sqrt(mean_power / 2.0), size=(n, mean_power.size))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n, mean_power.size))
    return amp * np.exp(1j * phase)


def sample_epa_channel(rng: np.random.Generator, sample_rate_hz: float) -> ChannelRealization:
    """One random EPA realization on the given sample grid."""
    delays = epa_delays_samples(sample_rate_hz)
    gains = sample_epa_gains(1, rng)[0]
    return ChannelRealization(gains, delays, sample_rate_hz)


def apply_taps_array(x: np.ndarray, delays: np.ndarray, gains: np.ndarray) -> np.ndarray:
    """Truncated linear convolution with sparse taps on a [n, t] batch.

    gains is either [k] (one channel shared by all rows) or [n, k]
    (a channel per row). Output keeps the input length; the tail that the
    delays push past the end is dropped.
    """
    x = np.atleast_2d(x)
    t = x.shape[1]
    delays = np.asarray(delays)
    if delays.size and delays.max() >= t:
        raise ValueError("maximum tap delay reaches past the signal")
    gains = np.asarray(gains)
    out = np.zeros_like(x)
    for j, d in enumerate(delays):
        g = gains[..., j] if gains.ndim == 1 else gains[:, j : j + 1]
        out[:, d:] += g * x[:, : t - d] if d else g * x
    return out


def apply_channel(sig: ComplexSignal, ch: ChannelRealization) -> ComplexSignal:
    """Pass a signal through sparse multipath (same-length output)."""
    if ch.sample_rate_hz != sig.sample_rate_hz:
        raise ValueError("channel and signal sample rates differ")
    y = apply_taps_array(sig.samples[None, :], ch.tap_delays_samples, ch.tap_gains)[0]
    return sig.with_samples(y)


def add_awgn(sig: ComplexSignal, snr_db: float, rng: np.random.Generator) -> ComplexSignal:
    """Add circular complex gaussian noise at the given SNR w.r.t. the
    signal's own measured power. snr_db = inf is the noiseless sentinel."""
    if np.isinf(snr_db) and snr_db > 0:
        return sig
    p_sig = sig.power
    if p_sig <= 0:
        raise ValueError("cannot set an SNR for a zero-power signal")
    p_noise = p_sig / 10.0 ** (snr_db / 10.0)
    scale = np.sqrt(p_noise / 2.0)
    noise = rng.normal(0.0, scale, len(sig)) + 1j * rng.normal(0.0, scale, len(sig))
    return sig.with_samples(sig.samples + noise)


def emulate_day(
    signals: np.ndarray,
    labels: np.ndarray,
    profiles,
    day_seed: int,
    sample_rate_hz: float,
    day_index: int = 0,
    cfo_range_ppm: tuple[float, float] = CFO_RANGE_PPM,
    carrier_freq_hz: float = DEFAULT_CARRIER_HZ,
    use_cfo: bool = True,
    use_channel: bool = True,
) -> tuple[np.ndarray, DayRealization]:
    """Apply one capture session's nuisances to a batch of packets.

    Per device the session fixes a CFO drawn uniformly from cfo_range_ppm
    and one EPA channel realization, both keyed by (day_seed, device), and
    applies channel first, then CFO, to every packet of that device.
    signals is [n, t]; labels is [n] device ids, each of which must belong
    to a profile. The draws cover every profiled device whether or not it
    has packets here, so a day is fully determined by (day_seed, profiles).
    """
    signals = np.asarray(signals)
    labels = np.asarray(labels)
    if signals.ndim != 2 or labels.shape != (signals.shape[0],):
        raise ValueError("signals must be [n, t] with one label per row")
    known = sorted(int(p.device_id) for p in profiles)
    unknown = set(int(d) for d in np.unique(labels)) - set(known)
    if unknown:
        raise ValueError(f"labels reference unknown devices {sorted(unknown)}")

    cfo_ppm: dict[int, float] = {}
    channels: dict[int, ChannelRealization] = {}
    out = signals.astype(np.complex128, copy=True)
    n_idx = np.arange(signals.shape[1])
    for dev in known:
        rows = np.nonzero(labels == dev)[0]
        if use_channel:
            ch = sample_epa_channel(keyed_rng(day_seed, "day-channel", dev), sample_rate_hz)
            channels[dev] = ch
            if rows.size:
                out[rows] = apply_taps_array(out[rows], ch.tap_delays_samples, ch.tap_gains)
        if use_cfo:
            rng = keyed_rng(day_seed, "day-cfo", dev)
            ppm = float(rng.uniform(*cfo_range_ppm))
            cfo_ppm[dev] = ppm
            if rows.size:
                theta = normalized_offset(ppm, carrier_freq_hz, sample_rate_hz)
                out[rows] *= np.exp(2j * np.pi * theta * n_idx)

    day = DayRealization(
        day_index=int(day_index),
        seed=int(day_seed),
        carrier_freq_hz=carrier_freq_hz,
        per_device_cfo_ppm=cfo_ppm,
        per_device_channel=channels,
    )
    return out, day
