"""Transmitter circuit nonidealities that constitute the device fingerprint.

Each simulated device is a fixed pair of analog imperfections applied to the
ideal preamble: I/Q modulator imbalance (gain mismatch epsilon, phase
mismatch phi) followed by a power amplifier with a saturated third-order
AM/AM characteristic. Profiles are drawn from uniform grids and shuffled so
that the three parameters are assigned to devices independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import ComplexSignal

EPSILON_RANGE = (0.0, 0.2)
PHI_RANGE = (-np.pi / 30.0, np.pi / 30.0)
P1DB_RANGE = (8.45, 20.0)
PA_ALPHA = 0.44


@dataclass(frozen=True)
class DeviceProfile:
    """Fingerprint parameters of one transmitter."""

    device_id: int
    epsilon: float
    phi: float
    p1db: float

    def __post_init__(self):
        if self.device_id < 0:
            raise ValueError("device_id must be non-negative")
        if not EPSILON_RANGE[0] <= self.epsilon <= EPSILON_RANGE[1]:
            raise ValueError(f"epsilon outside {EPSILON_RANGE}")
        if not PHI_RANGE[0] <= self.phi <= PHI_RANGE[1]:
            raise ValueError("phi outside +/- pi/30")
        if not P1DB_RANGE[0] <= self.p1db <= P1DB_RANGE[1]:
            raise ValueError(f"p1db outside {P1DB_RANGE}")


def assign_profiles(n_devices: int, seed: int) -> list[DeviceProfile]:
    """Draw one profile per device from shuffled uniform parameter grids.

    Each parameter takes n_devices evenly spaced values across its range
    (the single value degenerates to the lower endpoint), and each of the
    three grids is permuted independently so grid position does not couple
    the parameters.
    """
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    eps_grid = np.linspace(*EPSILON_RANGE, n_devices)
    phi_grid = np.linspace(*PHI_RANGE, n_devices)
    p1db_grid = np.linspace(*P1DB_RANGE, n_devices)
    rng = np.random.default_rng(seed)
    eps = rng.permutation(eps_grid)
    phi = rng.permutation(phi_grid)
    p1db = rng.permutation(p1db_grid)
    return [
        DeviceProfile(device_id=i, epsilon=float(eps[i]), phi=float(phi[i]), p1db=float(p1db[i]))
        for i in range(n_devices)
    ]


def iq_imbalance_matrix(epsilon: float, phi: float) -> np.ndarray:
    """Real 2x2 baseband map of the imbalanced quadrature modulator.

    Derived from the RF model where the I arm is carried on
    (1 + eps/2) cos(2 pi fc t + phi/2) and the Q arm on
    -(1 - eps/2) sin(2 pi fc t - phi/2).
    """
    gp = 1.0 + epsilon / 2.0
    gm = 1.0 - epsilon / 2.0
    c = np.cos(phi / 2.0)
    s = np.sin(phi / 2.0)
    return np.array([[gp * c, gm * s], [gp * s, gm * c]])


def apply_iq_imbalance(sig: ComplexSignal, epsilon: float, phi: float) -> ComplexSignal:
    """Mix I and Q through the imbalance matrix. Identity at epsilon=phi=0."""
    m = iq_imbalance_matrix(epsilon, phi)
    i, q = sig.samples.real, sig.samples.imag
    out = (m[0, 0] * i + m[0, 1] * q) + 1j * (m[1, 0] * i + m[1, 1] * q)
    return sig.with_samples(out)


def apply_pa(sig: ComplexSignal, p1db: float) -> ComplexSignal:
    """Saturated third-order memoryless power amplifier.

    Below the clipping point the AM/AM curve is x (1 - 0.44 |x|^2 / (3 p1db));
    at |x|^2 > p1db / 0.44 the output magnitude is held at sqrt(p1db) with
    the input phase preserved. Phase is never altered (no AM/PM).
    """
    if not (p1db > 0):
        raise ValueError("p1db must be positive")
    x = sig.samples
    p = np.abs(x) ** 2
    compressed = x * (1.0 - PA_ALPHA * p / (3.0 * p1db))
    mag = np.sqrt(np.maximum(p, np.finfo(float).tiny))
    clipped = x / mag * np.sqrt(p1db)
    out = np.where(p <= p1db / PA_ALPHA, compressed, clipped)
    return sig.with_samples(out)


def apply_device_chain(sig: ComplexSignal, profile: DeviceProfile) -> ComplexSignal:
    """I/Q imbalance followed by the power amplifier."""
    return apply_pa(apply_iq_imbalance(sig, profile.epsilon, profile.phi), profile.p1db)


def compute_evm_db(distorted: ComplexSignal, reference: ComplexSignal) -> float:
    """Error vector magnitude 10 log10(sum |d - r|^2 / sum |r|^2).

    Returns -inf when the two signals are identical.
    """
    d, r = distorted.samples, reference.samples
    if d.shape != r.shape:
        raise ValueError("signals must have equal length")
    ref_energy = np.sum(np.abs(r) ** 2)
    if ref_energy <= 0:
        raise ValueError("reference has zero energy")
    err = np.sum(np.abs(d - r) ** 2)
    if err == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(err / ref_energy))
