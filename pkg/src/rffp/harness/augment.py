"""Train-time augmentation and test-time augmentation (TTA).

Augmentation synthesizes extra nuisance realizations so the network cannot
lean on the particular CFO/channel a device happened to have during
training. TTA averages the classifier's softmax output over fresh nuisance
draws applied to each test packet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..confounders import (
    CFO_RANGE_PPM,
    DEFAULT_CARRIER_HZ,
    apply_taps_array,
    epa_delays_samples,
    normalized_offset,
    sample_epa_gains,
)
from ..cxnn import NetworkSpec, Softmax, forward, predict_proba, softmax
from ..signal import normalize_power_array

KINDS = ("none", "cfo", "channel", "cfo+channel")
ASSIGNMENTS = ("random", "orthogonal")
CFO_DISTRIBUTIONS = ("uniform", "bernoulli")
TTA_REDUCES = ("softmax_mean", "logit_mean")

# Batches above this many rows are transformed in slices to bound the
# complex128 intermediates.
_CHUNK_ROWS = 2048


@dataclass(frozen=True)
class AugmentationPolicy:
    """What to randomize, how to assign draws, and how much of it.

    kind             : which nuisance(s) each copy receives
    assignment       : 'random' draws fresh parameters per copy; 'orthogonal'
                       draws `multiplier` parameters once and applies copy k
                       of every packet with parameter k, so the parameter set
                       carries no device information
    cfo_assignment   : optional override for the CFO component only (the
                       combined recipe that works best pairs orthogonal
                       channels with random CFOs)
    cfo_distribution : ('uniform', lo, hi) or ('bernoulli', lo, hi) in ppm;
                       bernoulli picks lo or hi with equal probability
    multiplier       : train copies per packet
    n_tta            : test copies per packet (0 = plain prediction)
    tta_reduce       : 'softmax_mean' averages probabilities, 'logit_mean'
                       averages pre-softmax outputs
    """

    kind: str = "none"
    assignment: str = "orthogonal"
    cfo_assignment: str | None = None
    cfo_distribution: tuple = ("uniform", *CFO_RANGE_PPM)
    multiplier: int = 1
    n_tta: int = 0
    tta_reduce: str = "softmax_mean"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.assignment not in ASSIGNMENTS:
            raise ValueError(f"assignment must be one of {ASSIGNMENTS}")
        if self.cfo_assignment is not None and self.cfo_assignment not in ASSIGNMENTS:
            raise ValueError(f"cfo_assignment must be one of {ASSIGNMENTS}")
        name, lo, hi = self.cfo_distribution
        if name not in CFO_DISTRIBUTIONS or not lo <= hi:
            raise ValueError("cfo_distribution is (name, lo, hi) with lo <= hi")
        if int(self.multiplier) < 1:
            raise ValueError("multiplier must be >= 1")
        if int(self.n_tta) < 0:
            raise ValueError("n_tta must be >= 0")
        if self.tta_reduce not in TTA_REDUCES:
            raise ValueError(f"tta_reduce must be one of {TTA_REDUCES}")

    @property
    def uses_cfo(self) -> bool:
        return self.kind in ("cfo", "cfo+channel")

    @property
    def uses_channel(self) -> bool:
        return self.kind in ("channel", "cfo+channel")


def _draw_cfo_ppm(policy: AugmentationPolicy, rng: np.random.Generator, size: int) -> np.ndarray:
    name, lo, hi = policy.cfo_distribution
    if name == "uniform":
        return rng.uniform(lo, hi, size)
    return rng.choice([lo, hi], size=size)


def _draw_params(
    policy: AugmentationPolicy,
    rng: np.random.Generator,
    n_packets: int,
    n_copies: int,
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Channel gains [draws, 7] and CFO ppm [draws] for the whole job.

    Orthogonal components get one draw per copy; random components get one
    per (copy, packet), laid out copy-major. Channels are always drawn
    before CFOs so adding one component never re-keys the other's sequence
    within a stream.
    """
    gains = ppm = None
    if policy.uses_channel:
        per_copy = policy.assignment == "orthogonal"
        gains = sample_epa_gains(n_copies if per_copy else n_copies * n_packets, rng)
    if policy.uses_cfo:
        assign = policy.cfo_assignment or policy.assignment
        per_copy = assign == "orthogonal"
        ppm = _draw_cfo_ppm(policy, rng, n_copies if per_copy else n_copies * n_packets)
    return gains, ppm


def _transform_chunk(
    x: np.ndarray,
    gains: np.ndarray | None,
    ppm: np.ndarray | float | None,
    delays: np.ndarray,
    sample_rate_hz: float,
    carrier_freq_hz: float,
) -> np.ndarray:
    """Channel then CFO on [n, t] rows, mirroring how a day is emulated."""
    out = x.astype(np.complex128, copy=gains is None and ppm is None)
    if gains is not None:
        g = gains if np.ndim(gains) == 1 else np.asarray(gains)
        out = apply_taps_array(out, delays, g)
    if ppm is not None:
        theta = normalized_offset(ppm, carrier_freq_hz, sample_rate_hz)
        n = np.arange(out.shape[1])
        phase = theta[:, None] * n if np.ndim(theta) else theta * n
        out = out * np.exp(2j * np.pi * phase)
    return out


def augment_train(
    packets: np.ndarray,
    policy: AugmentationPolicy,
    rng: np.random.Generator,
    sample_rate_hz: float = 200e6,
    carrier_freq_hz: float = DEFAULT_CARRIER_HZ,
) -> np.ndarray:
    """Expand [n, t] packets to [n * multiplier, t], copy-major.

    Copy k occupies rows [k*n, (k+1)*n) in input order, so labels for the
    output are np.tile(labels, multiplier). kind 'none' (or multiplier 1
    with no draws) returns plain copies.
    """
    x = np.atleast_2d(np.asarray(packets))
    n, t = x.shape
    m = int(policy.multiplier)
    if policy.kind == "none":
        return np.tile(x, (m, 1))
    delays = epa_delays_samples(sample_rate_hz)
    gains, ppm = _draw_params(policy, rng, n, m)
    out = np.empty((n * m, t), dtype=x.dtype)
    for k in range(m):
        if gains is None:
            g = None
        elif policy.assignment == "orthogonal":
            g = gains[k]
        else:
            g = gains[k * n : (k + 1) * n]
        if ppm is None:
            p = None
        elif (policy.cfo_assignment or policy.assignment) == "orthogonal":
            p = float(ppm[k])
        else:
            p = ppm[k * n : (k + 1) * n]
        out[k * n : (k + 1) * n] = _transform_chunk(
            x, g, p, delays, sample_rate_hz, carrier_freq_hz
        )
    return out


def _tta_policy(policy: AugmentationPolicy) -> AugmentationPolicy:
    """TTA always draws fresh random parameters per copy (it is a Monte
    Carlo average over nuisances, so a shared orthogonal set buys nothing)."""
    if policy.assignment == "random" and policy.cfo_assignment in (None, "random"):
        return policy
    return AugmentationPolicy(
        kind=policy.kind,
        assignment="random",
        cfo_assignment=None,
        cfo_distribution=policy.cfo_distribution,
        multiplier=policy.multiplier,
        n_tta=policy.n_tta,
        tta_reduce=policy.tta_reduce,
    )


def predict_tta_batch(
    net: NetworkSpec,
    params,
    packets: np.ndarray,
    policy: AugmentationPolicy,
    rng: np.random.Generator,
    sample_rate_hz: float = 200e6,
    carrier_freq_hz: float = DEFAULT_CARRIER_HZ,
    batch_size: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """Average the network over n_tta augmented copies of each packet.

    Returns ([n, classes] probabilities, [n] argmax labels). Every copy is
    unit-power normalized before the forward pass, exactly like the
    training inputs. n_tta = 0 falls back to a single plain pass.
    """
    x = np.atleast_2d(np.asarray(packets))
    n, t = x.shape
    if policy.n_tta == 0 or policy.kind == "none":
        probs = predict_proba(net, params, normalize_power_array(x).astype(np.complex64), batch_size)
        return probs, np.argmax(probs, axis=1)

    tta = _tta_policy(policy)
    delays = epa_delays_samples(sample_rate_hz)
    acc = None
    for _ in range(int(policy.n_tta)):
        gains = sample_epa_gains(n, rng) if tta.uses_channel else None
        ppm = _draw_cfo_ppm(tta, rng, n) if tta.uses_cfo else None
        copy = np.empty((n, t), dtype=np.complex64)
        for lo in range(0, n, _CHUNK_ROWS):
            hi = min(lo + _CHUNK_ROWS, n)
            copy[lo:hi] = _transform_chunk(
                x[lo:hi],
                None if gains is None else gains[lo:hi],
                None if ppm is None else ppm[lo:hi],
                delays,
                sample_rate_hz,
                carrier_freq_hz,
            )
        copy = normalize_power_array(copy).astype(np.complex64)
        if policy.tta_reduce == "softmax_mean":
            term = predict_proba(net, params, copy, batch_size)
        else:
            term = _logits(net, params, copy, batch_size)
        acc = term if acc is None else acc + term
    acc /= float(policy.n_tta)
    probs = softmax(acc) if policy.tta_reduce == "logit_mean" else acc
    return probs, np.argmax(probs, axis=1)


def predict_tta(
    net: NetworkSpec,
    params,
    packet: np.ndarray,
    policy: AugmentationPolicy,
    rng: np.random.Generator,
    sample_rate_hz: float = 200e6,
    carrier_freq_hz: float = DEFAULT_CARRIER_HZ,
) -> tuple[np.ndarray, int]:
    """Single-packet TTA: (probability vector, predicted label)."""
    probs, labels = predict_tta_batch(
        net, params, np.asarray(packet)[None, :], policy, rng,
        sample_rate_hz, carrier_freq_hz,
    )
    return probs[0], int(labels[0])


def _logits(net: NetworkSpec, params, x: np.ndarray, batch_size: int) -> np.ndarray:
    until = len(net.layers) - 1 if isinstance(net.layers[-1], Softmax) else None
    out = []
    for lo in range(0, x.shape[0], batch_size):
        y, _ = forward(net, params, x[lo : lo + batch_size], train=False, until=until)
        out.append(y.astype(np.float64))
    return np.concatenate(out, axis=0)
