import numpy as np
import pytest

from rffp.confounders import apply_taps_array, epa_delays_samples, normalized_offset
from rffp.cxnn import layers as L
from rffp.cxnn.network import NetworkSpec, init_params
from rffp.cxnn.train import predict_proba
from rffp.harness.augment import (
    AugmentationPolicy,
    augment_train,
    predict_tta,
    predict_tta_batch,
)
from rffp.harness.dataset import DatasetManifest, generate_split
from rffp.signal import normalize_power_array

FS = 80e6  # oversample 4: small packets, distinct EPA delays


def _packets(n=6, seed=0):
    m = DatasetManifest(n_devices=3, n_train=2, n_val=0, n_test=0, oversample_factor=4,
                        master_seed=seed)
    return generate_split(m, "train")


def test_policy_validation():
    with pytest.raises(ValueError):
        AugmentationPolicy(kind="both")
    with pytest.raises(ValueError):
        AugmentationPolicy(assignment="fixed")
    with pytest.raises(ValueError):
        AugmentationPolicy(cfo_assignment="fixed")
    with pytest.raises(ValueError):
        AugmentationPolicy(cfo_distribution=("gauss", -40, 40))
    with pytest.raises(ValueError):
        AugmentationPolicy(cfo_distribution=("uniform", 40, -40))
    with pytest.raises(ValueError):
        AugmentationPolicy(multiplier=0)
    with pytest.raises(ValueError):
        AugmentationPolicy(n_tta=-1)
    with pytest.raises(ValueError):
        AugmentationPolicy(tta_reduce="max")
    p = AugmentationPolicy(kind="cfo+channel")
    assert p.uses_cfo and p.uses_channel
    assert not AugmentationPolicy(kind="channel").uses_cfo


def test_kind_none_tiles_packets():
    x, _ = _packets()
    out = augment_train(x, AugmentationPolicy(kind="none", multiplier=3),
                        np.random.default_rng(0), FS)
    assert out.shape == (18, x.shape[1])
    for k in range(3):
        np.testing.assert_array_equal(out[k * 6 : (k + 1) * 6], x)


def test_orthogonal_cfo_shares_offset_within_a_copy():
    x, _ = _packets()
    policy = AugmentationPolicy(kind="cfo", assignment="orthogonal", multiplier=5)
    out = augment_train(x, policy, np.random.default_rng(1), FS)
    assert out.shape == (30, x.shape[1])
    # recover each copy's rotation against the sources; all packets of a
    # copy share it, and the 5 copies differ
    thetas = []
    for k in range(5):
        block = out[k * 6 : (k + 1) * 6]
        per_row = []
        for r in range(6):
            ratio = block[r, :50] / x[r, :50]
            step = np.angle(np.mean(ratio[1:] / ratio[:-1]))
            per_row.append(step / (2 * np.pi))
        assert np.ptp(per_row) < 1e-9
        thetas.append(per_row[0])
    assert len({round(t, 12) for t in thetas}) == 5


def test_random_cfo_draws_per_packet():
    x, _ = _packets()
    policy = AugmentationPolicy(kind="cfo", assignment="random", multiplier=2)
    out = augment_train(x, policy, np.random.default_rng(2), FS)
    steps = []
    for r in range(12):
        ratio = out[r, :50] / x[r % 6, :50]
        steps.append(round(float(np.angle(np.mean(ratio[1:] / ratio[:-1]))), 12))
    assert len(set(steps)) == 12


def test_bernoulli_distribution_hits_the_endpoints():
    x, _ = _packets()
    policy = AugmentationPolicy(kind="cfo", assignment="random", multiplier=20,
                                cfo_distribution=("bernoulli", -40.0, 40.0))
    out = augment_train(x, policy, np.random.default_rng(3), FS)
    endpoints = np.array([normalized_offset(p, 5.8e9, FS) for p in (-40.0, 40.0)])
    hits = np.zeros(2, dtype=int)
    for r in range(out.shape[0]):
        ratio = out[r, :50] / x[r % 6, :50]
        step = float(np.angle(np.mean(ratio[1:] / ratio[:-1]))) / (2 * np.pi)
        dist = np.abs(endpoints - step)
        assert dist.min() < 1e-6  # every draw sits on an endpoint
        hits[np.argmin(dist)] += 1
    assert np.all(hits > 0)  # and both endpoints occur


def test_orthogonal_channel_multiset_property():
    # every copy k applies one shared channel to all packets: reproducible
    # from the drawn gains by a naive per-row convolution
    x, _ = _packets()
    policy = AugmentationPolicy(kind="channel", assignment="orthogonal", multiplier=3)
    rng = np.random.default_rng(4)
    out = augment_train(x, policy, rng, FS)

    from rffp.confounders import sample_epa_gains

    gains = sample_epa_gains(3, np.random.default_rng(4))
    delays = epa_delays_samples(FS)
    for k in range(3):
        want = apply_taps_array(x.astype(np.complex128), delays, gains[k])
        np.testing.assert_allclose(out[k * 6 : (k + 1) * 6], want.astype(out.dtype), atol=1e-5)


def test_combined_kind_applies_channel_then_cfo():
    x, _ = _packets()
    policy = AugmentationPolicy(kind="cfo+channel", assignment="orthogonal", multiplier=2)
    out = augment_train(x, policy, np.random.default_rng(5), FS)

    from rffp.confounders import sample_epa_gains

    rng = np.random.default_rng(5)
    gains = sample_epa_gains(2, rng)  # channels drawn first
    ppm = rng.uniform(-40.0, 40.0, 2)
    delays = epa_delays_samples(FS)
    n = np.arange(x.shape[1])
    for k in range(2):
        want = apply_taps_array(x.astype(np.complex128), delays, gains[k])
        theta = normalized_offset(float(ppm[k]), 5.8e9, FS)
        want = want * np.exp(2j * np.pi * theta * n)
        np.testing.assert_allclose(out[k * 6 : (k + 1) * 6], want.astype(out.dtype), atol=1e-5)


def test_combined_kind_cfo_assignment_override():
    # orthogonal channels with random per-packet offsets: 2 channels but
    # 12 distinct rotations
    x, _ = _packets()
    policy = AugmentationPolicy(kind="cfo+channel", assignment="orthogonal",
                                cfo_assignment="random", multiplier=2)
    rng = np.random.default_rng(6)
    out = augment_train(x, policy, rng, FS)

    from rffp.confounders import sample_epa_gains

    check = np.random.default_rng(6)
    gains = sample_epa_gains(2, check)
    ppm = check.uniform(-40.0, 40.0, 12)
    delays = epa_delays_samples(FS)
    n = np.arange(x.shape[1])
    for k in range(2):
        base = apply_taps_array(x.astype(np.complex128), delays, gains[k])
        theta = normalized_offset(ppm[k * 6 : (k + 1) * 6], 5.8e9, FS)
        want = base * np.exp(2j * np.pi * theta[:, None] * n)
        np.testing.assert_allclose(out[k * 6 : (k + 1) * 6], want.astype(out.dtype), atol=1e-5)


# ---------------------------------------------------------------------------
# TTA


def _tiny_net(n_classes=3, t=1280):
    spec = NetworkSpec(
        input_len=t,
        in_channels=1,
        layers=(
            L.ComplexConv1d(80, 1, 8, stride=40),
            L.ModReLU(8),
            L.AbsSquared(),
            L.TemporalAverage(),
            L.RealDense(8, n_classes),
            L.Softmax(),
        ),
        complex_input=True,
    )
    return spec, init_params(spec, 0)


def test_tta_zero_copies_is_plain_prediction():
    x, _ = _packets()
    spec, params = _tiny_net()
    policy = AugmentationPolicy(kind="cfo", n_tta=0)
    probs, labels = predict_tta_batch(spec, params, x, policy, np.random.default_rng(0), FS)
    want = predict_proba(spec, params, normalize_power_array(x).astype(np.complex64))
    np.testing.assert_allclose(probs, want, atol=1e-7)
    np.testing.assert_array_equal(labels, np.argmax(want, axis=1))


def test_tta_probabilities_form_a_simplex():
    x, _ = _packets()
    spec, params = _tiny_net()
    for reduce in ("softmax_mean", "logit_mean"):
        policy = AugmentationPolicy(kind="cfo+channel", n_tta=4, tta_reduce=reduce)
        probs, labels = predict_tta_batch(spec, params, x, policy,
                                          np.random.default_rng(1), FS)
        assert probs.shape == (6, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(probs >= 0)
        np.testing.assert_array_equal(labels, np.argmax(probs, axis=1))


def test_tta_is_deterministic_given_the_stream():
    x, _ = _packets()
    spec, params = _tiny_net()
    policy = AugmentationPolicy(kind="channel", n_tta=3)
    p1, _ = predict_tta_batch(spec, params, x, policy, np.random.default_rng(2), FS)
    p2, _ = predict_tta_batch(spec, params, x, policy, np.random.default_rng(2), FS)
    np.testing.assert_array_equal(p1, p2)
    p3, _ = predict_tta_batch(spec, params, x, policy, np.random.default_rng(3), FS)
    assert not np.array_equal(p1, p3)


def test_single_packet_wrapper():
    x, _ = _packets()
    spec, params = _tiny_net()
    policy = AugmentationPolicy(kind="cfo", n_tta=2)
    probs, label = predict_tta(spec, params, x[0], policy, np.random.default_rng(4), FS)
    assert probs.shape == (3,)
    assert label == int(np.argmax(probs))
