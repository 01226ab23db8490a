"""Day-based fingerprinting experiments: emulation, compensation,
augmentation, five seeded training runs, TTA evaluation, reporting.

The central question each experiment answers: does a classifier trained on
packets whose per-device CFO/channel were fixed on the training day(s)
still recognize the devices on a day with fresh nuisances?
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..confounders import CFO_RANGE_PPM, DayRealization, emulate_day
from ..cxnn import (
    NetworkSpec,
    TrainConfig,
    build_wifi_complex,
    build_wifi_real,
    predict_proba,
    train,
)
from ..dsp import (
    compute_residual_array,
    equalize_array,
    estimate_cfo_two_step_array,
    estimate_channel_ltf_array,
)
from ..rng import derive_seed, keyed_rng
from ..signal import normalize_power_array
from .augment import AugmentationPolicy, predict_tta_batch
from .augment import augment_train as _augment_train
from .dataset import DatasetManifest, generate_arrays

TEST_DAYS = ("same", "different")
NETWORKS = ("complex", "real")


@dataclass(frozen=True)
class ExperimentConfig:
    """One scenario: confounders, countermeasures, and training settings.

    test_day 'different' evaluates on a day the network never saw;
    'same' reuses training day 0's nuisance draws for the test packets.
    Compensation (cfo_comp / equalize) is applied identically to train and
    test packets before any augmentation. residual replaces the network
    input with the reconstruction residual and cannot be combined with
    equalize, which would subtract the preamble from an already-equalized
    waveform the reconstruction does not model.
    """

    manifest: DatasetManifest = field(default_factory=DatasetManifest)
    n_days_train: int = 20
    test_day: str = "different"
    use_cfo: bool = True
    use_channel: bool = True
    cfo_comp: bool = False
    equalize: bool = False
    residual: bool = False
    augment: AugmentationPolicy = field(default_factory=AugmentationPolicy)
    tta_levels: tuple[int, ...] = (0, 100)
    tta_reduce: str = "softmax_mean"
    n_runs: int = 5
    epochs: int = 50
    batch_size: int = 100
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    network: str = "complex"
    real_width: int = 100
    master_seed: int = 0
    cfo_range_ppm: tuple[float, float] = CFO_RANGE_PPM

    def __post_init__(self):
        if self.n_days_train < 1:
            raise ValueError("need at least one training day")
        if self.test_day not in TEST_DAYS:
            raise ValueError(f"test_day must be one of {TEST_DAYS}")
        if self.residual and self.equalize:
            raise ValueError("residual and equalized inputs are mutually exclusive")
        if self.network not in NETWORKS:
            raise ValueError(f"network must be one of {NETWORKS}")
        if self.n_runs < 1 or min(self.tta_levels, default=0) < 0:
            raise ValueError("n_runs must be >= 1 and TTA levels non-negative")

    def build_network(self) -> NetworkSpec:
        if self.network == "real":
            return build_wifi_real(
                n_classes=self.manifest.n_devices,
                oversample_factor=self.manifest.oversample_factor,
                width=self.real_width,
            )
        return build_wifi_complex(
            n_classes=self.manifest.n_devices,
            oversample_factor=self.manifest.oversample_factor,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["manifest"] = self.manifest.to_dict()
        d["augment"] = dataclasses.asdict(self.augment)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["manifest"] = DatasetManifest.from_dict(d["manifest"])
        aug = dict(d["augment"])
        aug["cfo_distribution"] = tuple(aug["cfo_distribution"])
        d["augment"] = AugmentationPolicy(**aug)
        d["tta_levels"] = tuple(int(v) for v in d["tta_levels"])
        d["cfo_range_ppm"] = tuple(d["cfo_range_ppm"])
        return cls(**d)


@dataclass
class ExperimentReport:
    """Everything a run produced, JSON-serializable.

    accuracies maps str(n_tta) -> one accuracy per run; the confusion
    matrix is the mean over runs at the largest TTA level, so its rows sum
    to the per-class test counts exactly.
    """

    config: dict
    seeds: dict
    accuracies: dict[str, list[float]]
    mean: dict[str, float]
    std: dict[str, float]
    confusion_matrix: list[list[float]]
    per_run_confusion: dict[str, list[list[list[int]]]]
    day_realizations: list[list[dict]]
    histories: list[list[dict]]
    runtime_s: float

    def __post_init__(self):
        for level, accs in self.accuracies.items():
            if any(not 0.0 <= a <= 1.0 for a in accs):
                raise ValueError(f"accuracy outside [0, 1] at TTA level {level}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(**d)


def metrics(predictions: np.ndarray, labels: np.ndarray, n_classes: int | None = None):
    """(accuracy, confusion matrix). Rows are true classes, columns
    predictions, so row i sums to the number of class-i samples."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must align")
    c = int(n_classes) if n_classes else int(max(predictions.max(), labels.max())) + 1
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    accuracy = float(np.mean(predictions == labels))
    return accuracy, confusion


def _rotate_rows(x: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    n = np.arange(x.shape[1])
    return x * np.exp(2j * np.pi * thetas[:, None] * n)


def _day_to_dict(day: DayRealization) -> dict:
    channels = {
        str(dev): {
            "gains_re": ch.tap_gains.real.tolist(),
            "gains_im": ch.tap_gains.imag.tolist(),
            "delays_samples": ch.tap_delays_samples.tolist(),
        }
        for dev, ch in day.per_device_channel.items()
    }
    return {
        "day_index": day.day_index,
        "seed": day.seed,
        "carrier_freq_hz": day.carrier_freq_hz,
        "per_device_cfo_ppm": {str(k): v for k, v in day.per_device_cfo_ppm.items()},
        "per_device_channel": channels,
    }


def _emulate_train_days(
    config: ExperimentConfig,
    x: np.ndarray,
    y: np.ndarray,
    run_seed: int,
) -> tuple[np.ndarray, list[DayRealization]]:
    """Partition packets across days round-robin per device and apply each
    day's fixed per-device nuisances. Total training size is unchanged."""
    m = config.manifest
    per_dev = m.n_train
    packet_index = np.arange(x.shape[0]) % per_dev
    out = np.empty_like(x, dtype=np.complex128)
    days = []
    for d in range(config.n_days_train):
        rows = np.nonzero(packet_index % config.n_days_train == d)[0]
        emulated, day = emulate_day(
            x[rows],
            y[rows],
            m.profiles,
            derive_seed(run_seed, "day", d),
            m.sample_rate_hz,
            day_index=d,
            cfo_range_ppm=config.cfo_range_ppm,
            carrier_freq_hz=m.carrier_freq_hz,
            use_cfo=config.use_cfo,
            use_channel=config.use_channel,
        )
        out[rows] = emulated
        days.append(day)
    return out, days


def _emulate_test_day(
    config: ExperimentConfig,
    x: np.ndarray,
    y: np.ndarray,
    run_seed: int,
) -> tuple[np.ndarray, DayRealization]:
    index = 0 if config.test_day == "same" else config.n_days_train
    out, day = emulate_day(
        x,
        y,
        config.manifest.profiles,
        derive_seed(run_seed, "day", index),
        config.manifest.sample_rate_hz,
        day_index=index,
        cfo_range_ppm=config.cfo_range_ppm,
        carrier_freq_hz=config.manifest.carrier_freq_hz,
        use_cfo=config.use_cfo,
        use_channel=config.use_channel,
    )
    return out, day


def _compensate(config: ExperimentConfig, x: np.ndarray) -> np.ndarray:
    """CFO compensation, then equalization or residual, per packet.

    The channel is always estimated on the CFO-corrected waveform; the
    residual reconstruction uses the raw waveform with the estimated
    rotation, matching its definition.
    """
    os_ = config.manifest.oversample_factor
    fft_size = 64 * os_
    needs_theta = config.cfo_comp or config.residual
    thetas = estimate_cfo_two_step_array(x, os_) if needs_theta else None
    out = x
    if config.cfo_comp:
        out = _rotate_rows(out, -thetas)
    if config.equalize:
        h = estimate_channel_ltf_array(out, os_)
        out = equalize_array(out, h, fft_size)
    if config.residual:
        h = None
        if config.use_channel:
            h = estimate_channel_ltf_array(_rotate_rows(x, -thetas), os_)
        out = compute_residual_array(x, os_, thetas, h)
    return out


def run_experiment(
    config: ExperimentConfig,
    data: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
) -> ExperimentReport:
    """Run the full scenario: n_runs independent trainings, each with its
    own day realizations, augmentation draws and weight init, evaluated on
    the held-out day at every requested TTA level.

    data, when given, must be generate_arrays(config.manifest); passing it
    lets several scenarios share one generated dataset.
    """
    t_start = time.time()
    m = config.manifest
    if data is None:
        data = generate_arrays(m)
    x_train_clean, y_train = data["train"]
    x_test_clean, y_test = data["test"]

    net = config.build_network()
    levels = sorted(set(int(v) for v in config.tta_levels))
    accuracies: dict[str, list[float]] = {str(v): [] for v in levels}
    per_run_confusion: dict[str, list] = {str(v): [] for v in levels}
    day_log: list[list[dict]] = []
    histories: list[list[dict]] = []
    run_seeds = [derive_seed(config.master_seed, "run", r) for r in range(config.n_runs)]

    for run, run_seed in enumerate(run_seeds):
        x_train, train_days = _emulate_train_days(config, x_train_clean, y_train, run_seed)
        x_test, test_day = _emulate_test_day(config, x_test_clean, y_test, run_seed)
        day_log.append([_day_to_dict(d) for d in train_days] + [_day_to_dict(test_day)])

        x_train = _compensate(config, x_train)
        x_test = _compensate(config, x_test)

        if config.augment.kind != "none" and config.augment.multiplier > 1:
            x_fit = _augment_train(
                x_train.astype(np.complex64),
                config.augment,
                keyed_rng(run_seed, "augment"),
                m.sample_rate_hz,
                m.carrier_freq_hz,
            )
            y_fit = np.tile(y_train, config.augment.multiplier)
        else:
            x_fit, y_fit = x_train.astype(np.complex64), y_train
        x_fit = normalize_power_array(x_fit)

        tc = TrainConfig(
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            weight_decay=config.weight_decay,
            seed=run_seed,
        )
        params, history = train(net, x_fit, y_fit, tc)
        histories.append(history)

        x_eval = normalize_power_array(x_test.astype(np.complex64))
        for level in levels:
            if level == 0:
                probs = predict_proba(net, params, x_eval)
                preds = np.argmax(probs, axis=1)
            else:
                policy = dataclasses.replace(
                    config.augment,
                    kind=config.augment.kind if config.augment.kind != "none" else "cfo+channel",
                    n_tta=level,
                    tta_reduce=config.tta_reduce,
                )
                _, preds = predict_tta_batch(
                    net,
                    params,
                    x_test.astype(np.complex64),
                    policy,
                    keyed_rng(run_seed, "tta", level),
                    m.sample_rate_hz,
                    m.carrier_freq_hz,
                )
            acc, confusion = metrics(preds, y_test, n_classes=m.n_devices)
            accuracies[str(level)].append(acc)
            per_run_confusion[str(level)].append(confusion.tolist())

    top = str(levels[-1])
    mean_conf = np.mean(np.asarray(per_run_confusion[top], dtype=np.float64), axis=0)
    report = ExperimentReport(
        config=config.to_dict(),
        seeds={"master_seed": config.master_seed, "run_seeds": run_seeds},
        accuracies=accuracies,
        mean={k: float(np.mean(v)) for k, v in accuracies.items()},
        std={k: float(np.std(v)) for k, v in accuracies.items()},
        confusion_matrix=mean_conf.tolist(),
        per_run_confusion=per_run_confusion,
        day_realizations=day_log,
        histories=histories,
        runtime_s=time.time() - t_start,
    )
    return report


def stratified_folds(labels: np.ndarray, k: int) -> list[np.ndarray]:
    """k disjoint index sets covering everything, per-class balanced to
    within one packet: the i-th packet of each class lands in fold i % k."""
    labels = np.asarray(labels)
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    for cls in np.unique(labels):
        rows = np.nonzero(labels == cls)[0]
        fold_of[rows] = np.arange(rows.size) % k
    return [np.nonzero(fold_of == f)[0] for f in range(k)]


def cross_validate(
    config: ExperimentConfig,
    k: int = 5,
    data: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
) -> dict:
    """Stratified k-fold cross validation over the training split.

    One day-emulation + compensation pass (run seed 0) produces the pool;
    each fold trains on the other k-1 folds, with augmentation applied to
    the training portion only, and is scored plain (no TTA) on the held-out
    fold.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    m = config.manifest
    if data is None:
        data = generate_arrays(m)
    x_clean, y = data["train"]
    run_seed = derive_seed(config.master_seed, "run", 0)
    x, _ = _emulate_train_days(config, x_clean, y, run_seed)
    x = _compensate(config, x)

    net = config.build_network()
    folds = stratified_folds(y, k)
    fold_acc = []
    for f, held in enumerate(folds):
        rest = np.setdiff1d(np.arange(y.shape[0]), held)
        x_fit = x[rest].astype(np.complex64)
        y_fit = y[rest]
        if config.augment.kind != "none" and config.augment.multiplier > 1:
            x_fit = _augment_train(
                x_fit, config.augment, keyed_rng(run_seed, "augment", f),
                m.sample_rate_hz, m.carrier_freq_hz,
            )
            y_fit = np.tile(y_fit, config.augment.multiplier)
        tc = TrainConfig(
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            weight_decay=config.weight_decay,
            seed=derive_seed(config.master_seed, "fold", f),
        )
        params, _ = train(net, normalize_power_array(x_fit), y_fit, tc)
        probs = predict_proba(net, params, normalize_power_array(x[held].astype(np.complex64)))
        acc, _ = metrics(np.argmax(probs, axis=1), y[held], n_classes=m.n_devices)
        fold_acc.append(acc)
    return {
        "k": k,
        "fold_accuracies": fold_acc,
        "mean": float(np.mean(fold_acc)),
        "std": float(np.std(fold_acc)),
        "config": config.to_dict(),
    }


def save_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """report.json plus confusion.csv and history.csv next to it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.json"}
    paths["report"].write_text(json.dumps(report.to_dict(), indent=1))

    paths["confusion"] = out / "confusion.csv"
    with open(paths["confusion"], "w", newline="") as f:
        writer = csv.writer(f)
        n = len(report.confusion_matrix)
        writer.writerow(["true\\pred"] + list(range(n)))
        for i, row in enumerate(report.confusion_matrix):
            writer.writerow([i] + list(row))

    paths["history"] = out / "history.csv"
    with open(paths["history"], "w", newline="") as f:
        writer = csv.writer(f)
        keys = list(report.histories[0][0].keys()) if report.histories and report.histories[0] else []
        writer.writerow(["run"] + keys)
        for run, history in enumerate(report.histories):
            for row in history:
                writer.writerow([run] + [row[k] for k in keys])
    return paths


def load_report(path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text()))
