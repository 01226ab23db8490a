"""Simulated fingerprinting dataset: generation, file format, loading.

A dataset is one clean preamble per device pushed through that device's
impairment chain, plus fresh AWGN per packet, unit-power normalized. All
per-day confounders are emulated later, on top of these stored packets.

On disk: manifest.json, then per split a raw binary of interleaved
little-endian float32 I/Q samples (packets contiguous) and a JSON sidecar
with labels and the per-packet RNG keys.
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..impairments import DeviceProfile, apply_device_chain, assign_profiles
from ..confounders import add_awgn
from ..preamble import PreambleSpec, generate_preamble
from ..rng import PURPOSES, keyed_rng, derive_seed
from ..signal import normalize_power

DEFAULT_MASTER_SEED = 0

_IQ_MAGIC = b"RFFPIQ1\x00"
SPLITS = ("train", "val", "test")
_SPLIT_IDS = {name: i for i, name in enumerate(SPLITS)}


@dataclass(frozen=True)
class DatasetManifest:
    """Everything needed to regenerate the dataset bit for bit."""

    n_devices: int = 19
    n_train: int = 200
    n_val: int = 100
    n_test: int = 100
    snr_db: float = 20.0
    oversample_factor: int = 10
    native_rate_hz: float = 20e6
    carrier_freq_hz: float = 5.8e9
    master_seed: int = DEFAULT_MASTER_SEED
    profiles: tuple[DeviceProfile, ...] = ()
    files: dict[str, str] = field(
        default_factory=lambda: {s: f"{s}.iq" for s in SPLITS}
    )

    def __post_init__(self):
        if self.n_devices < 1 or min(self.n_train, self.n_val, self.n_test) < 0:
            raise ValueError("device and packet counts must be positive")
        if not self.profiles:
            object.__setattr__(
                self,
                "profiles",
                tuple(assign_profiles(self.n_devices, derive_seed(self.master_seed, "profiles"))),
            )
        if len(self.profiles) != self.n_devices:
            raise ValueError("one profile per device required")

    @property
    def sample_rate_hz(self) -> float:
        return self.native_rate_hz * self.oversample_factor

    @property
    def packet_len(self) -> int:
        return 320 * self.oversample_factor

    def packets_per_device(self, split: str) -> int:
        return {"train": self.n_train, "val": self.n_val, "test": self.n_test}[split]

    def preamble_spec(self) -> PreambleSpec:
        return PreambleSpec(
            oversample_factor=self.oversample_factor,
            native_rate_hz=self.native_rate_hz,
            carrier_freq_hz=self.carrier_freq_hz,
        )

    def to_dict(self) -> dict:
        return {
            "n_devices": self.n_devices,
            "n_train": self.n_train,
            "n_val": self.n_val,
            "n_test": self.n_test,
            "snr_db": self.snr_db,
            "oversample_factor": self.oversample_factor,
            "native_rate_hz": self.native_rate_hz,
            "carrier_freq_hz": self.carrier_freq_hz,
            "master_seed": self.master_seed,
            "profiles": [
                {"device_id": p.device_id, "epsilon": p.epsilon, "phi": p.phi, "p1db": p.p1db}
                for p in self.profiles
            ],
            "files": dict(self.files),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        profiles = tuple(DeviceProfile(**p) for p in d["profiles"])
        return cls(
            n_devices=int(d["n_devices"]),
            n_train=int(d["n_train"]),
            n_val=int(d["n_val"]),
            n_test=int(d["n_test"]),
            snr_db=float(d["snr_db"]),
            oversample_factor=int(d["oversample_factor"]),
            native_rate_hz=float(d["native_rate_hz"]),
            carrier_freq_hz=float(d["carrier_freq_hz"]),
            master_seed=int(d["master_seed"]),
            profiles=profiles,
            files=dict(d["files"]),
        )


def manifest_hash(manifest: DatasetManifest) -> str:
    return hashlib.sha256(
        json.dumps(manifest.to_dict(), sort_keys=True).encode()
    ).hexdigest()


def generate_split(manifest: DatasetManifest, split: str) -> tuple[np.ndarray, np.ndarray]:
    """In-memory packets for one split: ([n, t] complex64, [n] labels).

    Per packet only the noise draw differs, keyed by
    (master_seed, 'awgn', split, device, packet).
    """
    sid = _SPLIT_IDS[split]
    per_device = manifest.packets_per_device(split)
    ideal = generate_preamble(manifest.preamble_spec())
    x = np.empty((manifest.n_devices * per_device, manifest.packet_len), dtype=np.complex64)
    y = np.empty(manifest.n_devices * per_device, dtype=np.int64)
    row = 0
    for profile in manifest.profiles:
        clean = apply_device_chain(ideal, profile)
        for p in range(per_device):
            rng = keyed_rng(manifest.master_seed, "awgn", sid, profile.device_id, p)
            noisy = normalize_power(add_awgn(clean, manifest.snr_db, rng))
            x[row] = noisy.samples.astype(np.complex64)
            y[row] = profile.device_id
            row += 1
    return x, y


def generate_arrays(manifest: DatasetManifest) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """All splits in memory, keyed by split name."""
    return {s: generate_split(manifest, s) for s in SPLITS}


def _rng_keys(manifest: DatasetManifest, split: str) -> list[list[int]]:
    sid = _SPLIT_IDS[split]
    return [
        [PURPOSES["awgn"], sid, dev, p]
        for dev in range(manifest.n_devices)
        for p in range(manifest.packets_per_device(split))
    ]


def generate_dataset(manifest: DatasetManifest, out_dir) -> dict[str, Path]:
    """Generate every split and persist it under out_dir.

    Returns the written paths. Regeneration with the same manifest yields
    bit-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = manifest_hash(manifest)
    paths: dict[str, Path] = {}
    for split in SPLITS:
        x, y = generate_split(manifest, split)
        iq_path = out / manifest.files[split]
        with open(iq_path, "wb") as f:
            f.write(_IQ_MAGIC)
            f.write(struct.pack("<II", x.shape[0], x.shape[1]))
            f.write(np.ascontiguousarray(x.astype("<c8")).tobytes())
        sidecar = {
            "split": split,
            "labels": y.tolist(),
            "n_packets": int(x.shape[0]),
            "packet_len": int(x.shape[1]),
            "manifest_sha256": digest,
            "rng_keys": _rng_keys(manifest, split),
        }
        side_path = iq_path.with_suffix(".json")
        side_path.write_text(json.dumps(sidecar))
        paths[split] = iq_path
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=1))
    paths["manifest"] = manifest_path
    return paths


def load_split(dataset_dir, manifest: DatasetManifest, split: str) -> tuple[np.ndarray, np.ndarray]:
    """Read one split back: ([n, t] complex64, [n] labels).

    Raises ValueError on a corrupt binary; a sidecar whose recorded
    manifest hash disagrees with manifest.json produces a warning.
    """
    iq_path = Path(dataset_dir) / manifest.files[split]
    raw = iq_path.read_bytes()
    if len(raw) < len(_IQ_MAGIC) + 8 or raw[: len(_IQ_MAGIC)] != _IQ_MAGIC:
        raise ValueError(f"{iq_path} is not a packet file (bad magic)")
    n, t = struct.unpack_from("<II", raw, len(_IQ_MAGIC))
    start = len(_IQ_MAGIC) + 8
    if len(raw) != start + 8 * n * t:
        raise ValueError(f"{iq_path} is truncated")
    x = np.frombuffer(raw, "<c8", n * t, start).reshape(n, t)
    sidecar = json.loads(iq_path.with_suffix(".json").read_text())
    if sidecar["manifest_sha256"] != manifest_hash(manifest):
        warnings.warn(f"{iq_path.name}: sidecar was written for a different manifest")
    y = np.asarray(sidecar["labels"], dtype=np.int64)
    if y.shape != (n,):
        raise ValueError(f"{iq_path}: sidecar label count disagrees with packet count")
    return x.copy(), y


def load_dataset(dataset_dir) -> tuple[DatasetManifest, dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Read manifest.json and every split under a dataset directory."""
    d = Path(dataset_dir)
    manifest = DatasetManifest.from_dict(json.loads((d / "manifest.json").read_text()))
    return manifest, {s: load_split(d, manifest, s) for s in SPLITS}
