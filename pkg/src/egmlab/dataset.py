"""Slice EGM recordings into supervised samples and serialize datasets.

A sample is N electrogram frames taken at time points m*N_tau + n*N_t
(n = 1..N, 1-based time labels), z-scored per electrode, paired with two
normalized coordinate channels and a resampled tensor-field target. Datasets
are directories of raw float32 shards plus a deterministic manifest.json;
folds partition simulations (never samples) so no simulation leaks across
folds.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .substrate import DiffusionTensorField, resample_tensor_field

NOISE_SIGMA_DEFAULT = 0.05
TARGET_SIZE_DEFAULT = 96
MODES = ("HeI", "HoA", "HeA", "C")


@dataclass(frozen=True)
class SampleSpec:
    n_points: int = 10   # N: retained time points per sample
    stride: int = 5      # N_t: spacing between retained points
    hop: int = 25        # N_tau: spacing between sample starts
    length: int = 1000   # L: recording length
    zero_based: bool = False  # reproduction-study alternative (first frame at offset 0)

    def __post_init__(self):
        if min(self.n_points, self.stride, self.hop) < 1:
            raise ConfigError("N, N_t and N_tau must all be >= 1")
        if (self.n_points - 1) * self.stride >= self.length:
            raise ConfigError("sample span (N-1)*N_t must be shorter than the recording")


def count_samples(spec: SampleSpec) -> int:
    """Number of samples whose retained time points all fall inside [1..L].

    Closed form of the enumeration: the last point of sample m sits at
    m*N_tau + N*N_t (1-based), so valid m run from 0 through
    (L - N*N_t) // N_tau. For the published configuration
    (N=10, N_t=5, N_tau=25, L=1000) this gives 39.
    """
    if spec.zero_based:
        span = (spec.n_points - 1) * spec.stride
        rem = spec.length - 1 - span
    else:
        rem = spec.length - spec.n_points * spec.stride
    return 0 if rem < 0 else rem // spec.hop + 1


def sample_frame_indices(spec: SampleSpec, m: int) -> np.ndarray:
    """0-based array rows of sample m's frames."""
    n = np.arange(1, spec.n_points + 1)
    if spec.zero_based:
        return m * spec.hop + (n - 1) * spec.stride
    return m * spec.hop + n * spec.stride - 1


@dataclass
class Sample:
    egm: np.ndarray     # (N, rows, cols), z-scored
    coords: np.ndarray  # (2, rows, cols), normalized to [0, 1]
    target: np.ndarray | None  # (3, m, m) tensor components or None
    sim_id: int
    m: int


def normalize(block: np.ndarray) -> np.ndarray:
    """Z-score each electrode over the time axis; flat channels become zeros."""
    block = np.asarray(block, dtype=np.float64)
    mean = block.mean(axis=0, keepdims=True)
    std = block.std(axis=0, keepdims=True)
    out = np.zeros_like(block)
    np.divide(block - mean, std, out=out, where=std > 0)
    return out


def coordinate_channels(rows: int, cols: int) -> np.ndarray:
    """Two channels holding each electrode's normalized (x, y) position."""
    x = np.linspace(0.0, 1.0, cols) if cols > 1 else np.zeros(1)
    y = np.linspace(0.0, 1.0, rows) if rows > 1 else np.zeros(1)
    xx, yy = np.meshgrid(x, y)
    return np.stack([xx, yy])


def extract_samples(egm, spec: SampleSpec, sim_id: int = 0) -> list[Sample]:
    """Cut an EgmArray into samples (targets unattached); frames are copies."""
    data = egm.data
    if data.shape[0] != spec.length:
        raise ConfigError(f"recording length {data.shape[0]} != spec L = {spec.length}")
    coords = coordinate_channels(*data.shape[1:])
    out = []
    for m in range(count_samples(spec)):
        frames = data[sample_frame_indices(spec, m)].copy()
        out.append(Sample(egm=normalize(frames), coords=coords.copy(),
                          target=None, sim_id=sim_id, m=m))
    return out


def add_noise(sample: Sample, sigma: float = NOISE_SIGMA_DEFAULT, seed: int = 0) -> Sample:
    """Gaussian white noise on EGM and coordinate channels, deterministic per seed."""
    if sigma == 0:
        return sample
    rng = np.random.default_rng(seed)
    egm = sample.egm + rng.normal(0.0, sigma, size=sample.egm.shape)
    coords = sample.coords + rng.normal(0.0, sigma, size=sample.coords.shape)
    return Sample(egm=egm, coords=coords, target=sample.target,
                  sim_id=sample.sim_id, m=sample.m)


def noise_seed(manifest_seed: int, epoch: int, sample_id: int) -> int:
    """Stable (non-salted) per-draw seed for on-the-fly training noise."""
    digest = hashlib.sha256(f"{manifest_seed}:{epoch}:{sample_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class SimRecord:
    sim_id: int
    kind: str  # HeI / HoA / HeA
    egm: object
    tensor: DiffusionTensorField


def assign_folds(records: list[SimRecord], n_folds: int, seed: int) -> dict[str, list[int]]:
    """Stratified-by-kind round-robin fold assignment over simulations."""
    if len(records) < n_folds:
        raise ConfigError(f"need at least {n_folds} simulations for {n_folds}-fold assignment")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D]))
    folds: dict[str, list[int]] = {str(f): [] for f in range(n_folds)}
    cursor = 0
    for kind in sorted({r.kind for r in records}):
        ids = sorted(r.sim_id for r in records if r.kind == kind)
        ids = [ids[i] for i in rng.permutation(len(ids))]
        for sid in ids:
            folds[str(cursor % n_folds)].append(sid)
            cursor += 1
    for f in folds.values():
        f.sort()
    return folds


def build_dataset(records: list[SimRecord], spec: SampleSpec, seed: int, out_dir,
                  n_folds: int = 10, noise_sigma: float = NOISE_SIGMA_DEFAULT,
                  target_size: int = TARGET_SIZE_DEFAULT,
                  upstream_hash: str | None = None) -> dict:
    """Write shards + manifest for a list of simulations; returns the manifest.

    Shards hold the z-scored clean samples (float32); training noise is meant
    to be drawn on the fly via ``add_noise``/``noise_seed``. Targets are the
    block-averaged tensor components at ``target_size``.
    """
    out_dir = Path(out_dir)
    (out_dir / "shards").mkdir(parents=True, exist_ok=True)
    (out_dir / "targets").mkdir(exist_ok=True)

    folds = assign_folds(records, n_folds, seed)
    rows, cols = records[0].egm.data.shape[1:]
    coords = coordinate_channels(rows, cols).astype(np.float32)
    coords.tofile(out_dir / "coords.raw")

    sims_meta, samples_meta = [], []
    counts: dict[str, int] = {}
    for rec in sorted(records, key=lambda r: r.sim_id):
        counts[rec.kind] = counts.get(rec.kind, 0) + 1
        samples = extract_samples(rec.egm, spec, sim_id=rec.sim_id)
        shard_rel = f"shards/sim_{rec.sim_id:04d}.raw"
        with open(out_dir / shard_rel, "wb") as fh:
            offset = 0
            for s in samples:
                block = s.egm.astype(np.float32)
                block.tofile(fh)
                samples_meta.append({"sim_id": rec.sim_id, "m": s.m,
                                     "shard": shard_rel, "offset": offset})
                offset += block.nbytes
        target = resample_tensor_field(rec.tensor, target_size)
        target_rel = f"targets/sim_{rec.sim_id:04d}.raw"
        target.components().astype(np.float32).tofile(out_dir / target_rel)
        sims_meta.append({"sim_id": rec.sim_id, "kind": rec.kind, "shard": shard_rel,
                          "target": target_rel, "n_samples": len(samples),
                          "target_dx_cm": target.dx})

    manifest = {
        "format_version": 1,
        "spec": asdict(spec),
        "seed": seed,
        "noise_sigma": noise_sigma,
        "grid": {"rows": rows, "cols": cols},
        "target_size": target_size,
        "coords": "coords.raw",
        "folds": folds,
        "class_counts": counts,
        "sims": sims_meta,
        "samples": samples_meta,
        "upstream_hash": upstream_hash,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


class DatasetReader:
    """Lock-free reader over the immutable shard files of a dataset directory."""

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise ConfigError(f"no dataset manifest at {manifest_path}")
        self.manifest = json.loads(manifest_path.read_text())
        self.spec = SampleSpec(**self.manifest["spec"])
        g = self.manifest["grid"]
        self.rows, self.cols = g["rows"], g["cols"]
        self.coords = np.fromfile(self.root / self.manifest["coords"],
                                  dtype=np.float32).reshape(2, self.rows, self.cols)
        self._targets: dict[int, np.ndarray] = {}
        self._sims = {s["sim_id"]: s for s in self.manifest["sims"]}

    def __len__(self) -> int:
        return len(self.manifest["samples"])

    def sim_ids(self, fold: str | None = None, exclude: bool = False) -> list[int]:
        if fold is None:
            return sorted(self._sims)
        member = set(self.manifest["folds"][str(fold)])
        if exclude:
            return sorted(set(self._sims) - member)
        return sorted(member)

    def target(self, sim_id: int) -> np.ndarray:
        if sim_id not in self._targets:
            meta = self._sims[sim_id]
            m = self.manifest["target_size"]
            self._targets[sim_id] = np.fromfile(
                self.root / meta["target"], dtype=np.float32).reshape(3, m, m)
        return self._targets[sim_id]

    def sample(self, index: int) -> Sample:
        meta = self.manifest["samples"][index]
        n = self.spec.n_points
        block = np.fromfile(self.root / meta["shard"], dtype=np.float32,
                            count=n * self.rows * self.cols,
                            offset=meta["offset"]).reshape(n, self.rows, self.cols)
        return Sample(egm=block, coords=self.coords.copy(),
                      target=self.target(meta["sim_id"]),
                      sim_id=meta["sim_id"], m=meta["m"])

    def sample_indices(self, sim_ids) -> list[int]:
        wanted = set(sim_ids)
        return [i for i, s in enumerate(self.manifest["samples"]) if s["sim_id"] in wanted]
