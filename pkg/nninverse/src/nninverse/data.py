"""Reader for electrogram dataset directories and writer for field files.

The dataset layout is the producer's external contract: ``manifest.json``
plus raw little-endian float32 shards (clean z-scored samples), one target
file of three stacked 96 x 96 tensor components per simulation, and a shared
coordinate-channel file. Training noise is drawn on the fly; the per-draw
seed convention (sha256 over "manifest_seed:epoch:sample_index") matches the
producer's, so noise realizations are reproducible across tools.

Predicted fields are written in the same raw + sidecar-JSON format the
evaluation CLI consumes.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def noise_seed(manifest_seed: int, epoch: int, sample_index: int) -> int:
    digest = hashlib.sha256(f"{manifest_seed}:{epoch}:{sample_index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class SampleInput:
    sim_id: int
    x: np.ndarray  # (N [+2], rows, cols) float32


class EgmDataset:
    """In-memory view of one dataset directory."""

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no dataset manifest at {manifest_path}")
        self.manifest = json.loads(manifest_path.read_text())
        spec = self.manifest["spec"]
        self.n_points = spec["n_points"]
        self.rows = self.manifest["grid"]["rows"]
        self.cols = self.manifest["grid"]["cols"]
        self.noise_sigma = float(self.manifest["noise_sigma"])
        self.seed = int(self.manifest["seed"])
        self.target_size = int(self.manifest["target_size"])
        self.folds = {k: list(v) for k, v in self.manifest["folds"].items()}
        self.kind_of = {s["sim_id"]: s["kind"] for s in self.manifest["sims"]}
        self.target_dx = {s["sim_id"]: s.get("target_dx_cm") for s in self.manifest["sims"]}

        self.coords = np.fromfile(self.root / self.manifest["coords"],
                                  dtype=np.float32).reshape(2, self.rows, self.cols)
        block = self.n_points * self.rows * self.cols
        self._egm = []
        self._sim_of = []
        for meta in self.manifest["samples"]:
            arr = np.fromfile(self.root / meta["shard"], dtype=np.float32,
                              count=block, offset=meta["offset"])
            self._egm.append(arr.reshape(self.n_points, self.rows, self.cols))
            self._sim_of.append(meta["sim_id"])
        self._targets = {}
        for s in self.manifest["sims"]:
            m = self.target_size
            self._targets[s["sim_id"]] = np.fromfile(
                self.root / s["target"], dtype=np.float32).reshape(3, m, m)

    def __len__(self) -> int:
        return len(self._egm)

    def sim_ids(self, mode: str = "C") -> list[int]:
        ids = sorted(self.kind_of)
        if mode == "C":
            return ids
        return [s for s in ids if self.kind_of[s] == mode]

    def fold_split(self, fold: str, mode: str = "C") -> tuple[list[int], list[int]]:
        """(train_sims, test_sims) for one fold, optionally mode-filtered."""
        if str(fold) not in self.folds:
            raise KeyError(f"fold {fold!r} not in manifest")
        allowed = set(self.sim_ids(mode))
        test = sorted(set(self.folds[str(fold)]) & allowed)
        train = sorted(allowed - set(test))
        return train, test

    def indices_of(self, sim_ids) -> list[int]:
        wanted = set(sim_ids)
        return [i for i, sid in enumerate(self._sim_of) if sid in wanted]

    def target(self, sim_id: int) -> np.ndarray:
        return self._targets[sim_id]

    def sample_input(self, index: int, epoch: int | None = None,
                     coordconv: bool = True) -> SampleInput:
        """Model input for one sample; `epoch` draws that epoch's noise."""
        egm = self._egm[index]
        coords = self.coords
        if epoch is not None and self.noise_sigma > 0:
            rng = np.random.default_rng(noise_seed(self.seed, epoch, index))
            egm = egm + rng.normal(0.0, self.noise_sigma,
                                   size=egm.shape).astype(np.float32)
            coords = coords + rng.normal(0.0, self.noise_sigma,
                                         size=coords.shape).astype(np.float32)
        x = np.concatenate([egm, coords]) if coordconv else egm.copy()
        return SampleInput(sim_id=self._sim_of[index], x=x)


def save_field(base, components: np.ndarray, dx_cm: float, note: str = "nninverse") -> None:
    """Write a (3, m, m) tensor-field prediction in the pipeline file format."""
    base = Path(base)
    arr = np.ascontiguousarray(components, dtype="<f4")
    arr.tofile(base.with_suffix(base.suffix + ".raw"))
    manifest = {
        "kind": "tensor_field",
        "components": ["d_xx", "d_yy", "d_xy"],
        "dx_cm": dx_cm,
        "shape": list(arr.shape),
        "dtype": "<f4",
        "seed": None,
        "generator_config": {"source": note},
    }
    base.with_suffix(base.suffix + ".json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")
