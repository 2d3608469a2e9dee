"""Raw-array serialization with sidecar JSON manifests.

Every array artifact is stored as a pair of files: ``<base>.raw`` holding the
little-endian binary payload (float32 for fields, uint8 for masks) and
``<base>.json`` describing shape and geometry. Manifests are written with
sorted keys and no timestamps so identical inputs produce identical bytes.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError

TENSOR_COMPONENTS = ["d_xx", "d_yy", "d_xy"]


def _write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _read_manifest(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"missing manifest {path}")
    return json.loads(path.read_text())


def manifest_hash(path: Path | str) -> str:
    """SHA-256 of a manifest file's bytes, used for staleness chaining."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_raw(base: Path | str, data: np.ndarray, meta: dict, dtype: str = "<f4") -> None:
    base = Path(base)
    arr = np.ascontiguousarray(data, dtype=np.dtype(dtype))
    arr.tofile(base.with_suffix(base.suffix + ".raw"))
    manifest = dict(meta)
    manifest["shape"] = list(arr.shape)
    manifest["dtype"] = dtype
    _write_manifest(base.with_suffix(base.suffix + ".json"), manifest)


def load_raw(base: Path | str) -> tuple[np.ndarray, dict]:
    base = Path(base)
    manifest = _read_manifest(base.with_suffix(base.suffix + ".json"))
    raw_path = base.with_suffix(base.suffix + ".raw")
    if not raw_path.exists():
        raise ConfigError(f"missing raw payload {raw_path}")
    arr = np.fromfile(raw_path, dtype=np.dtype(manifest["dtype"]))
    arr = arr.reshape(manifest["shape"])
    return arr, manifest


def save_tensor_field(base, field, seed=None, generator_config=None) -> None:
    """Store a DiffusionTensorField as 3 x n x n float32 plus geometry manifest."""
    data = np.stack([field.d_xx, field.d_yy, field.d_xy])
    meta = {
        "kind": "tensor_field",
        "components": TENSOR_COMPONENTS,
        "dx_cm": field.dx,
        "seed": seed,
        "generator_config": generator_config,
    }
    save_raw(base, data, meta)


def load_tensor_field(base):
    from .substrate import DiffusionTensorField

    data, manifest = load_raw(base)
    if manifest.get("kind") != "tensor_field":
        raise ConfigError(f"{base}: expected a tensor_field manifest, got {manifest.get('kind')}")
    data = data.astype(np.float64)
    return DiffusionTensorField(d_xx=data[0], d_yy=data[1], d_xy=data[2], dx=manifest["dx_cm"]), manifest


def save_mask(base, mask: np.ndarray, meta: dict | None = None) -> None:
    m = dict(meta or {})
    m["kind"] = "mask"
    save_raw(base, mask.astype(np.uint8), m, dtype="|u1")


def load_mask(base) -> tuple[np.ndarray, dict]:
    data, manifest = load_raw(base)
    if manifest.get("kind") != "mask":
        raise ConfigError(f"{base}: expected a mask manifest, got {manifest.get('kind')}")
    return data, manifest


def save_vm_stack(base, frames: np.ndarray, dt_record_ms: float, dx_cm: float,
                  v0_mv: float, vfi_mv: float) -> None:
    meta = {
        "kind": "vm_stack",
        "dt_record_ms": dt_record_ms,
        "dx_cm": dx_cm,
        "V0_mV": v0_mv,
        "Vfi_mV": vfi_mv,
    }
    save_raw(base, frames, meta)


def load_vm_stack(base) -> tuple[np.ndarray, dict]:
    data, manifest = load_raw(base)
    if manifest.get("kind") != "vm_stack":
        raise ConfigError(f"{base}: expected a vm_stack manifest, got {manifest.get('kind')}")
    return data.astype(np.float64), manifest


def save_egm(base, egm) -> None:
    g = egm.grid
    meta = {
        "kind": "egm",
        "sample_interval_ms": egm.sample_interval,
        "rows": g.rows,
        "cols": g.cols,
        "spacing_cm": g.spacing,
        "z_cm": g.z,
        "origin_cm": list(g.origin),
        "sigma_e": egm.sigma_e,
    }
    save_raw(base, egm.data, meta)


def load_egm(base):
    from .electrogram import EgmArray, ElectrodeGrid

    data, manifest = load_raw(base)
    if manifest.get("kind") != "egm":
        raise ConfigError(f"{base}: expected an egm manifest, got {manifest.get('kind')}")
    grid = ElectrodeGrid(
        rows=manifest["rows"],
        cols=manifest["cols"],
        spacing=manifest["spacing_cm"],
        z=manifest["z_cm"],
        origin=tuple(manifest["origin_cm"]),
    )
    return EgmArray(
        data=data.astype(np.float64),
        sample_interval=manifest["sample_interval_ms"],
        grid=grid,
        sigma_e=manifest["sigma_e"],
    ), manifest
