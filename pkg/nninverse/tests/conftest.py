"""Fixtures that build real pipeline datasets through the pipeline CLI.

The quick pipeline is a small geometry for unit tests; the desk pipeline is
the reduced-resolution 45-simulation set used by the acceptance criteria.
Both are deterministic, so they are cached under the system temp directory
keyed by their configuration hash and reused across runs.
"""
import hashlib
import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import pytest

QUICK_CFG = {
    "preset": "mini",
    "seed": 3,
    "preset_overrides": {
        "grid_n": 100,
        "duration": 60.0,
        "stim_region": [0.0, 0.0, 0.12, 0.12],
        "rows": 8, "cols": 8, "spacing": 0.1,
        "sample": {"n_points": 5, "stride": 2, "hop": 10, "length": 60},
        "target_size": 96,
        "folds": 2,
    },
}

DESK_CFG = {
    "preset": "desk",
    "seed": 11,
    "preset_overrides": {
        "grid_n": 150, "dx": 0.02, "dt": 0.05, "duration": 250.0,
        "stim_region": [0.0, 0.0, 0.3, 0.3],
        "sample": {"length": 250},
        "target_size": 96,
        "folds": 3,
    },
    # blob-diameter / electrode-spacing matched to the full-scale task
    "scar": {
        "radius_range": [0.10, 0.22],
        "fraction_bounds": [0.04, 0.30],
        "count_range": [1, 2],
    },
}


def _egmlab():
    exe = shutil.which("egmlab")
    return [exe] if exe else [sys.executable, "-m", "egmlab.cli"]


def _build(cfg_doc: dict, mode: str, count: int, jobs: int = 2) -> Path:
    key = hashlib.sha256(json.dumps(
        {"cfg": cfg_doc, "mode": mode, "count": count}, sort_keys=True
    ).encode()).hexdigest()[:16]
    root = Path(tempfile.gettempdir()) / f"nninverse_fixture_{key}"
    if (root / "pipe" / "dataset" / "manifest.json").exists():
        return root / "pipe"
    if root.exists():
        shutil.rmtree(root)
    root.mkdir(parents=True)
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps(cfg_doc))
    pipe = root / "pipe"
    base = _egmlab()
    for cmd in (
        ["gen", "--out", pipe, "--config", cfg, "--mode", mode, "--count", str(count)],
        ["simulate", "--out", pipe, "--config", cfg, "--egm", "--no-vm",
         "--jobs", str(jobs)],
        ["dataset", "--out", pipe, "--config", cfg],
    ):
        proc = subprocess.run([str(c) for c in base + cmd],
                              capture_output=True, text=True)
        if proc.returncode != 0:
            shutil.rmtree(root, ignore_errors=True)
            raise RuntimeError(f"pipeline stage {cmd[0]} failed: {proc.stderr}")
    return pipe


@pytest.fixture(scope="session")
def quick_pipeline() -> Path:
    return _build(QUICK_CFG, "HeI", 8)


@pytest.fixture(scope="session")
def desk_pipeline() -> Path:
    return _build(DESK_CFG, "HeI", 60)
