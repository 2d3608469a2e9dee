"""Training, prediction and cross-validation for the inverse model.

The loss is the RMSE between the 5-channel output and the stacked target:
three tensor components scaled by ``target_scale`` (diffusivities are
~1e-3 cm^2/ms, coordinates are order one) plus the clean normalized output
coordinate grid. Validation RMSE is reported on the tensor channels only so
CoordConv and ablated variants are directly comparable. Noise is re-drawn
every epoch with the dataset's seed convention; training is deterministic
for a fixed seed and serial data order.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import shutil
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import EgmDataset, SampleInput, save_field
from .model import ModelSpec, build_model, coordinate_grid

TARGET_SCALE_DEFAULT = 1_000.0  # cm^2/ms -> ~unit range


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    weight_decay: float = 1e-2  # decoupled (AdamW)
    batch_size: int = 16
    seed: int = 0
    mode: str = "C"
    target_scale: float = TARGET_SCALE_DEFAULT
    coordconv: bool = True


def rmse_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return torch.sqrt(torch.mean((pred - target) ** 2) + 1e-12)


def _target_tensor(data: EgmDataset, sim_id: int, cfg: TrainConfig,
                   coords96: torch.Tensor) -> torch.Tensor:
    comps = torch.from_numpy(data.target(sim_id).copy()).float() * cfg.target_scale
    if not cfg.coordconv:
        return comps
    return torch.cat([comps, coords96[0]], dim=0)


def _batch(data: EgmDataset, indices, cfg: TrainConfig, coords96, epoch=None):
    xs, ys = [], []
    for idx in indices:
        s = data.sample_input(idx, epoch=epoch, coordconv=cfg.coordconv)
        xs.append(torch.from_numpy(s.x).float())
        ys.append(_target_tensor(data, s.sim_id, cfg, coords96))
    return torch.stack(xs), torch.stack(ys)


def evaluate_rmse(model, data: EgmDataset, indices, cfg: TrainConfig,
                  coords96) -> float:
    """Clean-input RMSE over the tensor channels (scaled space)."""
    model.eval()
    errs = []
    with torch.no_grad():
        for start in range(0, len(indices), cfg.batch_size):
            chunk = indices[start:start + cfg.batch_size]
            x, y = _batch(data, chunk, cfg, coords96, epoch=None)
            out = model(x)
            errs.append(float(torch.mean((out[:, :3] - y[:, :3]) ** 2) * x.shape[0]))
    return float(np.sqrt(sum(errs) / len(indices)))


def train(model, data: EgmDataset, train_indices, cfg: TrainConfig,
          val_indices=None, log=None) -> list[dict]:
    """Optimize with AdamW; returns per-epoch loss-curve records."""
    torch.manual_seed(cfg.seed)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr,
                            weight_decay=cfg.weight_decay)
    coords96 = coordinate_grid(model.spec.output_size)
    order_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xB47C]))
    curves = []
    for epoch in range(cfg.epochs):
        model.train()
        perm = order_rng.permutation(len(train_indices))
        epoch_losses = []
        for start in range(0, len(perm), cfg.batch_size):
            chunk = [train_indices[i] for i in perm[start:start + cfg.batch_size]]
            x, y = _batch(data, chunk, cfg, coords96, epoch=epoch)
            loss = rmse_loss(model(x), y)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch} (loss {loss.item()}); "
                    f"lr={cfg.lr}, batch={cfg.batch_size}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(float(loss))
        record = {"epoch": epoch, "train_rmse": float(np.mean(epoch_losses))}
        if val_indices:
            record["val_rmse"] = evaluate_rmse(model, data, val_indices, cfg, coords96)
        curves.append(record)
        if log:
            log(record)
    return curves


def predict_field(model, sample_inputs: list[SampleInput],
                  target_scale: float = TARGET_SCALE_DEFAULT) -> np.ndarray:
    """Average the per-sample estimates of one simulation.

    Returns the unscaled (3, m, m) tensor components; the coordinate output
    channels are dropped. All samples must come from the same simulation.
    """
    if not sample_inputs:
        raise ValueError("need at least one sample")
    sim_ids = {s.sim_id for s in sample_inputs}
    if len(sim_ids) != 1:
        raise ValueError(f"mixed simulations in prediction input: {sorted(sim_ids)}")
    model.eval()
    acc = None
    with torch.no_grad():
        for s in sample_inputs:
            out = model(torch.from_numpy(s.x).float().unsqueeze(0))[0, :3]
            acc = out if acc is None else acc + out
    return (acc / len(sample_inputs)).numpy() / target_scale


def write_curves(path: Path, curves: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(curves[0]))
        writer.writeheader()
        writer.writerows(curves)


def _eval_command() -> list[str]:
    exe = shutil.which("egmlab")
    if exe:
        return [exe]
    return [sys.executable, "-m", "egmlab.cli"]


def run_pipeline_eval(pipeline_root: Path, pred_dir: Path) -> dict:
    """Score predictions through the pipeline CLI (file-level interface)."""
    cmd = _eval_command() + ["eval", "--out", str(pipeline_root),
                             "--pred-dir", str(pred_dir)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"eval failed ({proc.returncode}): {proc.stderr.strip()}")
    return json.loads((pipeline_root / "reports" / "eval.json").read_text())


def cross_validate(dataset_dir, pipeline_root, out_dir, cfg: TrainConfig,
                   folds=None, epochs=None, log=None) -> dict:
    """Train one model per fold, write held-out predictions, score via the
    pipeline eval command, and aggregate fold metrics."""
    data = EgmDataset(dataset_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipeline_root = Path(pipeline_root)
    cfg = dataclasses.replace(cfg, epochs=epochs or cfg.epochs)

    fold_names = folds if folds is not None else sorted(data.folds, key=int)
    fold_metrics = []
    for fold in fold_names:
        train_sims, test_sims = data.fold_split(fold, cfg.mode)
        if not test_sims:
            continue
        train_idx = data.indices_of(train_sims)
        val_idx = data.indices_of(test_sims)
        torch.manual_seed(cfg.seed + int(fold))
        model = build_model(ModelSpec(coordconv=cfg.coordconv), data.n_points)
        curves = train(model, data, train_idx, cfg, val_indices=val_idx, log=log)
        write_curves(out_dir / f"curves_fold_{fold}.csv", curves)

        pred_dir = out_dir / f"fold_{fold}" / "preds"
        pred_dir.mkdir(parents=True, exist_ok=True)
        for sid in test_sims:
            inputs = [data.sample_input(i, coordconv=cfg.coordconv)
                      for i in data.indices_of([sid])]
            comps = predict_field(model, inputs, cfg.target_scale)
            dx = data.target_dx.get(sid) or 1.0
            save_field(pred_dir / f"sim_{sid:04d}.field", comps, dx_cm=dx)
        report = run_pipeline_eval(pipeline_root, pred_dir)
        (out_dir / f"fold_{fold}_eval.json").write_text(json.dumps(report, indent=2))
        fold_metrics.append({
            "fold": fold,
            "n_test_sims": len(test_sims),
            "mean_rmse": report["aggregate"]["mean_rmse"],
            "mean_jaccard": report["aggregate"]["mean_jaccard"],
            "final_train_rmse": curves[-1]["train_rmse"],
            "final_val_rmse": curves[-1]["val_rmse"],
        })

    summary = {
        "folds": fold_metrics,
        "mean_jaccard": float(np.mean([f["mean_jaccard"] for f in fold_metrics])),
        "sd_jaccard": float(np.std([f["mean_jaccard"] for f in fold_metrics])),
        "mean_rmse": float(np.mean([f["mean_rmse"] for f in fold_metrics])),
        "sd_rmse": float(np.std([f["mean_rmse"] for f in fold_metrics])),
    }
    (out_dir / "crossval.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary
