"""Command-line interface mirroring the pipeline CLI's flag conventions."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import torch

from .data import EgmDataset, save_field
from .model import ModelSpec, build_model, parameter_count
from .train import (TrainConfig, cross_validate, predict_field, train,
                    write_curves)


def _config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        seed=args.seed,
        mode=args.mode,
        coordconv=not args.no_coordconv,
    )


def cmd_train(args) -> int:
    data = EgmDataset(args.dataset)
    cfg = _config(args)
    train_sims, val_sims = data.fold_split(args.val_fold, cfg.mode)
    torch.manual_seed(cfg.seed)
    model = build_model(ModelSpec(coordconv=cfg.coordconv), data.n_points)
    print(f"train: {parameter_count(model)} parameters, "
          f"{len(train_sims)} train sims, {len(val_sims)} val sims")
    curves = train(model, data, data.indices_of(train_sims), cfg,
                   val_indices=data.indices_of(val_sims),
                   log=lambda r: print(f"  epoch {r['epoch']:3d} "
                                       f"train {r['train_rmse']:.4f} "
                                       f"val {r.get('val_rmse', float('nan')):.4f}"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out / "model.pt")
    (out / "model.json").write_text(json.dumps({
        "n_time_points": data.n_points,
        "coordconv": cfg.coordconv,
        "target_scale": cfg.target_scale,
        "val_fold": args.val_fold,
        "mode": cfg.mode,
    }, indent=2))
    write_curves(out / "curves.csv", curves)
    print(f"train: wrote {out / 'model.pt'}")
    return 0


def cmd_predict(args) -> int:
    data = EgmDataset(args.dataset)
    meta = json.loads((Path(args.model) / "model.json").read_text())
    model = build_model(ModelSpec(coordconv=meta["coordconv"]),
                        meta["n_time_points"])
    model.load_state_dict(torch.load(Path(args.model) / "model.pt",
                                     weights_only=True))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sims = ([int(s) for s in args.sims.split(",")] if args.sims
            else data.sim_ids(meta["mode"]))
    for sid in sims:
        inputs = [data.sample_input(i, coordconv=meta["coordconv"])
                  for i in data.indices_of([sid])]
        comps = predict_field(model, inputs, meta["target_scale"])
        save_field(out / f"sim_{sid:04d}.field", comps,
                   dx_cm=data.target_dx.get(sid) or 1.0)
    print(f"predict: wrote {len(sims)} field(s) to {out}")
    return 0


def cmd_crossval(args) -> int:
    cfg = _config(args)
    folds = args.folds.split(",") if args.folds else None
    summary = cross_validate(args.dataset, args.pipeline, args.out, cfg,
                             folds=folds,
                             log=(lambda r: print(f"  epoch {r['epoch']:3d} "
                                                  f"train {r['train_rmse']:.4f} "
                                                  f"val {r.get('val_rmse'):.4f}"))
                             if args.verbose else None)
    print(f"crossval: jaccard {summary['mean_jaccard']:.3f} "
          f"+/- {summary['sd_jaccard']:.3f}, rmse {summary['mean_rmse']:.3e} "
          f"over {len(summary['folds'])} fold(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nninverse",
        description="Train and evaluate the electrogram-to-conductivity network.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--dataset", required=True, help="dataset directory")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epochs", type=int, default=100)
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--weight-decay", type=float, default=1e-2)
        p.add_argument("--batch-size", type=int, default=16)
        p.add_argument("--mode", choices=("HeI", "HoA", "HeA", "C"), default="C")
        p.add_argument("--no-coordconv", action="store_true",
                       help="ablate the coordinate channels")

    p = sub.add_parser("train", help="train one model against one held-out fold")
    common(p)
    p.add_argument("--val-fold", default="0")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("crossval", help="k-fold cross-validation with pipeline eval")
    common(p)
    p.add_argument("--pipeline", required=True,
                   help="pipeline root containing fields/ (for eval)")
    p.add_argument("--folds", help="comma-separated subset of folds")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("predict", help="write predicted fields for simulations")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True, help="directory with model.pt/.json")
    p.add_argument("--out", required=True)
    p.add_argument("--sims", help="comma-separated sim ids (default: mode's sims)")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, KeyError, ValueError, RuntimeError) as exc:
        print(f"nninverse: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
