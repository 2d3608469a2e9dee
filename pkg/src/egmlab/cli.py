"""Command-line orchestration of the pipeline.

Stages write into subdirectories of one output root (``--out``):

    fields/   per-simulation tensor fields + masks   (gen)
    vm/       recorded V_m frame stacks              (simulate)
    egm/      electrode-grid recordings              (egm, or simulate --egm)
    dataset/  shards + manifest                      (dataset)
    reports/  metric and surrogate records           (eval, surrogate)
    plots/    rendered figures                       (plot)

Every stage manifest embeds the SHA-256 of its upstream manifest, so stale
artifacts are detected instead of silently mixed. Exit codes: 0 success,
2 validation/configuration failure, 3 numerical instability.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import multiprocessing
import sys
from pathlib import Path

import numpy as np

from . import fieldio
from .dataset import SampleSpec, SimRecord, build_dataset
from .electrogram import EgmRecorder, ElectrodeGrid
from .errors import ConfigError, EgmlabError, NumericalInstabilityError, StaleArtifactError
from .presets import Preset, get_preset, preset_from_dict
from .solver import SimConfig, StimulusProtocol, default_fk_params, run
from .stats import (JACCARD_THRESHOLD_DEFAULT, aggregate_surrogate_results,
                    jaccard, rmse, surrogate_test)
from .substrate import (AnisotropyParams, ScarCfg, gen_fibre_field,
                        gen_scar_map, resample_tensor_field, scar_cfg_to_dict,
                        tensor_from)

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE = 0, 2, 3

MODES = ("HeI", "HoA", "HeA", "C")
# Published composition of the combined dataset. The published class counts
# sum to 329 although the total is stated as 330; requesting exactly 330
# reproduces the published composition.
PAPER_CLASS_COUNTS = {"HeI": 107, "HoA": 186, "HeA": 36}


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _read_json(path: Path) -> dict:
    if not path.exists():
        stage = path.parent.name
        raise ConfigError(
            f"missing {path}; run the upstream '{_STAGE_OF.get(stage, stage)}' stage first")
    return json.loads(path.read_text())


_STAGE_OF = {"fields": "gen", "vm": "simulate", "egm": "egm", "dataset": "dataset"}


def _check_upstream(manifest: dict, upstream_path: Path) -> None:
    recorded = manifest.get("upstream_hash")
    if recorded is None:
        return
    actual = fieldio.manifest_hash(upstream_path)
    if actual != recorded:
        raise StaleArtifactError(
            f"{upstream_path} changed after downstream artifacts were built "
            f"(hash {actual[:12]} != recorded {recorded[:12]}); re-run the stage")


def _prepare_dir(path: Path, force: bool) -> None:
    if path.exists() and any(path.iterdir()):
        if not force:
            raise ConfigError(f"{path} already has contents; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def split_counts(mode: str, count: int) -> dict[str, int]:
    """Class composition for a generation request."""
    if mode != "C":
        return {mode: count}
    if count == 330:
        return dict(PAPER_CLASS_COUNTS)
    total = sum(PAPER_CLASS_COUNTS.values())
    quotas = {k: count * c / total for k, c in PAPER_CLASS_COUNTS.items()}
    out = {k: int(q) for k, q in quotas.items()}
    # largest remainder keeps the total exact
    remainders = sorted(quotas, key=lambda k: quotas[k] - out[k], reverse=True)
    for k in remainders[: count - sum(out.values())]:
        out[k] += 1
    return {k: v for k, v in out.items() if v > 0}


def _apply_preset_overrides(preset: Preset, overrides: dict) -> Preset:
    overrides = dict(overrides)
    sample = overrides.pop("sample", None)
    if sample is not None:
        overrides["sample"] = dataclasses.replace(preset.sample, **sample)
    if "stim_region" in overrides:
        overrides["stim_region"] = tuple(overrides["stim_region"])
    try:
        return dataclasses.replace(preset, **overrides)
    except TypeError as exc:
        raise ConfigError(f"bad preset override: {exc}") from None


def _load_config(args) -> dict:
    if not args.config:
        return {}
    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    if path.suffix == ".json":
        return json.loads(path.read_text())
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(path.read_text())
    raise ConfigError("config file must be .json or .toml")


def _resolve(args) -> tuple[Preset, int, int, Path]:
    doc = _load_config(args)
    preset_name = args.preset or doc.get("preset", "desk")
    preset = _apply_preset_overrides(get_preset(preset_name),
                                     doc.get("preset_overrides", {}))
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    jobs = args.jobs if args.jobs is not None else int(doc.get("jobs", 1))
    out = Path(args.out or doc.get("out", "pipeline"))
    return preset, seed, jobs, out


def _scar_cfg(preset: Preset, args) -> ScarCfg:
    overrides = dict(_load_config(args).get("scar", {}))
    for key in ("count_range", "radius_range", "fraction_bounds"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    try:
        return ScarCfg(n=preset.grid_n, **overrides)
    except TypeError as exc:
        raise ConfigError(f"bad scar override: {exc}") from None


def _electrode_grid(preset: Preset) -> ElectrodeGrid:
    return ElectrodeGrid(rows=preset.rows, cols=preset.cols, spacing=preset.spacing,
                         z=preset.z).centered(preset.domain_cm)


def _sim_config(preset: Preset, tensor) -> SimConfig:
    stim = StimulusProtocol(region=preset.stim_region, period=preset.stim_period,
                            pulse_width=preset.stim_width,
                            amplitude=preset.stim_amplitude)
    return SimConfig(tensor=tensor, params=default_fk_params(), stimulus=stim,
                     dx=preset.dx, dt=preset.dt, duration=preset.duration,
                     record_every=preset.record_every)


# ---------------------------------------------------------------------------
# gen

def cmd_gen(args) -> int:
    preset, seed, _, out = _resolve(args)
    fields_dir = out / "fields"
    _prepare_dir(fields_dir, args.force)

    counts = split_counts(args.mode, args.count)
    kinds = [k for k in ("HeI", "HoA", "HeA") for _ in range(counts.get(k, 0))]
    streams = np.random.SeedSequence(seed).spawn(max(len(kinds), 1))
    cfg = _scar_cfg(preset, args)
    sims = []
    for sim_id, kind in enumerate(kinds):
        sim_seed = int(streams[sim_id].generate_state(1)[0])
        scar = fibre = None
        aniso = AnisotropyParams(d_l=None, lam=1.0)
        if kind in ("HeI", "HeA"):
            scar = gen_scar_map(sim_seed, cfg)
        if kind in ("HoA", "HeA"):
            fibre = gen_fibre_field(sim_seed, preset.grid_n)
            aniso = AnisotropyParams(d_l=cfg.d_healthy, lam=4.0)
        tensor = tensor_from(scar, fibre, aniso)
        tensor.dx = preset.dx
        base = fields_dir / f"sim_{sim_id:04d}.field"
        fieldio.save_tensor_field(base, tensor, seed=sim_seed,
                                  generator_config={"kind": kind,
                                                    "scar": scar_cfg_to_dict(cfg)})
        if scar is not None:
            fieldio.save_mask(fields_dir / f"sim_{sim_id:04d}.mask", scar.mask,
                              {"sim_id": sim_id, "seed": sim_seed})
        entry = {"sim_id": sim_id, "kind": kind, "seed": sim_seed}
        if fibre is not None:
            entry["control_points"] = np.asarray(fibre.control_points).tolist()
        sims.append(entry)

    _write_json(fields_dir / "manifest.json", {
        "format_version": 1,
        "mode": args.mode,
        "count": len(kinds),
        "class_counts": counts,
        "seed": seed,
        "preset": preset.to_dict(),
        "scar_config": scar_cfg_to_dict(cfg),
        "sims": sims,
    })
    print(f"gen: wrote {len(kinds)} field(s) to {fields_dir} "
          f"({', '.join(f'{k}={v}' for k, v in counts.items())})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / egm

def _simulate_one(out_str: str, sim_id: int, preset_doc: dict,
                  write_vm: bool, write_egm: bool, coarsen: int) -> dict:
    out = Path(out_str)
    preset = preset_from_dict(preset_doc)
    tensor, _ = fieldio.load_tensor_field(out / "fields" / f"sim_{sim_id:04d}.field")
    cfg = _sim_config(preset, tensor)
    params = cfg.params

    recorder = None
    if write_egm:
        recorder = EgmRecorder(_electrode_grid(preset), tensor.shape, preset.dx,
                               sigma_e=preset.sigma_e,
                               sample_interval=1.0,
                               frame_interval=preset.record_every,
                               coarsen=coarsen)
    frames = [] if write_vm else None

    def sink(t, vm):
        if recorder is not None:
            recorder.consume(t, vm)
        if frames is not None:
            frames.append(vm.astype(np.float32))

    summary = run(cfg, sink)
    if write_vm:
        stack = np.stack(frames) if frames else np.zeros((0,) + tensor.shape, np.float32)
        fieldio.save_vm_stack(out / "vm" / f"sim_{sim_id:04d}.vm", stack,
                              dt_record_ms=preset.record_every, dx_cm=preset.dx,
                              v0_mv=params.V_0, vfi_mv=params.V_fi)
    if recorder is not None:
        fieldio.save_egm(out / "egm" / f"sim_{sim_id:04d}.egm", recorder.result())
    return {"sim_id": sim_id, "steps": summary.steps, "frames": summary.frames,
            "min_u": summary.min_u, "max_u": summary.max_u,
            "activation_fraction": summary.activation_fraction}


def _parse_sims(arg, available):
    if not arg:
        return sorted(available)
    wanted = [int(x) for x in arg.split(",")]
    missing = set(wanted) - set(available)
    if missing:
        raise ConfigError(f"unknown sim ids {sorted(missing)}")
    return wanted


def cmd_simulate(args) -> int:
    preset, _, jobs, out = _resolve(args)
    fields_manifest = _read_json(out / "fields" / "manifest.json")
    preset_doc = fields_manifest["preset"]
    write_vm = not args.no_vm
    if not write_vm and not args.egm:
        raise ConfigError("--no-vm without --egm would discard the whole run")
    sim_ids = _parse_sims(args.sims, [s["sim_id"] for s in fields_manifest["sims"]])
    if write_vm:
        _prepare_dir(out / "vm", args.force)
    if args.egm:
        _prepare_dir(out / "egm", args.force)

    coarsen = args.coarsen or preset_doc.get("egm_coarsen", 1)
    work = [(str(out), sid, preset_doc, write_vm, bool(args.egm), coarsen)
            for sid in sim_ids]
    if jobs > 1:
        # spawn: forking is unsafe once numba's OpenMP threads exist
        ctx = multiprocessing.get_context("spawn")
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs,
                                                    mp_context=ctx) as pool:
            summaries = list(pool.map(_simulate_one, *zip(*work)))
    else:
        summaries = [_simulate_one(*w) for w in work]

    upstream = fieldio.manifest_hash(out / "fields" / "manifest.json")
    doc = {
        "format_version": 1,
        "upstream_hash": upstream,
        "preset": preset_doc,
        "sims": sorted(summaries, key=lambda s: s["sim_id"]),
    }
    if write_vm:
        _write_json(out / "vm" / "manifest.json", doc)
    if args.egm:
        _write_json(out / "egm" / "manifest.json",
                    {**doc, "coarsen": coarsen, "source": "inline"})
    print(f"simulate: {len(summaries)} run(s) complete")
    return EXIT_OK


def cmd_egm(args) -> int:
    preset, _, _, out = _resolve(args)
    vm_manifest = _read_json(out / "vm" / "manifest.json")
    _check_upstream(vm_manifest, out / "fields" / "manifest.json")
    preset_doc = vm_manifest["preset"]
    grid = ElectrodeGrid(rows=preset_doc["rows"], cols=preset_doc["cols"],
                         spacing=preset_doc["spacing"], z=preset_doc["z"])
    grid = grid.centered(preset_doc["grid_n"] * preset_doc["dx"])
    coarsen = args.coarsen or preset_doc.get("egm_coarsen", 1)
    _prepare_dir(out / "egm", args.force)

    sim_ids = _parse_sims(args.sims, [s["sim_id"] for s in vm_manifest["sims"]])
    for sid in sim_ids:
        base = out / "vm" / f"sim_{sid:04d}.vm"
        meta = _read_json(base.with_suffix(".vm.json"))
        shape = meta["shape"]
        stack = np.memmap(base.with_suffix(".vm.raw"), dtype=np.dtype(meta["dtype"]),
                          mode="r", shape=tuple(shape))
        rec = EgmRecorder(grid, tuple(shape[1:]), meta["dx_cm"],
                          sigma_e=preset_doc["sigma_e"], sample_interval=1.0,
                          frame_interval=meta["dt_record_ms"], coarsen=coarsen)
        for t_idx in range(shape[0]):
            rec.consume((t_idx + 1) * meta["dt_record_ms"],
                        np.asarray(stack[t_idx], dtype=np.float64))
        fieldio.save_egm(out / "egm" / f"sim_{sid:04d}.egm", rec.result())

    _write_json(out / "egm" / "manifest.json", {
        "format_version": 1,
        "upstream_hash": fieldio.manifest_hash(out / "vm" / "manifest.json"),
        "preset": preset_doc,
        "coarsen": coarsen,
        "source": "vm",
        "sims": [{"sim_id": sid} for sid in sim_ids],
    })
    print(f"egm: recorded {len(sim_ids)} grid(s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# dataset

def cmd_dataset(args) -> int:
    preset, seed, _, out = _resolve(args)
    egm_manifest = _read_json(out / "egm" / "manifest.json")
    fields_manifest = _read_json(out / "fields" / "manifest.json")
    preset_doc = egm_manifest["preset"]
    sample = SampleSpec(**preset_doc["sample"])
    if args.n_points:
        sample = dataclasses.replace(sample, n_points=args.n_points,
                                     stride=args.stride or sample.stride,
                                     hop=args.hop or sample.hop)
    kinds = {s["sim_id"]: s["kind"] for s in fields_manifest["sims"]}

    records = []
    for entry in egm_manifest["sims"]:
        sid = entry["sim_id"]
        egm, _ = fieldio.load_egm(out / "egm" / f"sim_{sid:04d}.egm")
        tensor, _ = fieldio.load_tensor_field(out / "fields" / f"sim_{sid:04d}.field")
        records.append(SimRecord(sim_id=sid, kind=kinds[sid], egm=egm, tensor=tensor))

    dataset_dir = out / "dataset"
    _prepare_dir(dataset_dir, args.force)
    manifest = build_dataset(
        records, sample, seed, dataset_dir,
        n_folds=args.folds or preset_doc.get("folds", 10),
        target_size=args.target_size or preset_doc.get("target_size", 96),
        upstream_hash=fieldio.manifest_hash(out / "egm" / "manifest.json"))
    print(f"dataset: {len(manifest['samples'])} samples from "
          f"{len(records)} sims -> {dataset_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / surrogate

def _iter_eval_pairs(out: Path, pred_dir: Path):
    fields_manifest = _read_json(out / "fields" / "manifest.json")
    for entry in fields_manifest["sims"]:
        sid = entry["sim_id"]
        pred_base = pred_dir / f"sim_{sid:04d}.field"
        if not pred_base.with_suffix(".field.json").exists():
            continue
        pred, _ = fieldio.load_tensor_field(pred_base)
        truth, _ = fieldio.load_tensor_field(out / "fields" / f"sim_{sid:04d}.field")
        if pred.shape != truth.shape:
            truth = resample_tensor_field(truth, pred.shape[0])
        yield sid, entry["kind"], truth, pred


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def cmd_eval(args) -> int:
    _, _, _, out = _resolve(args)
    pred_dir = Path(args.pred_dir)
    if not pred_dir.exists():
        raise ConfigError(f"prediction directory {pred_dir} not found")
    threshold = args.threshold or JACCARD_THRESHOLD_DEFAULT
    rows = []
    for sid, kind, truth, pred in _iter_eval_pairs(out, pred_dir):
        rows.append({
            "sim_id": sid,
            "kind": kind,
            "rmse": rmse(truth.components(), pred.components()),
            "rmse_dxx": rmse(truth.d_xx, pred.d_xx),
            "jaccard": jaccard(truth, pred, threshold),
        })
    if not rows:
        raise ConfigError(f"no matching sim_XXXX.field predictions in {pred_dir}")
    reports = out / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    aggregate = {
        "n": len(rows),
        "mean_rmse": float(np.mean([r["rmse"] for r in rows])),
        "mean_rmse_dxx": float(np.mean([r["rmse_dxx"] for r in rows])),
        "mean_jaccard": float(np.mean([r["jaccard"] for r in rows])),
        "threshold": threshold,
    }
    _write_json(reports / "eval.json", {"records": rows, "aggregate": aggregate})
    _write_csv(reports / "eval.csv", rows)
    print(f"eval: {len(rows)} record(s); mean rmse {aggregate['mean_rmse']:.3e}, "
          f"mean jaccard {aggregate['mean_jaccard']:.3f}")
    return EXIT_OK


def cmd_surrogate(args) -> int:
    _, seed, _, out = _resolve(args)
    pred_dir = Path(args.pred_dir)
    rows, results = [], []
    for sid, kind, truth, pred in _iter_eval_pairs(out, pred_dir):
        res = surrogate_test(pred, truth, count=args.count, seed=seed + sid,
                             source=args.source, method=args.method)
        results.append(res)
        rec = res.to_record(sim_id=sid, jaccard_value=jaccard(truth, pred))
        rec["kind"] = kind
        rows.append(rec)
    if not rows:
        raise ConfigError(f"no matching sim_XXXX.field predictions in {pred_dir}")
    reports = out / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    aggregate = aggregate_surrogate_results(results)
    _write_json(reports / "surrogate.json", {"records": rows, "aggregate": aggregate})
    _write_csv(reports / "surrogate.csv", rows)
    print(f"surrogate: {len(rows)} record(s); median percentile "
          f"{aggregate['median_percentile']:.3f}, welch p {aggregate['welch_p']:.4g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot

def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    artifact = Path(args.artifact)
    if artifact.suffix == ".json" and artifact.name != "manifest.json":
        artifact = artifact.with_suffix("")
    out_path = Path(args.output)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    if artifact.suffix == ".raw":
        artifact = artifact.with_suffix("")
    if artifact.suffix == ".csv":
        rows = list(csv.DictReader(open(artifact)))
        if not rows:
            raise ConfigError(f"{artifact} is empty")
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = np.arange(len(rows))
        for key in rows[0]:
            try:
                ys = np.array([float(r[key]) for r in rows])
            except ValueError:
                continue
            ax.plot(xs, ys, label=key)
        ax.legend(fontsize=7)
        fig.savefig(out_path, dpi=120)
        print(f"plot: {out_path}")
        return EXIT_OK

    meta_path = artifact.with_suffix(artifact.suffix + ".json")
    if not meta_path.exists():
        raise ConfigError(f"unknown artifact {args.artifact} (no sidecar manifest)")
    meta = json.loads(meta_path.read_text())
    kind = meta.get("kind")

    if kind == "tensor_field":
        data, _ = fieldio.load_raw(artifact)
        fig, axes = plt.subplots(1, 3, figsize=(12, 4))
        for ax, comp, name in zip(axes, data, meta["components"]):
            im = ax.imshow(comp, origin="lower", cmap="magma")
            ax.set_title(name)
            fig.colorbar(im, ax=ax, shrink=0.8)
        fig.savefig(out_path, dpi=120)
    elif kind == "mask":
        data, _ = fieldio.load_raw(artifact)
        import matplotlib.image
        matplotlib.image.imsave(out_path, data.astype(float), cmap="gray",
                                vmin=0.0, vmax=1.0, origin="lower")
    elif kind == "vm_stack":
        data, _ = fieldio.load_raw(artifact)
        n_panel = min(6, data.shape[0]) or 1
        picks = np.linspace(0, max(data.shape[0] - 1, 0), n_panel).astype(int)
        fig, axes = plt.subplots(1, n_panel, figsize=(3 * n_panel, 3))
        axes = np.atleast_1d(axes)
        for ax, t_idx in zip(axes, picks):
            frame = data[t_idx] if data.shape[0] else np.zeros(data.shape[1:])
            ax.imshow(frame, origin="lower", cmap="viridis")
            ax.set_title(f"t = {(t_idx + 1) * meta['dt_record_ms']:.0f} ms")
        fig.savefig(out_path, dpi=120)
    elif kind == "egm":
        egm, _ = fieldio.load_egm(artifact)
        iy, ix = (egm.grid.rows // 2, egm.grid.cols // 2)
        if args.electrode:
            iy, ix = (int(v) for v in args.electrode.split(","))
        trace = egm.data[:, iy, ix]
        t = (1 + np.arange(len(trace))) * egm.sample_interval
        if args.csv:
            _write_csv(Path(args.csv), [{"t_ms": float(tt), "phi_e": float(vv)}
                                        for tt, vv in zip(t, trace)])
        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(t, trace, lw=0.9)
        ax.set_xlabel("t (ms)")
        ax.set_ylabel(f"phi_e electrode ({iy},{ix})")
        fig.tight_layout()
        fig.savefig(out_path, dpi=120)
    else:
        raise ConfigError(f"unknown artifact kind {kind!r}")
    print(f"plot: {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egmlab",
        description="Synthetic cardiac substrates, monodomain simulation, "
                    "electrograms, datasets and surrogate evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="pipeline output root (default: pipeline)")
        p.add_argument("--preset", choices=("desk", "paper", "mini"),
                       help="geometry preset (default: desk)")
        p.add_argument("--config", help="JSON/TOML config file")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--jobs", type=int, help="parallel workers (default 1)")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing stage outputs")

    p = sub.add_parser("gen", help="generate conductivity substrates")
    common(p)
    p.add_argument("--mode", choices=MODES, default="HeI")
    p.add_argument("--count", type=int, required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="run the monodomain solver per substrate")
    common(p)
    p.add_argument("--sims", help="comma-separated sim ids (default: all)")
    p.add_argument("--egm", action="store_true",
                   help="record electrograms inline during the run")
    p.add_argument("--no-vm", action="store_true",
                   help="skip writing V_m stacks (requires --egm)")
    p.add_argument("--coarsen", type=int,
                   help="EGM integral coarsening factor (default: preset)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("egm", help="compute electrograms from stored V_m stacks")
    common(p)
    p.add_argument("--sims", help="comma-separated sim ids (default: all)")
    p.add_argument("--coarsen", type=int)
    p.set_defaults(func=cmd_egm)

    p = sub.add_parser("dataset", help="slice EGMs into a training dataset")
    common(p)
    p.add_argument("--n-points", type=int, help="override sample N")
    p.add_argument("--stride", type=int, help="override sample N_t")
    p.add_argument("--hop", type=int, help="override sample N_tau")
    p.add_argument("--folds", type=int)
    p.add_argument("--target-size", type=int)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("eval", help="score predicted fields against the truth")
    common(p)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--threshold", type=float,
                   help="scar binarization threshold (default: midpoint)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("surrogate", help="surrogate significance test of predictions")
    common(p)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--source", choices=("prediction", "truth"), default="prediction")
    p.add_argument("--method", choices=("phase", "permute"), default="phase")
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("plot", help="render an artifact to PNG (and CSV for traces)")
    common(p)
    p.add_argument("artifact", help="path to a .raw/.json artifact base or csv")
    p.add_argument("output", help="output image path")
    p.add_argument("--electrode", help="row,col for EGM traces")
    p.add_argument("--csv", help="also write the trace as CSV")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalInstabilityError as exc:
        print(f"egmlab: numerical instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (EgmlabError, OSError) as exc:
        print(f"egmlab: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
