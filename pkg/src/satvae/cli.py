"""Command-line entrypoint.

Command tree:
    data stats | harmonize | split | inspect
    distill
    train
    eval
    sr train | sample | baseline-train | baseline-sample
    bench run

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid config.
Outputs always go to --out/--out-dir; input manifests are never rewritten.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import torch

from . import bench as bench_mod
from .data import (
    DatasetManifest,
    Modality,
    Split,
    SplitRatios,
    checkerboard_split,
    compute_stats,
    detect_baseline_shift,
    harmonize_corpus,
    load_tile,
    make_recon_corpus,
    make_sr_corpus,
)
from .data.types import NormalizationStats
from .diffusion import (
    NoiseSchedule,
    SRPipelineConfig,
    SRTrainConfig,
    UNetConfig,
    build_unet,
    infer_pixel_baseline,
    infer_sr,
    load_denoiser,
    tiny_unet_config,
    train_pixel_baseline,
    train_sr,
)
from .exceptions import ConfigError, SatVAEError
from .metrics import evaluate_dataset, format_table, image_metrics, save_report
from .models import (
    HypernetConfig,
    VAEConfig,
    VAEModel,
    build_vae,
    load_vae,
    tiny_hypernet_config,
    tiny_vae_config,
)
from .models.checkpoint import load_checkpoint
from .seeding import make_generator
from .training import Stage, TrainConfig, run_training
from .training.loop import load_train_checkpoint

log = logging.getLogger("satvae")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from err


def _model_configs(cfg: dict) -> tuple[VAEConfig, HypernetConfig]:
    model_cfg = cfg.get("model", {})
    vae_cfg = VAEConfig.from_dict(model_cfg["vae"]) if "vae" in model_cfg else tiny_vae_config()
    hyper_cfg = (HypernetConfig.from_dict(model_cfg["hypernet"])
                 if "hypernet" in model_cfg else tiny_hypernet_config())
    return vae_cfg, hyper_cfg


def _train_config(cfg: dict, stage: Stage, args) -> TrainConfig:
    body = dict(cfg.get("train", {}))
    body["stage"] = stage.value
    if args.steps is not None:
        body["steps"] = args.steps
    if args.seed is not None:
        body["seed"] = args.seed
    if getattr(args, "init", None):
        body["init_checkpoint"] = args.init
    try:
        return TrainConfig.from_dict(body)
    except TypeError as err:
        raise ConfigError(f"bad train config: {err}") from err


def load_any_vae(path: str) -> VAEModel:
    """Accept either a bare VAE checkpoint or a training checkpoint."""
    configs, tensors = load_checkpoint(path)
    if any(k.startswith("model.") for k in tensors):
        model, _, _ = load_train_checkpoint(path)
        return model
    model, _ = load_vae(path)
    return model


def _stats_for(manifest: DatasetManifest, modality: Modality) -> NormalizationStats:
    stats = manifest.stats_by_modality.get(modality)
    if stats is None:
        raise ConfigError(
            f"manifest lacks stats for {modality.value}; run `satvae data stats` first"
        )
    return stats


# ---------------------------------------------------------------- data group

def cmd_data_stats(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    modalities = (manifest.modalities if args.modality == "all"
                  else [Modality(args.modality)])
    for modality in modalities:
        stats = compute_stats(manifest, modality)
        manifest.stats_by_modality[modality] = stats
        log.info("stats[%s]: mean[0]=%.3f std[0]=%.3f over %d channels",
                 modality.value, stats.mean[0], stats.std[0], stats.channel_count)
    manifest.save(args.out)
    print(f"wrote stats for {len(modalities)} modalities -> {args.out}")
    return 0


def cmd_data_harmonize(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    reports = detect_baseline_shift(manifest, threshold=args.threshold)
    harmonized, reports = harmonize_corpus(manifest, reports, args.out_dir)
    harmonized.save(Path(args.out_dir) / "manifest.json")
    report_path = Path(args.out_dir) / "baseline_reports.json"
    report_path.write_text(json.dumps(
        [{"tile_path": r.tile_path, "min_value": r.min_value,
          "flagged": r.flagged_post_baseline, "offset_applied": r.offset_applied,
          "date": r.acquisition_date.isoformat() if r.acquisition_date else None}
         for r in reports], indent=2))
    flagged = sum(r.flagged_post_baseline for r in reports)
    print(f"harmonized corpus -> {args.out_dir} ({flagged}/{len(reports)} tiles offset)")
    return 0


def cmd_data_split(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    ratios = SplitRatios(*[float(x) for x in args.ratios.split(",")])
    result = checkerboard_split(manifest, args.cell_size, ratios, seed=args.seed or 0)
    result.save(args.out)
    counts = {s.value: len(result.of_split(s)) for s in Split}
    print(f"split {len(result.entries)} tiles -> {counts} -> {args.out}")
    return 0


def cmd_data_inspect(args) -> int:
    if args.make_fixtures:
        out = Path(args.out_dir)
        seed = args.seed or 0
        if args.make_fixtures in ("recon", "all"):
            manifest = make_recon_corpus(out / "recon", seed=seed, n_s2=args.tiles,
                                         n_rgbn=args.tiles)
            manifest = checkerboard_split(manifest, cell_size_deg=0.5, seed=seed)
            manifest.save(out / "recon" / "manifest.json")
            print(f"recon fixtures: {len(manifest.entries)} tiles -> {out / 'recon'}")
        if args.make_fixtures in ("sr", "all"):
            manifest = make_sr_corpus(out / "sr", seed=seed, n_pairs=args.pairs)
            print(f"sr fixtures: {len(manifest.entries)} tiles -> {out / 'sr'}")
        return 0

    manifest = DatasetManifest.load(args.manifest)
    print(f"entries: {len(manifest.entries)}")
    for modality in manifest.modalities:
        entries = manifest.of_modality(modality)
        by_split = {s.value: sum(1 for e in entries if e.split == s) for s in Split}
        has_stats = modality in manifest.stats_by_modality
        print(f"  {modality.value}: {len(entries)} tiles, splits={by_split}, "
              f"stats={'yes' if has_stats else 'no'}")
    s2 = manifest.of_modality(Modality.S2L2A)
    if s2:
        reports = detect_baseline_shift(manifest, threshold=args.threshold)
        flagged = sum(r.flagged_post_baseline for r in reports)
        print(f"  baseline detector (threshold {args.threshold}): "
              f"{flagged}/{len(reports)} S2L2A tiles flagged post-baseline")
    return 0


# ------------------------------------------------------------ train commands

def cmd_distill(args) -> int:
    cfg_file = _load_config_file(args.config)
    vae_cfg, hyper_cfg = _model_configs(cfg_file)
    train_cfg = _train_config(cfg_file, Stage.DISTILL, args)
    model = build_vae(vae_cfg, hyper_cfg, seed=train_cfg.seed)
    result = run_training(None, train_cfg, model, args.out_dir)
    print(f"distilled -> {result.checkpoint_path} (final loss {result.losses[-1]:.3e})")
    return 0


def cmd_train(args) -> int:
    cfg_file = _load_config_file(args.config)
    vae_cfg, hyper_cfg = _model_configs(cfg_file)
    train_cfg = _train_config(cfg_file, Stage.FINETUNE, args)
    manifest = DatasetManifest.load(args.manifest)
    model = build_vae(vae_cfg, hyper_cfg, seed=train_cfg.seed)
    result = run_training(manifest, train_cfg, model, args.out_dir)
    print(f"finetuned -> {result.checkpoint_path} (final loss {result.losses[-1]:.4f})")
    return 0


def cmd_eval(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    model = load_any_vae(args.checkpoint)
    model.eval()
    split = Split(args.split)
    reports = []
    for modality in manifest.modalities:
        if not manifest.of_split(split, modality):
            continue
        reports.append(evaluate_dataset(model, manifest, modality,
                                        split=split, space=args.space))
    if not reports:
        raise ConfigError(f"no {split.value} tiles in manifest")
    table = format_table(reports)
    print(table)
    if args.out:
        save_report(reports, args.out)
        print(f"report -> {args.out}")
    return 0


# --------------------------------------------------------------- sr commands

def _sr_configs(cfg_file: dict, args) -> tuple[SRPipelineConfig, SRTrainConfig]:
    sr_body = cfg_file.get("sr", {})
    preset = getattr(args, "preset", None)
    if sr_body:
        sr_cfg = SRPipelineConfig.from_dict(sr_body)
    elif preset == "full":
        sr_cfg = SRPipelineConfig()  # 128 -> 512
    else:
        sr_cfg = SRPipelineConfig.desk_preset()  # 32 -> 128
    if args.steps is not None:
        sr_cfg = SRPipelineConfig(scale=sr_cfg.scale, lr_size=sr_cfg.lr_size,
                                  hr_size=sr_cfg.hr_size, sampler_steps=args.steps,
                                  seed=sr_cfg.seed)
    train_body = dict(cfg_file.get("train", {}))
    if args.seed is not None:
        train_body["seed"] = args.seed
    try:
        train_cfg = SRTrainConfig.from_dict(train_body)
    except TypeError as err:
        raise ConfigError(f"bad sr train config: {err}") from err
    return sr_cfg, train_cfg


def _sr_unet_cfg(cfg_file: dict, in_ch: int, out_ch: int) -> UNetConfig:
    if "unet" in cfg_file:
        return UNetConfig.from_dict(cfg_file["unet"])
    return tiny_unet_config(in_ch, out_ch)


def cmd_sr_train(args) -> int:
    cfg_file = _load_config_file(args.config)
    sr_cfg, train_cfg = _sr_configs(cfg_file, args)
    manifest = DatasetManifest.load(args.manifest)
    vae = load_any_vae(args.vae)
    modality = manifest.modalities[0]
    stats = _stats_for(manifest, modality)
    latent = vae.vae_cfg.latent_channels
    unet_cfg = _sr_unet_cfg(cfg_file, 2 * latent, latent)
    ckpt, log_path = train_sr(manifest, vae, stats, sr_cfg, train_cfg,
                              args.out_dir, unet_cfg=unet_cfg)
    print(f"sr denoiser -> {ckpt} (log {log_path})")
    return 0


def cmd_sr_baseline_train(args) -> int:
    cfg_file = _load_config_file(args.config)
    sr_cfg, train_cfg = _sr_configs(cfg_file, args)
    manifest = DatasetManifest.load(args.manifest)
    modality = manifest.modalities[0]
    stats = _stats_for(manifest, modality)
    c = stats.channel_count
    unet_cfg = _sr_unet_cfg(cfg_file, 2 * c, c)
    ckpt, log_path = train_pixel_baseline(manifest, stats, sr_cfg, train_cfg,
                                          args.out_dir, unet_cfg=unet_cfg)
    print(f"pixel baseline denoiser -> {ckpt} (log {log_path})")
    return 0


def _sr_sample_common(args, pixel_space: bool) -> int:
    from .diffusion.sr import paired_entries

    manifest = DatasetManifest.load(args.manifest)
    denoiser, configs = load_denoiser(args.checkpoint)
    sr_cfg = SRPipelineConfig.from_dict(configs["sr"])
    if args.steps is not None:
        sr_cfg = SRPipelineConfig(scale=sr_cfg.scale, lr_size=sr_cfg.lr_size,
                                  hr_size=sr_cfg.hr_size, sampler_steps=args.steps,
                                  seed=sr_cfg.seed)
    schedule = NoiseSchedule.from_dict(configs["schedule"])
    modality = manifest.modalities[0]
    stats = _stats_for(manifest, modality)
    vae = None if pixel_space else load_any_vae(args.vae)

    split = Split(args.split) if args.split else None
    try:
        pairs = paired_entries(manifest, split)
    except SatVAEError:
        pairs = paired_entries(manifest, None)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    from .data.tiles import save_tile

    records = []
    for i, (hr_entry, lr_entry) in enumerate(pairs):
        lr = load_tile(lr_entry.tile_path)
        hr = load_tile(hr_entry.tile_path)
        gen = make_generator((args.seed or 0) + i)
        if pixel_space:
            out = infer_pixel_baseline(lr, denoiser, stats, sr_cfg,
                                       schedule=schedule, generator=gen)
        else:
            out = infer_sr(lr, vae, denoiser, stats, sr_cfg,
                           schedule=schedule, generator=gen)
        path = out_dir / f"sr_{i:04d}.eovt"
        save_tile(out, path)
        rec = {"pair": hr_entry.pair_id, "output": str(path)}
        rec.update(image_metrics(hr, out))
        records.append(rec)

    summary = {k: sum(r[k] for r in records) / len(records)
               for k in ("rmse", "psnr_db", "ssim", "sam_rad") if k in records[0]}
    (out_dir / "sr_report.json").write_text(json.dumps(
        {"per_pair": records, "means": summary}, indent=2))
    print(f"sampled {len(records)} pairs -> {out_dir} "
          f"(mean PSNR {summary.get('psnr_db', float('nan')):.2f} dB)")
    return 0


def cmd_sr_sample(args) -> int:
    return _sr_sample_common(args, pixel_space=False)


def cmd_sr_baseline_sample(args) -> int:
    return _sr_sample_common(args, pixel_space=True)


# ------------------------------------------------------------------- bench

def _fresh_bench_systems(args) -> tuple[list, object]:
    """Construct seeded desk-preset systems plus a synthetic LR input."""
    from .data.synthetic import make_image

    seed = args.seed or 0
    sr_cfg = SRPipelineConfig.desk_preset(sampler_steps=args.steps or 50)
    channels = 4
    stats = NormalizationStats(mean=[0.5] * channels, std=[0.25] * channels)
    gen = make_generator(seed)
    lr_img = make_image(Modality.RGBN, sr_cfg.lr_size, sr_cfg.lr_size, gen,
                        low=0.0, high=1.0)

    systems = []
    wanted = [s.strip() for s in args.systems.split(",") if s.strip()]
    for name in wanted:
        if name == "latent":
            if args.vae and args.denoiser:
                vae = load_any_vae(args.vae)
                denoiser, _ = load_denoiser(args.denoiser)
            else:
                vae = build_vae(tiny_vae_config(), tiny_hypernet_config(), seed=seed)
                latent = vae.vae_cfg.latent_channels
                denoiser = build_unet(tiny_unet_config(2 * latent, latent), seed=seed)
            systems.append(bench_mod.LatentSRSystem(vae, denoiser, stats, sr_cfg))
        elif name == "pixel":
            if args.pixel_denoiser:
                denoiser, _ = load_denoiser(args.pixel_denoiser)
            else:
                denoiser = build_unet(tiny_unet_config(2 * channels, channels), seed=seed)
            systems.append(bench_mod.PixelSRSystem(denoiser, stats, sr_cfg))
        else:
            raise ConfigError(f"unknown bench system {name!r} (use latent,pixel)")
    return systems, lr_img


def cmd_bench_run(args) -> int:
    systems, lr_img = _fresh_bench_systems(args)
    report = bench_mod.BenchReport(iterations=args.iterations, warmup=args.warmup,
                                   hardware=bench_mod.hardware_descriptor())
    for system in systems:
        row = bench_mod.measure_inference(system, lr_img, iterations=args.iterations,
                                          warmup=args.warmup, seed=args.seed or 0)
        report.rows.append(row)
        log.info("%s: %.1f ms/img", row.name, row.time_ms)
    print(bench_mod.emit_table(report))
    if args.out:
        report.save(args.out)
        print(f"report -> {args.out}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master RNG seed")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(
        prog="satvae",
        description="Channel-flexible VAE toolkit for multispectral EO imagery",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # data
    data = sub.add_parser("data", help="dataset preparation").add_subparsers(
        dest="data_command", required=True)

    p = data.add_parser("stats", parents=[common], help="compute normalization stats")
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", default="all")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_data_stats)

    p = data.add_parser("harmonize", parents=[common],
                        help="detect and remove the S2 baseline offset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=float, default=-50.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_data_harmonize)

    p = data.add_parser("split", parents=[common], help="checkerboard geospatial split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cell-size", type=float, default=1.0)
    p.add_argument("--ratios", default="0.848,0.101,0.051")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_data_split)

    p = data.add_parser("inspect", parents=[common],
                        help="summarize a manifest or generate fixtures")
    p.add_argument("--manifest")
    p.add_argument("--threshold", type=float, default=-50.0)
    p.add_argument("--make-fixtures", choices=["recon", "sr", "all"], default=None)
    p.add_argument("--out-dir", default="fixtures")
    p.add_argument("--tiles", type=int, default=16)
    p.add_argument("--pairs", type=int, default=8)
    p.set_defaults(func=cmd_data_inspect)

    # training
    p = sub.add_parser("distill", parents=[common],
                       help="stage 1: distill teacher stem/head into hypernetworks")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("train", parents=[common], help="stage 2: end-to-end finetune")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--init", default=None, help="distilled checkpoint to start from")
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="reconstruction metrics suite")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="TEST")
    p.add_argument("--space", default="raw", choices=["raw", "normalized"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    # sr
    sr = sub.add_parser("sr", help="latent super-resolution").add_subparsers(
        dest="sr_command", required=True)

    p = sr.add_parser("train", parents=[common], help="train latent SR denoiser")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vae", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--steps", type=int, default=None, help="sampler steps stored in config")
    p.add_argument("--preset", choices=["desk", "full"], default="desk")
    p.set_defaults(func=cmd_sr_train)

    p = sr.add_parser("sample", parents=[common], help="run latent SR inference")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vae", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--preset", choices=["desk", "full"], default=None,
                   help="unused when the checkpoint carries its config")
    p.set_defaults(func=cmd_sr_sample)

    p = sr.add_parser("baseline-train", parents=[common], help="train pixel baseline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--preset", choices=["desk", "full"], default="desk")
    p.set_defaults(func=cmd_sr_baseline_train)

    p = sr.add_parser("baseline-sample", parents=[common], help="pixel baseline inference")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--preset", choices=["desk", "full"], default=None,
                   help="unused when the checkpoint carries its config")
    p.set_defaults(func=cmd_sr_baseline_sample)

    # bench
    bench = sub.add_parser("bench", help="compute benchmarking").add_subparsers(
        dest="bench_command", required=True)
    p = bench.add_parser("run", parents=[common], help="measure latent vs pixel inference")
    p.add_argument("--systems", default="latent,pixel")
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--steps", type=int, default=None, help="sampler steps")
    p.add_argument("--vae", default=None)
    p.add_argument("--denoiser", default=None)
    p.add_argument("--pixel-denoiser", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench_run)

    return parser


def dispatch(argv: list[str]) -> int:
    """Parse and run exactly one subcommand; map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_err:
        return int(exit_err.code or 0)

    logging.basicConfig(level=getattr(logging, getattr(args, "log_level", "INFO")))
    torch.set_num_threads(max(torch.get_num_threads(), 1))

    try:
        return args.func(args)
    except ConfigError as err:
        log.error("config error: %s", err)
        return 3
    except SatVAEError as err:
        log.error("%s", err)
        return 1
    except FileNotFoundError as err:
        log.error("missing file: %s", err)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
