"""Two-stage training driver: weight distillation, then end-to-end finetuning.

Determinism contract: every stochastic decision at step k (batch selection,
posterior noise) comes from a generator derived statelessly from
(seed, step), so resuming from a checkpoint reproduces the uninterrupted
run exactly; only model parameters and optimizer moments live in the
checkpoint.
"""

from __future__ import annotations

import json
import math
import shutil
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import torch

from ..data.stats import normalize_array
from ..data.tiles import load_tile
from ..data.types import DatasetManifest, Modality, Split, ValueSpace
from ..exceptions import ConfigError, EmptyCorpusError, TrainingDivergenceError
from ..metrics import psnr, rmse
from ..models.checkpoint import load_checkpoint, save_checkpoint
from ..models.vae import VAEModel, kl_divergence
from ..seeding import step_generator
from .distill import TeacherConvWeights, distill_loss, rgb_profile
from .losses import reconstruction_loss


class Stage(Enum):
    DISTILL = "DISTILL"
    FINETUNE = "FINETUNE"


@dataclass
class TrainConfig:
    stage: Stage = Stage.FINETUNE
    learning_rate: float | None = None
    steps: int = 1000
    batch_size: int = 4
    w_char: float = 0.5
    w_msssim: float = 0.5
    kl_weight: float | None = None
    charbonnier_eps: float = 1e-3
    seed: int = 0
    checkpoint_every: int = 500
    val_max_tiles: int = 8
    weight_decay: float = 0.0
    init_checkpoint: str | None = None
    require_distilled: bool = True
    teacher_seed: int = 0
    teacher_channels: int = 3

    def __post_init__(self):
        if isinstance(self.stage, str):
            self.stage = Stage(self.stage)
        if self.learning_rate is None:
            self.learning_rate = 1e-3 if self.stage is Stage.DISTILL else 1e-4
        if self.steps < 1 or self.batch_size < 1 or self.checkpoint_every < 1:
            raise ConfigError("steps, batch_size and checkpoint_every must be >= 1")
        if self.learning_rate <= 0 or self.charbonnier_eps <= 0:
            raise ConfigError("learning_rate and charbonnier_eps must be positive")
        if self.w_char < 0 or self.w_msssim < 0:
            raise ConfigError("loss weights must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage"] = self.stage.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainResult:
    checkpoint_path: str
    log_path: str
    losses: list[float] = field(default_factory=list)


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    progress = min(max(step / max(total_steps, 1), 0.0), 1.0)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


class ModalityBatcher:
    """Round-robin over (modality, tile shape) groups, one group per step.

    Mixing channel counts (or spatial sizes) inside a dense batch is
    ill-defined, so flexibility across modalities and resolutions happens
    across steps, not within them.
    """

    def __init__(self, manifest: DatasetManifest, split: Split = Split.TRAIN):
        from ..data.tiles import read_header

        by_key: dict[tuple[str, int, int], tuple[Modality, list]] = {}
        for modality in sorted(manifest.modalities, key=lambda m: m.value):
            entries = manifest.of_split(split, modality)
            if not entries:
                continue
            if manifest.stats_by_modality.get(modality) is None:
                raise ConfigError(
                    f"manifest lacks normalization stats for {modality.value}; "
                    "run compute_stats first"
                )
            for entry in entries:
                header = read_header(entry.tile_path)
                key = (modality.value, header["H"], header["W"])
                by_key.setdefault(key, (modality, []))[1].append(entry)
        if not by_key:
            raise EmptyCorpusError(f"no {split.value} tiles in manifest")
        self.groups = [by_key[k] for k in sorted(by_key)]
        self.manifest = manifest
        self._cache: dict[str, torch.Tensor] = {}

    def _load_normalized(self, entry, stats) -> torch.Tensor:
        cached = self._cache.get(entry.tile_path)
        if cached is None:
            img = load_tile(entry.tile_path)
            if img.value_space is not ValueSpace.RAW:
                raise ConfigError(f"{entry.tile_path}: training tiles must be RAW")
            cached = normalize_array(img.pixels, stats)
            self._cache[entry.tile_path] = cached
        return cached

    def batch(self, step: int, batch_size: int, generator: torch.Generator
              ) -> tuple[torch.Tensor, torch.Tensor, Modality]:
        modality, entries = self.groups[step % len(self.groups)]
        stats = self.manifest.stats_by_modality[modality]
        idx = torch.randint(len(entries), (batch_size,), generator=generator)
        tiles = [self._load_normalized(entries[i], stats) for i in idx.tolist()]
        wavelengths = load_tile(entries[idx[0]].tile_path).wavelengths.as_tensor()
        return torch.stack(tiles), wavelengths, modality


def finetune_step(
    model: VAEModel,
    batch: torch.Tensor,
    wavelengths: torch.Tensor,
    cfg: TrainConfig,
    optimizer: torch.optim.Optimizer,
    generator: torch.Generator,
) -> dict[str, float]:
    """One optimizer step on all parameters; returns the loss breakdown."""
    kl_weight = cfg.kl_weight if cfg.kl_weight is not None else model.vae_cfg.kl_weight
    optimizer.zero_grad(set_to_none=True)
    recon, latent = model.reconstruct_tensor(batch, wavelengths, mode="sample",
                                             generator=generator)
    rec_loss, breakdown = reconstruction_loss(
        batch, recon, w_char=cfg.w_char, w_msssim=cfg.w_msssim,
        charbonnier_eps=cfg.charbonnier_eps,
    )
    kl = kl_divergence(latent)
    total = rec_loss + kl_weight * kl
    if not torch.isfinite(total):
        raise TrainingDivergenceError("non-finite finetune loss")
    total.backward()
    optimizer.step()
    return {
        "charbonnier": breakdown["charbonnier"],
        "ms_ssim": breakdown["ms_ssim"],
        "kl": float(kl.detach()),
        "total": float(total.detach()),
    }


def _save_train_checkpoint(path: Path, model: VAEModel, optimizer, step: int,
                           cfg: TrainConfig, distilled: bool) -> None:
    tensors = {f"model.{k}": v for k, v in model.state_dict().items()}
    opt_state = optimizer.state_dict()["state"]
    for idx, slots in opt_state.items():
        for slot, value in slots.items():
            if isinstance(value, torch.Tensor):
                tensors[f"opt.{idx}.{slot}"] = value
    configs = {
        "kind": "vae",
        "vae": model.vae_cfg.to_dict(),
        "hypernet": model.hyper_cfg.to_dict(),
        "stage": cfg.stage.value,
        "step": step,
        "distilled": distilled,
        "train_config": cfg.to_dict(),
    }
    save_checkpoint(path, configs, tensors)


def _restore_optimizer(optimizer, tensors: dict) -> None:
    fresh = optimizer.state_dict()
    state: dict[int, dict] = {}
    for name, tensor in tensors.items():
        if not name.startswith("opt."):
            continue
        _, idx, slot = name.split(".", 2)
        state.setdefault(int(idx), {})[slot] = tensor
    if state:
        optimizer.load_state_dict({"state": state, "param_groups": fresh["param_groups"]})


def load_train_checkpoint(path: str | Path) -> tuple[VAEModel, dict, dict]:
    """Restore a training checkpoint: model, raw tensors, configs."""
    from ..models.backbone import VAEConfig
    from ..models.hypernet import HypernetConfig

    configs, tensors = load_checkpoint(path)
    model = VAEModel(VAEConfig.from_dict(configs["vae"]),
                     HypernetConfig.from_dict(configs["hypernet"]))
    model_state = {k[len("model."):]: v for k, v in tensors.items() if k.startswith("model.")}
    model.load_state_dict(model_state)
    return model, tensors, configs


def _validation_record(model: VAEModel, manifest: DatasetManifest,
                       cfg: TrainConfig) -> dict[str, float] | None:
    entries = manifest.of_split(Split.VAL)
    if not entries:
        return None
    entries = entries[: cfg.val_max_tiles]
    psnrs, rmses = [], []
    with torch.no_grad():
        for entry in entries:
            stats = manifest.stats_by_modality.get(entry.modality)
            if stats is None:
                continue
            img = load_tile(entry.tile_path)
            x = normalize_array(img.pixels, stats).unsqueeze(0)
            recon, _ = model.reconstruct_tensor(x, img.wavelengths.as_tensor(), mode="mean")
            psnrs.append(psnr(x.squeeze(0), recon.squeeze(0), peak="auto"))
            rmses.append(rmse(x.squeeze(0), recon.squeeze(0)))
    if not psnrs:
        return None
    return {
        "psnr_db": sum(psnrs) / len(psnrs),
        "rmse": sum(rmses) / len(rmses),
        "tiles": float(len(psnrs)),
    }


def run_training(
    manifest: DatasetManifest | None,
    cfg: TrainConfig,
    model: VAEModel,
    out_dir: str | Path,
    teacher: TeacherConvWeights | None = None,
    resume_from: str | Path | None = None,
) -> TrainResult:
    """Run one training stage to completion with checkpoints and a JSONL log.

    DISTILL needs no data (the target is the teacher's weights); FINETUNE
    needs a manifest with splits and per-modality stats. When the config
    requires distillation, finetuning refuses to start from anything but a
    distilled checkpoint.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / f"{cfg.stage.value.lower()}_log.jsonl"
    ckpt_path = out_dir / f"{cfg.stage.value.lower()}_checkpoint.svcp"

    start_step = 0
    distilled_flag = cfg.stage is Stage.DISTILL

    if cfg.stage is Stage.FINETUNE and resume_from is None:
        if cfg.init_checkpoint is not None:
            init_model, _, init_cfgs = load_train_checkpoint(cfg.init_checkpoint)
            if cfg.require_distilled and not init_cfgs.get("distilled", False):
                raise ConfigError(
                    f"{cfg.init_checkpoint} is not a distilled checkpoint; "
                    "finetuning requires stage-1 distillation first"
                )
            model.load_state_dict(init_model.state_dict())
            distilled_flag = bool(init_cfgs.get("distilled", False))
        elif cfg.require_distilled:
            raise ConfigError(
                "finetune stage requires a distilled init_checkpoint "
                "(set require_distilled=false to train from scratch)"
            )

    if cfg.stage is Stage.DISTILL:
        if teacher is None:
            teacher = TeacherConvWeights.random(
                model.hyper_cfg, channels=cfg.teacher_channels, seed=cfg.teacher_seed
            )
        params = list(model.hypernet_parameters())
        profile = rgb_profile()
        batcher = None
    else:
        if manifest is None:
            raise ConfigError("finetune stage requires a dataset manifest")
        params = list(model.parameters())
        batcher = ModalityBatcher(manifest, Split.TRAIN)

    optimizer = torch.optim.AdamW(params, lr=cfg.learning_rate,
                                  weight_decay=cfg.weight_decay)

    if resume_from is not None:
        restored, tensors, configs = load_train_checkpoint(resume_from)
        model.load_state_dict(restored.state_dict())
        _restore_optimizer(optimizer, tensors)
        start_step = int(configs["step"])
        distilled_flag = bool(configs.get("distilled", distilled_flag))

    losses: list[float] = []
    mode = "a" if resume_from is not None else "w"
    with open(log_path, mode) as log:
        for step in range(start_step, cfg.steps):
            for group in optimizer.param_groups:
                group["lr"] = cosine_lr(cfg.learning_rate, step, cfg.steps)
            gen = step_generator(cfg.seed, step)

            if cfg.stage is Stage.DISTILL:
                optimizer.zero_grad(set_to_none=True)
                loss = distill_loss(teacher, model, profile)
                if not torch.isfinite(loss):
                    raise TrainingDivergenceError(
                        "non-finite distillation loss", last_checkpoint=str(ckpt_path)
                    )
                loss.backward()
                optimizer.step()
                loss_terms = {"distill": float(loss.detach()), "total": float(loss.detach())}
            else:
                batch, wavelengths, _ = batcher.batch(step, cfg.batch_size, gen)
                try:
                    loss_terms = finetune_step(model, batch, wavelengths, cfg,
                                               optimizer, gen)
                except TrainingDivergenceError as err:
                    raise TrainingDivergenceError(
                        str(err), last_checkpoint=str(ckpt_path)
                    ) from err

            losses.append(loss_terms["total"])
            record = {
                "step": step,
                "stage": cfg.stage.value,
                "losses": loss_terms,
                "lr": optimizer.param_groups[0]["lr"],
            }

            done = step + 1 == cfg.steps
            if (step + 1) % cfg.checkpoint_every == 0 or done:
                if cfg.stage is Stage.FINETUNE and manifest is not None:
                    val = _validation_record(model, manifest, cfg)
                    if val is not None:
                        record["val_metrics"] = val
                # Cadence checkpoints are kept (stamped) so an interrupted
                # run can resume from its last one; the unstamped path
                # always points at the newest.
                stamped = out_dir / (
                    f"{cfg.stage.value.lower()}_checkpoint_step{step + 1:06d}.svcp"
                )
                _save_train_checkpoint(stamped, model, optimizer, step + 1,
                                       cfg, distilled_flag)
                shutil.copyfile(stamped, ckpt_path)
            log.write(json.dumps(record) + "\n")

    return TrainResult(checkpoint_path=str(ckpt_path), log_path=str(log_path),
                       losses=losses)
