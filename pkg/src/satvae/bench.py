"""Inference benchmarking: latency, throughput, peak memory, parameter counts.

Measurements are end-to-end per image (encode + sample + decode) at batch 1,
single-threaded, with warmup iterations excluded; per-phase timings are kept
alongside so the diffusion-only reading stays recoverable. An analytic conv
FLOP count of the denoiser core accompanies the wall-clock numbers, since the
latent-vs-pixel speedup is fundamentally the f^2 spatial factor.
"""

from __future__ import annotations

import json
import platform
import resource
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from .data.stats import denormalize_array, normalize_array
from .data.types import MultispectralImage, NormalizationStats, ValueSpace
from .diffusion.ddim import ddim_sample
from .diffusion.schedule import NoiseSchedule
from .diffusion.sr import SRPipelineConfig
from .diffusion.unet import DenoiserUNet
from .models.vae import VAEModel
from .seeding import make_generator


def param_count(module: nn.Module) -> int:
    """Exact number of parameters (trainable or not)."""
    return sum(p.numel() for p in module.parameters())


def conv_flops(module: nn.Module, *forward_args, **forward_kwargs) -> int:
    """Multiply-add FLOPs (x2) of conv and linear layers for one forward pass."""
    total = 0

    def hook(mod, inputs, output):
        nonlocal total
        if isinstance(mod, nn.Conv2d):
            out = output.shape
            k = mod.kernel_size[0] * mod.kernel_size[1]
            total += 2 * k * (mod.in_channels // mod.groups) * mod.out_channels \
                * out[-2] * out[-1] * out[0]
        elif isinstance(mod, nn.Linear):
            batch = int(torch.tensor(output.shape[:-1]).prod())
            total += 2 * mod.in_features * mod.out_features * batch

    handles = [m.register_forward_hook(hook) for m in module.modules()]
    try:
        with torch.no_grad():
            module(*forward_args, **forward_kwargs)
    finally:
        for h in handles:
            h.remove()
    return total


@dataclass
class BenchRow:
    name: str
    bands: str
    time_ms: float = 0.0
    throughput_img_per_s: float = 0.0
    peak_memory_gb: float = 0.0
    params_total_m: float = 0.0
    params_diffusion_m: float = 0.0
    phase_ms: dict = field(default_factory=dict)
    denoiser_flops_per_step: float = 0.0
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchRow":
        return cls(**d)


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    iterations: int = 50
    warmup: int = 5
    hardware: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "iterations": self.iterations,
                "warmup": self.warmup,
                "hardware": self.hardware,
                "rows": [r.to_dict() for r in self.rows],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        d = json.loads(text)
        return cls(
            rows=[BenchRow.from_dict(r) for r in d["rows"]],
            iterations=d["iterations"],
            warmup=d["warmup"],
            hardware=d.get("hardware", ""),
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(self.to_json())
        tmp.replace(path)


class LatentSRSystem:
    """Frozen VAE + latent denoiser, timed per phase."""

    name = "latent"

    def __init__(self, vae: VAEModel, denoiser: DenoiserUNet,
                 stats: NormalizationStats, sr_cfg: SRPipelineConfig,
                 schedule: NoiseSchedule | None = None):
        self.vae = vae.eval()
        self.denoiser = denoiser.eval()
        self.stats = stats
        self.sr_cfg = sr_cfg
        self.schedule = schedule or NoiseSchedule()
        for p in self.vae.parameters():
            p.requires_grad_(False)

    @property
    def bands(self) -> str:
        return f"{self.stats.channel_count}ch"

    def param_counts(self) -> tuple[int, int]:
        diffusion = param_count(self.denoiser)
        return param_count(self.vae) + diffusion, diffusion

    def denoiser_flops(self) -> int:
        f = self.vae.vae_cfg.downsample_factor
        hw = self.sr_cfg.hr_size // f
        latent = self.vae.vae_cfg.latent_channels
        x = torch.zeros(1, latent, hw, hw)
        cond = torch.zeros(1, latent, hw, hw)
        t = torch.zeros(1)
        return conv_flops(self.denoiser, x, t, cond)

    def run(self, lr_img: MultispectralImage, generator: torch.Generator
            ) -> tuple[MultispectralImage, dict]:
        cfg = self.sr_cfg
        f = self.vae.vae_cfg.downsample_factor
        hr_hw = cfg.hr_size // f
        wavelengths = lr_img.wavelengths.as_tensor()

        t0 = time.perf_counter()
        with torch.no_grad():
            normed = normalize_array(lr_img.pixels, self.stats).unsqueeze(0)
            z_lr = self.vae.encode_tensor(normed, wavelengths, sample=False).mean
            cond = F.interpolate(z_lr, size=(hr_hw, hr_hw), mode="nearest")
        t1 = time.perf_counter()
        shape = (1, self.vae.vae_cfg.latent_channels, hr_hw, hr_hw)
        z_hr = ddim_sample(self.denoiser, cond, self.schedule, shape,
                           steps=cfg.sampler_steps, generator=generator)
        t2 = time.perf_counter()
        with torch.no_grad():
            pixels = self.vae.decode_tensor(z_hr, wavelengths).squeeze(0)
            raw = denormalize_array(pixels, self.stats)
        t3 = time.perf_counter()

        out = MultispectralImage(pixels=raw, wavelengths=lr_img.wavelengths,
                                 modality=lr_img.modality, value_space=ValueSpace.RAW)
        phases = {"encode_ms": (t1 - t0) * 1e3, "sample_ms": (t2 - t1) * 1e3,
                  "decode_ms": (t3 - t2) * 1e3}
        return out, phases


class PixelSRSystem:
    """Pixel-space diffusion baseline: no autoencoder, same sampler."""

    name = "pixel"

    def __init__(self, denoiser: DenoiserUNet, stats: NormalizationStats,
                 sr_cfg: SRPipelineConfig, schedule: NoiseSchedule | None = None):
        self.denoiser = denoiser.eval()
        self.stats = stats
        self.sr_cfg = sr_cfg
        self.schedule = schedule or NoiseSchedule()

    @property
    def bands(self) -> str:
        return f"{self.stats.channel_count}ch"

    def param_counts(self) -> tuple[int, int]:
        diffusion = param_count(self.denoiser)
        return diffusion, diffusion

    def denoiser_flops(self) -> int:
        c = self.stats.channel_count
        hw = self.sr_cfg.hr_size
        x = torch.zeros(1, c, hw, hw)
        cond = torch.zeros(1, c, hw, hw)
        t = torch.zeros(1)
        return conv_flops(self.denoiser, x, t, cond)

    def run(self, lr_img: MultispectralImage, generator: torch.Generator
            ) -> tuple[MultispectralImage, dict]:
        cfg = self.sr_cfg
        t0 = time.perf_counter()
        with torch.no_grad():
            cond = F.interpolate(
                normalize_array(lr_img.pixels, self.stats).unsqueeze(0),
                size=(cfg.hr_size, cfg.hr_size), mode="nearest",
            )
        t1 = time.perf_counter()
        shape = (1, lr_img.channels, cfg.hr_size, cfg.hr_size)
        pixels = ddim_sample(self.denoiser, cond, self.schedule, shape,
                             steps=cfg.sampler_steps, generator=generator)
        t2 = time.perf_counter()
        raw = denormalize_array(pixels.squeeze(0), self.stats)
        t3 = time.perf_counter()

        out = MultispectralImage(pixels=raw, wavelengths=lr_img.wavelengths,
                                 modality=lr_img.modality, value_space=ValueSpace.RAW)
        phases = {"encode_ms": (t1 - t0) * 1e3, "sample_ms": (t2 - t1) * 1e3,
                  "decode_ms": (t3 - t2) * 1e3}
        return out, phases


def hardware_descriptor() -> str:
    import os

    return (f"{platform.system()} {platform.machine()}, "
            f"{os.cpu_count()} cpus, torch {torch.__version__}")


def peak_memory_gb() -> float:
    """Process high-water mark via getrusage (KiB on Linux)."""
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1e6


def count_params(system) -> tuple[float, float]:
    """(total, diffusion-only) parameter counts in millions."""
    total, diffusion = system.param_counts()
    return total / 1e6, diffusion / 1e6


def measure_inference(
    system,
    lr_img: MultispectralImage,
    iterations: int = 50,
    warmup: int = 5,
    seed: int = 0,
) -> BenchRow:
    """Wall-clock mean per image after warmup, plus derived throughput."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    for i in range(warmup):
        system.run(lr_img, make_generator(seed + 1000 + i))

    durations = []
    phase_sums: dict[str, float] = {}
    for i in range(iterations):
        gen = make_generator(seed + i)
        start = time.perf_counter()
        _, phases = system.run(lr_img, gen)
        durations.append((time.perf_counter() - start) * 1e3)
        for k, v in phases.items():
            phase_sums[k] = phase_sums.get(k, 0.0) + v

    time_ms = sum(durations) / len(durations)
    total_m, diffusion_m = count_params(system)
    return BenchRow(
        name=system.name,
        bands=system.bands,
        time_ms=time_ms,
        throughput_img_per_s=1000.0 / time_ms,
        peak_memory_gb=peak_memory_gb(),
        params_total_m=total_m,
        params_diffusion_m=diffusion_m,
        phase_ms={k: v / iterations for k, v in phase_sums.items()},
        denoiser_flops_per_step=float(system.denoiser_flops()),
    )


_METRIC_COLUMNS = (
    ("psnr", "PSNR"),
    ("ssim", "SSIM"),
    ("rmse", "RMSE"),
    ("sam", "SAM"),
    ("ndvi_mae", "NDVI-MAE"),
)


def emit_table(report: BenchReport) -> str:
    """Aligned text table in compute-summary column order."""
    metric_cols = [(k, h) for k, h in _METRIC_COLUMNS
                   if any(k in r.metrics for r in report.rows)]
    header = (["Model", "Bands"] + [h for _, h in metric_cols]
              + ["Time (ms)", "Throughput (img/s)", "Peak Memory (GB)",
                 "Params (M) Total (Diffusion)"])
    rows = []
    for r in report.rows:
        row = [r.name, r.bands]
        for k, _ in metric_cols:
            row.append(f"{r.metrics[k]:.4f}" if k in r.metrics else "-")
        row.extend([
            f"{r.time_ms:.1f}",
            f"{r.throughput_img_per_s:.2f}",
            f"{r.peak_memory_gb:.2f}",
            f"{r.params_total_m:.1f} ({r.params_diffusion_m:.1f})",
        ])
        rows.append(row)
    widths = [max(len(header[i]), *(len(row[i]) for row in rows)) if rows else len(header[i])
              for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows]
    footer = (f"iterations={report.iterations} warmup={report.warmup} "
              f"hardware={report.hardware}")
    return "\n".join(lines + [footer])
