"""Weighted denoising objective for x-prediction under the VP schedule.

loss = (alpha_t^2 + sigma_t^2) / sigma_t^2 * ||denoiser(x_t) - x0||^2
with x_t = alpha_t x0 + sigma_t eps. Under a variance-preserving schedule
the weight reduces to exactly 1/sigma_t^2.
"""

from __future__ import annotations

import torch

from ..exceptions import SamplerDivergenceError, ShapeMismatchError
from .schedule import NoiseSchedule

SIGMA_GUARD = 1e-8


def edm_loss(
    denoiser,
    x0: torch.Tensor,
    cond: torch.Tensor | None,
    t: torch.Tensor | float,
    schedule: NoiseSchedule,
    generator: torch.Generator,
) -> torch.Tensor:
    """Single-draw EDM loss, averaged over the batch.

    ``t`` may be a scalar or a per-sample [B] tensor inside the schedule
    range; noise comes from the supplied generator only.
    """
    if x0.ndim != 4:
        raise ShapeMismatchError(f"x0 must be [B,C,H,W], got {tuple(x0.shape)}")
    if cond is not None and cond.shape[0] != x0.shape[0]:
        raise ShapeMismatchError("conditioning batch size differs from x0")

    schedule.check_range(t)
    tt = torch.as_tensor(t, dtype=x0.dtype)
    if tt.ndim == 0:
        tt = tt.expand(x0.shape[0])
    if tt.shape != (x0.shape[0],):
        raise ShapeMismatchError(f"t must be scalar or [B], got {tuple(tt.shape)}")

    alpha, sigma = schedule.alpha_sigma(tt)
    alpha = alpha.to(x0.dtype)
    sigma = sigma.to(x0.dtype)
    if bool((sigma < SIGMA_GUARD).any()):
        raise SamplerDivergenceError(
            f"sigma below {SIGMA_GUARD}; EDM weight would overflow"
        )

    eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    a = alpha.view(-1, 1, 1, 1)
    s = sigma.view(-1, 1, 1, 1)
    x_t = a * x0 + s * eps

    pred = denoiser(x_t, tt, cond)
    if pred.shape != x0.shape:
        raise ShapeMismatchError(
            f"denoiser output {tuple(pred.shape)} vs target {tuple(x0.shape)}"
        )
    weight = (alpha * alpha + sigma * sigma) / (sigma * sigma)
    per_sample = ((pred - x0) ** 2).mean(dim=(1, 2, 3))
    return (weight * per_sample).mean()
