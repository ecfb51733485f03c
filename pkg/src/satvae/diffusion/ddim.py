"""Deterministic DDIM sampling for an x-prediction denoiser.

Starting from x ~ N(0, I) at t_max, each step predicts the clean sample,
then moves along the schedule while preserving the implied noise direction:

    x_next = alpha' * x0_hat + sigma' * (x_t - alpha_t * x0_hat) / sigma_t

The denoiser is evaluated on a uniform grid down to t_min; the final update
targets t = 0 where (alpha, sigma) = (1, 0), so the sampler returns the last
clean-sample prediction exactly (eta = 0 throughout: no fresh noise is ever
injected, making the sampler a pure function of seed and conditioning).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..exceptions import SamplerDivergenceError, ScheduleRangeError
from .schedule import NoiseSchedule


@dataclass
class DiffusionState:
    """One point on a sampling trajectory: noisy latents, time, conditioning."""

    x_t: torch.Tensor
    t: float
    conditioning: torch.Tensor | None = None

    def validate(self, schedule: NoiseSchedule) -> None:
        if not torch.isfinite(self.x_t).all():
            raise SamplerDivergenceError(f"non-finite state at t={self.t:.4f}")
        if not (0.0 <= self.t <= schedule.t_max + 1e-12):
            raise ScheduleRangeError(f"state time {self.t} outside [0, t_max]")


def ddim_sample(
    denoiser,
    cond: torch.Tensor | None,
    schedule: NoiseSchedule,
    shape: tuple[int, ...],
    steps: int = 50,
    generator: torch.Generator | None = None,
    initial_noise: torch.Tensor | None = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Sample latents of ``shape`` = [B, C, H, W]; deterministic given noise."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if initial_noise is not None:
        x = initial_noise.to(dtype)
        if tuple(x.shape) != tuple(shape):
            raise ValueError(f"initial noise shape {tuple(x.shape)} != {tuple(shape)}")
    else:
        if generator is None:
            raise ValueError("provide a generator or explicit initial noise")
        x = torch.randn(shape, generator=generator, dtype=dtype)

    grid = schedule.uniform_grid(steps)
    batch = shape[0]
    state = DiffusionState(x_t=x, t=float(grid[0]), conditioning=cond)
    with torch.no_grad():
        for i in range(steps):
            alpha_t = float(schedule.alpha(state.t))
            sigma_t = float(schedule.sigma(state.t))

            t_batch = torch.full((batch,), state.t, dtype=dtype)
            x0_hat = denoiser(state.x_t, t_batch, state.conditioning)

            if i + 1 < steps:
                t_next = float(grid[i + 1])
                alpha_n = float(schedule.alpha(t_next))
                sigma_n = float(schedule.sigma(t_next))
            else:
                # Final hop targets t=0 where (alpha, sigma) = (1, 0): the
                # returned sample is the last clean-sample prediction.
                t_next, alpha_n, sigma_n = 0.0, 1.0, 0.0

            noise_dir = (state.x_t - alpha_t * x0_hat) / sigma_t
            state = DiffusionState(
                x_t=alpha_n * x0_hat + sigma_n * noise_dir,
                t=t_next,
                conditioning=state.conditioning,
            )
            state.validate(schedule)
    return state.x_t
