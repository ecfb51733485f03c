"""Variance-preserving noise schedule.

alpha(t) = exp(-t^2 (beta_max - beta_min)/4 - t beta_min / 2) and
sigma(t) = sqrt(1 - alpha(t)^2), so alpha^2 + sigma^2 = 1 identically.
t_min stays strictly positive to bound the 1/sigma^2 EDM weight; the DDIM
sampler may still target t = 0, where (alpha, sigma) = (1, 0) exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch

from ..exceptions import ScheduleRangeError


@dataclass(frozen=True)
class NoiseSchedule:
    beta_min: float = 0.1
    beta_max: float = 20.0
    t_min: float = 1e-3
    t_max: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.t_min < self.t_max <= 1.0):
            raise ValueError("need 0 < t_min < t_max <= 1")
        if not (0.0 < self.beta_min < self.beta_max):
            raise ValueError("need 0 < beta_min < beta_max")

    def check_range(self, t: torch.Tensor | float) -> None:
        tt = torch.as_tensor(t, dtype=torch.float64)
        if bool((tt < self.t_min - 1e-12).any()) or bool((tt > self.t_max + 1e-12).any()):
            raise ScheduleRangeError(
                f"t outside schedule range [{self.t_min}, {self.t_max}]"
            )

    def alpha(self, t: torch.Tensor | float) -> torch.Tensor:
        # Python scalars are promoted to float64 so sampler coefficients and
        # identity checks are not limited to single precision.
        if isinstance(t, torch.Tensor):
            tt = t.double() if not t.is_floating_point() else t
        else:
            tt = torch.as_tensor(t, dtype=torch.float64)
        return torch.exp(
            -0.25 * tt * tt * (self.beta_max - self.beta_min) - 0.5 * tt * self.beta_min
        )

    def sigma(self, t: torch.Tensor | float) -> torch.Tensor:
        a = self.alpha(t)
        return torch.sqrt(torch.clamp(1.0 - a * a, min=0.0))

    def alpha_sigma(self, t: torch.Tensor | float) -> tuple[torch.Tensor, torch.Tensor]:
        """(alpha, sigma) without range checks (sampling may target t=0)."""
        return self.alpha(t), self.sigma(t)

    def edm_weight(self, t: torch.Tensor | float) -> torch.Tensor:
        """(alpha^2 + sigma^2) / sigma^2; equals sigma^-2 under VP."""
        a, s = self.alpha_sigma(t)
        return (a * a + s * s) / (s * s)

    def uniform_grid(self, steps: int) -> torch.Tensor:
        """Descending evaluation times t_max -> t_min."""
        if steps < 1:
            raise ValueError("steps must be >= 1")
        if steps == 1:
            return torch.tensor([self.t_max], dtype=torch.float64)
        return torch.linspace(self.t_max, self.t_min, steps, dtype=torch.float64)

    def sample_t(self, batch: int, generator: torch.Generator) -> torch.Tensor:
        """Uniform training times in [t_min, t_max]."""
        u = torch.rand(batch, generator=generator, dtype=torch.float64)
        return self.t_min + (self.t_max - self.t_min) * u

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls(**d)


def vp_schedule(
    t: torch.Tensor | float,
    schedule: NoiseSchedule | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Range-checked (alpha(t), sigma(t)) lookup."""
    schedule = schedule or NoiseSchedule()
    schedule.check_range(t)
    return schedule.alpha_sigma(t)
