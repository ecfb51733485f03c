"""Reconstruction objective: equally weighted Charbonnier + MS-SSIM terms."""

from __future__ import annotations

import torch

from ..exceptions import ShapeMismatchError
from ..metrics import ms_ssim


def charbonnier(x: torch.Tensor, y: torch.Tensor, eps: float = 1e-3) -> torch.Tensor:
    """Smooth L1 surrogate: mean of sqrt((x - y)^2 + eps^2).

    Equals eps exactly at zero residual and approaches mean |x - y| as
    eps -> 0.
    """
    if x.shape != y.shape:
        raise ShapeMismatchError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    diff = x - y
    return torch.sqrt(diff * diff + eps * eps).mean()


def reconstruction_loss(
    x: torch.Tensor,
    x_hat: torch.Tensor,
    w_char: float = 0.5,
    w_msssim: float = 0.5,
    charbonnier_eps: float = 1e-3,
) -> tuple[torch.Tensor, dict[str, float]]:
    """w_char * Charbonnier + w_msssim * (1 - MS-SSIM); both in NORMALIZED space.

    Returns the scalar loss tensor plus a float breakdown for logging.
    MS-SSIM reduces scales automatically on small tiles (single-scale SSIM
    in the limit), with a warning recorded by the metric itself.
    """
    char = charbonnier(x, x_hat, eps=charbonnier_eps)
    if w_msssim != 0.0:
        # Pin the SSIM constants to the target's dynamic range: a recon-
        # dependent range would make the loss non-differentiable in the
        # parameters (the metric default spans both images instead).
        target_range = float(x.detach().max() - x.detach().min())
        similarity = ms_ssim(x, x_hat, data_range=target_range)
        ms_term = 1.0 - similarity
    else:
        similarity = torch.ones((), dtype=x.dtype)
        ms_term = torch.zeros((), dtype=x.dtype)
    total = w_char * char + w_msssim * ms_term
    breakdown = {
        "charbonnier": float(char.detach()),
        "ms_ssim": float(similarity.detach()),
        "reconstruction": float(total.detach()),
    }
    return total, breakdown
