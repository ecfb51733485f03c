"""Stage 1: distill a frozen teacher stem/head into the hypernetworks.

The student weights are generated at the teacher's RGB wavelengths and pulled
toward the teacher by minimizing the summed Frobenius norms of the four
weight differences (stem/head kernels and biases). Only hypernetwork
parameters receive gradients; the backbone never moves in this stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..data.types import RGB_WAVELENGTHS_NM, WavelengthProfile
from ..exceptions import ShapeMismatchError
from ..models.hypernet import HypernetConfig
from ..models.vae import VAEModel
from ..seeding import make_generator


@dataclass
class TeacherConvWeights:
    """Frozen stem/head conv weights distilled into the hypernetworks.

    At desk scale the teacher is a seeded random init with the same shapes a
    pretrained RGB autoencoder would have; the distillation dynamics and the
    forward-equivalence checks are independent of where the weights came from.
    """

    stem_kernel: torch.Tensor
    stem_bias: torch.Tensor
    head_kernel: torch.Tensor
    head_bias: torch.Tensor

    def __post_init__(self):
        for t in (self.stem_kernel, self.stem_bias, self.head_kernel, self.head_bias):
            t.requires_grad_(False)
        if self.stem_kernel.ndim != 4 or self.head_kernel.ndim != 4:
            raise ShapeMismatchError("teacher kernels must be 4-D conv weights")
        if self.stem_kernel.shape[1] != self.head_kernel.shape[0]:
            raise ShapeMismatchError("teacher stem input and head output channels differ")

    @property
    def channels(self) -> int:
        return self.stem_kernel.shape[1]

    @classmethod
    def random(cls, cfg: HypernetConfig, channels: int = 3, seed: int = 0,
               dtype: torch.dtype = torch.float32) -> "TeacherConvWeights":
        gen = make_generator(seed)
        k, base = cfg.kernel_size, cfg.base_channels
        bound_stem = (channels * k * k) ** -0.5
        bound_head = (base * k * k) ** -0.5
        def uniform(shape, bound):
            t = torch.empty(shape, dtype=dtype)
            t.uniform_(-bound, bound, generator=gen)
            return t
        return cls(
            stem_kernel=uniform((base, channels, k, k), bound_stem),
            stem_bias=uniform((base,), bound_stem),
            head_kernel=uniform((channels, base, k, k), bound_head),
            head_bias=uniform((channels,), bound_head),
        )

    def check_compatible(self, model: VAEModel) -> None:
        k, base = model.hyper_cfg.kernel_size, model.hyper_cfg.base_channels
        c = self.channels
        expect_stem = (base, c, k, k)
        expect_head = (c, base, k, k)
        if tuple(self.stem_kernel.shape) != expect_stem:
            raise ShapeMismatchError(
                f"teacher stem {tuple(self.stem_kernel.shape)} vs model {expect_stem}"
            )
        if tuple(self.head_kernel.shape) != expect_head:
            raise ShapeMismatchError(
                f"teacher head {tuple(self.head_kernel.shape)} vs model {expect_head}"
            )


def distill_loss(
    teacher: TeacherConvWeights,
    model: VAEModel,
    profile: WavelengthProfile,
) -> torch.Tensor:
    """Sum of Frobenius norms ||W_T - W_S|| over both kernels and biases."""
    if len(profile) != teacher.channels:
        raise ShapeMismatchError(
            f"profile has {len(profile)} channels, teacher has {teacher.channels}"
        )
    teacher.check_compatible(model)
    stem = model.stem.generate(profile)
    head = model.head.generate(profile)
    loss = torch.zeros((), dtype=stem.kernel.dtype)
    for student, frozen in (
        (stem.kernel, teacher.stem_kernel),
        (stem.bias, teacher.stem_bias),
        (head.kernel, teacher.head_kernel),
        (head.bias, teacher.head_bias),
    ):
        loss = loss + torch.linalg.vector_norm(student - frozen.to(student.dtype))
    return loss


def relative_frobenius_error(teacher: TeacherConvWeights, model: VAEModel,
                             profile: WavelengthProfile) -> float:
    """||W_T - W_S||_F / ||W_T||_F over the concatenated four tensors."""
    with torch.no_grad():
        stem = model.stem.generate(profile)
        head = model.head.generate(profile)
        num = 0.0
        den = 0.0
        for student, frozen in (
            (stem.kernel, teacher.stem_kernel),
            (stem.bias, teacher.stem_bias),
            (head.kernel, teacher.head_kernel),
            (head.bias, teacher.head_bias),
        ):
            num += float(((student - frozen.to(student.dtype)) ** 2).sum())
            den += float((frozen.to(torch.float64) ** 2).sum())
    return (num ** 0.5) / (den ** 0.5)


def distill_step(
    teacher: TeacherConvWeights,
    model: VAEModel,
    profile: WavelengthProfile,
    optimizer: torch.optim.Optimizer,
) -> float:
    """One gradient step on the hypernetworks only; returns the scalar loss."""
    optimizer.zero_grad(set_to_none=True)
    loss = distill_loss(teacher, model, profile)
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def rgb_profile() -> WavelengthProfile:
    return WavelengthProfile(RGB_WAVELENGTHS_NM)
