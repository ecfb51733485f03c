"""Deterministic RNG plumbing.

All randomness in the toolkit flows through explicit ``torch.Generator``
objects derived from user-supplied seeds; nothing touches torch's global RNG
state outside a fork. Per-step seeds are derived statelessly so a training
run can resume from a checkpoint without serializing generator state.
"""

from __future__ import annotations

import contextlib
from collections.abc import Iterator

import torch

_MIX = 0x9E3779B97F4A7C15
_MASK = (1 << 63) - 1


def make_generator(seed: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(int(seed) & _MASK)
    return gen


def derive_seed(seed: int, *streams: int) -> int:
    """Mix a base seed with one or more stream indices (step, phase, ...)."""
    acc = int(seed) & _MASK
    for s in streams:
        acc = (acc ^ ((int(s) + 1) * _MIX)) & _MASK
        acc = (acc * 0xBF58476D1CE4E5B9) & _MASK
    return acc


def step_generator(seed: int, *streams: int) -> torch.Generator:
    """Fresh generator for one training/sampling step, derived statelessly."""
    return make_generator(derive_seed(seed, *streams))


@contextlib.contextmanager
def isolated_torch_seed(seed: int) -> Iterator[None]:
    """Temporarily seed torch's global RNG (used only for module init)."""
    with torch.random.fork_rng():
        torch.manual_seed(int(seed) & _MASK)
        yield
