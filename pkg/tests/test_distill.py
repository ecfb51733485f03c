import pytest
import torch

from satvae.models import build_vae, tiny_hypernet_config, tiny_vae_config
from satvae.exceptions import ShapeMismatchError
from satvae.training import (
    Stage,
    TeacherConvWeights,
    TrainConfig,
    distill_loss,
    distill_step,
    relative_frobenius_error,
    rgb_profile,
    run_training,
)


def tiny_model(seed=0):
    return build_vae(tiny_vae_config(), tiny_hypernet_config(), seed=seed)


def constant_slice_teacher(cfg, value=0.02):
    """Teacher whose per-channel slices are identical, so a zeroed-out
    hypernetwork with matching output biases reproduces it exactly."""
    k, base = cfg.kernel_size, cfg.base_channels
    gen = torch.Generator().manual_seed(3)
    stem_slice = torch.randn(base, k, k, generator=gen) * 0.1
    head_slice = torch.randn(base, k, k, generator=gen) * 0.1
    stem_bias = torch.randn(base, generator=gen) * 0.1
    return TeacherConvWeights(
        stem_kernel=stem_slice.unsqueeze(1).repeat(1, 3, 1, 1),
        stem_bias=stem_bias,
        head_kernel=head_slice.unsqueeze(0).repeat(3, 1, 1, 1),
        head_bias=torch.full((3,), value),
    )


def test_exact_match_gives_zero_loss():
    model = tiny_model()
    cfg = model.hyper_cfg
    teacher = constant_slice_teacher(cfg)

    with torch.no_grad():
        # Zero the generator MLP outputs and write the teacher into the biases:
        # every channel then generates the teacher's (shared) slice exactly.
        stem_k = model.stem.kernel_mlp.net[-1]
        stem_k.weight.zero_()
        stem_k.bias.copy_(teacher.stem_kernel[:, 0].reshape(-1))
        stem_b = model.stem.bias_mlp.net[-1]
        stem_b.weight.zero_()
        stem_b.bias.copy_(teacher.stem_bias)

        head_k = model.head.kernel_mlp.net[-1]
        head_k.weight.zero_()
        head_k.bias.copy_(teacher.head_kernel[0].reshape(-1))
        head_b = model.head.bias_mlp.net[-1]
        head_b.weight.zero_()
        head_b.bias.fill_(float(teacher.head_bias[0]))

    assert float(distill_loss(teacher, model, rgb_profile())) == 0.0
    assert relative_frobenius_error(teacher, model, rgb_profile()) == 0.0


def test_teacher_shape_mismatch_rejected():
    model = tiny_model()
    bad_cfg = tiny_hypernet_config()
    teacher = TeacherConvWeights.random(bad_cfg, channels=5, seed=0)
    with pytest.raises(ShapeMismatchError):
        distill_loss(teacher, model, rgb_profile())


def test_profile_channel_mismatch_rejected():
    model = tiny_model()
    teacher = TeacherConvWeights.random(model.hyper_cfg, seed=0)
    from satvae.data import WavelengthProfile
    with pytest.raises(ShapeMismatchError):
        distill_loss(teacher, model, WavelengthProfile((665.0, 560.0)))


def test_distill_step_reduces_loss():
    model = tiny_model()
    teacher = TeacherConvWeights.random(model.hyper_cfg, seed=1)
    optimizer = torch.optim.AdamW(model.hypernet_parameters(), lr=1e-3)
    first = distill_step(teacher, model, rgb_profile(), optimizer)
    losses = [distill_step(teacher, model, rgb_profile(), optimizer)
              for _ in range(200)]
    assert losses[-1] < 0.5 * first


def test_distill_touches_only_hypernets(tmp_path):
    model = tiny_model()
    backbone_before = {
        name: p.detach().clone()
        for name, p in model.named_parameters()
        if name.startswith(("encoder_backbone", "decoder_backbone"))
    }
    cfg = TrainConfig(stage=Stage.DISTILL, steps=50, checkpoint_every=50, seed=0)
    run_training(None, cfg, model, tmp_path)
    for name, p in model.named_parameters():
        if name in backbone_before:
            assert torch.equal(p.detach(), backbone_before[name]), name


def test_run_training_distill_logs_and_checkpoints(tmp_path):
    model = tiny_model()
    cfg = TrainConfig(stage=Stage.DISTILL, steps=20, checkpoint_every=10, seed=0)
    result = run_training(None, cfg, model, tmp_path)
    assert len(result.losses) == 20
    assert (tmp_path / "distill_checkpoint.svcp").exists()
    import json
    records = [json.loads(line) for line in open(result.log_path)]
    assert len(records) == 20
    assert all(r["stage"] == "DISTILL" for r in records)
