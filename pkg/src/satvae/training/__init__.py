"""Two-stage training: teacher-weight distillation then finetuning."""

from .distill import (
    TeacherConvWeights,
    distill_loss,
    distill_step,
    relative_frobenius_error,
    rgb_profile,
)
from .losses import charbonnier, reconstruction_loss
from .loop import (
    ModalityBatcher,
    Stage,
    TrainConfig,
    TrainResult,
    cosine_lr,
    finetune_step,
    load_train_checkpoint,
    run_training,
)

__all__ = [
    "TeacherConvWeights", "distill_loss", "distill_step",
    "relative_frobenius_error", "rgb_profile",
    "charbonnier", "reconstruction_loss",
    "ModalityBatcher", "Stage", "TrainConfig", "TrainResult",
    "cosine_lr", "finetune_step", "load_train_checkpoint", "run_training",
]
