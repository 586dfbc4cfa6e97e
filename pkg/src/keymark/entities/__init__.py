"""Core entities for the watermarking toolkit."""

from .checkpoint import CHECKPOINT_VERSION, Checkpoint
from .configs import (
    AttackConfig,
    CorpusSpec,
    LossWeights,
    MelScaleConfig,
    ModelConfig,
    RunConfig,
    StftConfig,
    TrainConfig,
    default_attack_menu,
)
from .enums import (
    AdversarialForm,
    AttackOp,
    CodecInit,
    PerceptualConstraint,
    RedundancySource,
    TrainingStrategy,
    WindowType,
)
from .models import AudioClip, KeyBits, WatermarkBits, WatermarkStack
from .results import (
    DecodeResult,
    MetricsReport,
    MetricsRow,
    SelfTestCheck,
    SelfTestReport,
    StepLosses,
)

__all__ = [
    "CHECKPOINT_VERSION",
    "Checkpoint",
    "AdversarialForm",
    "AttackOp",
    "CodecInit",
    "PerceptualConstraint",
    "RedundancySource",
    "TrainingStrategy",
    "WindowType",
    "AttackConfig",
    "CorpusSpec",
    "LossWeights",
    "MelScaleConfig",
    "ModelConfig",
    "RunConfig",
    "StftConfig",
    "TrainConfig",
    "default_attack_menu",
    "AudioClip",
    "KeyBits",
    "WatermarkBits",
    "WatermarkStack",
    "DecodeResult",
    "MetricsReport",
    "MetricsRow",
    "SelfTestCheck",
    "SelfTestReport",
    "StepLosses",
]
