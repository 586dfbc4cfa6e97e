"""keymark - key-controllable audio watermarking.

This package provides:
- A key-gated invertible coupling network that hides a bit payload in the STFT of 1-s clips
- A predict module standing in for the discarded network output at decode time
- Training with perceptual, adversarial and wrong-key hinge losses
- Editing operations, BER/SNR reports and numerical self-tests

Example usage:
    from keymark import BinaryCheckpointRepository, KeyBits, WatermarkBits, WatermarkingUseCase, load_model, read_wav

    model = load_model(BinaryCheckpointRepository().load("model.wake"))
    use_case = WatermarkingUseCase(model)
    marked = use_case.embed(read_wav("speech.wav"), WatermarkBits.from_hex("deadbeef", 32), KeyBits.from_hex("a5", 8))
    print(use_case.decode(marked, KeyBits.from_hex("a5", 8)).bits.to_hex())
"""

from .adapters import (
    BinaryCheckpointRepository,
    MemoryCheckpointRepository,
    load_run_config,
    load_train_config,
    read_wav,
    write_wav,
)
from .core import WatermarkModel, apply_attack, build_model, snr, spectral_distance
from .entities import (
    AttackConfig,
    AttackOp,
    AudioClip,
    Checkpoint,
    CorpusSpec,
    DecodeResult,
    KeyBits,
    MetricsReport,
    ModelConfig,
    RedundancySource,
    RunConfig,
    StftConfig,
    TrainConfig,
    WatermarkBits,
    WatermarkStack,
)
from .use_cases import (
    CorpusUseCase,
    EvaluationUseCase,
    SelfTestUseCase,
    TrainingUseCase,
    WatermarkingUseCase,
    load_model,
)

__version__ = "0.1.0"
__author__ = "Mohammad Mahdi Samei"
__email__ = "9259samei@gmail.com"

__all__ = [
    # Core entities
    "AttackConfig",
    "AttackOp",
    "AudioClip",
    "Checkpoint",
    "CorpusSpec",
    "DecodeResult",
    "KeyBits",
    "MetricsReport",
    "ModelConfig",
    "RedundancySource",
    "RunConfig",
    "StftConfig",
    "TrainConfig",
    "WatermarkBits",
    "WatermarkStack",
    # Numerical core
    "WatermarkModel",
    "apply_attack",
    "build_model",
    "snr",
    "spectral_distance",
    # Use cases
    "CorpusUseCase",
    "EvaluationUseCase",
    "SelfTestUseCase",
    "TrainingUseCase",
    "WatermarkingUseCase",
    "load_model",
    # Adapters
    "BinaryCheckpointRepository",
    "MemoryCheckpointRepository",
    "load_run_config",
    "load_train_config",
    "read_wav",
    "write_wav",
]
