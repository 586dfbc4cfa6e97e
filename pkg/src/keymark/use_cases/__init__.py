"""Use cases for embedding, decoding, training, evaluation and self-tests."""

from .corpus import CorpusUseCase
from .evaluation import EvaluationUseCase, scenario_label
from .interface import ICheckpointRepository
from .selftest import SelfTestUseCase
from .training import StepPayload, TrainingUseCase, load_model
from .watermarking import WatermarkingUseCase

__all__ = [
    "CorpusUseCase",
    "EvaluationUseCase",
    "ICheckpointRepository",
    "SelfTestUseCase",
    "StepPayload",
    "TrainingUseCase",
    "WatermarkingUseCase",
    "load_model",
    "scenario_label",
]
