"""Numerical core: transforms, networks, losses and editing operations."""

from .attacks import apply_attack, attack_clip, pink_noise, random_attack
from .codec import WatermarkCodec, ber, sample_key, sample_watermark
from .dsp import istft, stft
from .inn import CouplingBlock, DenseSubnet, InvertibleNetwork, clamp_alpha
from .losses import (
    Discriminator,
    MultiScaleMelLoss,
    PerceptualLoss,
    accuracy_loss,
    broadweight_vector,
    discriminator_update,
)
from .metrics import snr, spectral_distance
from .model import WatermarkModel, build_model
from .predict import PredictModule, gaussian_redundancy

__all__ = [
    "apply_attack",
    "attack_clip",
    "pink_noise",
    "random_attack",
    "WatermarkCodec",
    "ber",
    "sample_key",
    "sample_watermark",
    "istft",
    "stft",
    "CouplingBlock",
    "DenseSubnet",
    "InvertibleNetwork",
    "clamp_alpha",
    "Discriminator",
    "MultiScaleMelLoss",
    "PerceptualLoss",
    "accuracy_loss",
    "broadweight_vector",
    "discriminator_update",
    "snr",
    "spectral_distance",
    "WatermarkModel",
    "build_model",
    "PredictModule",
    "gaussian_redundancy",
]
