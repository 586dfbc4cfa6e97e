"""Quality metrics reported by evaluation runs."""

import math
from typing import Optional

import torch

from ..entities.exceptions import ShapeMismatchError, SilentReferenceError
from .losses import MultiScaleMelLoss


def snr(x: torch.Tensor, y: torch.Tensor) -> float:
    """10 log10(sum x^2 / sum (x - y)^2) in dB; ``inf`` when y equals x.

    Raises:
        SilentReferenceError: If ``x`` is all zeros
    """
    if x.shape != y.shape:
        raise ShapeMismatchError("snr", x.shape, y.shape)
    ref = x.detach().to(torch.float64)
    signal_power = float(ref.pow(2).sum())
    if signal_power == 0.0:
        raise SilentReferenceError("SNR is undefined for an all-zero reference")
    noise_power = float((ref - y.detach().to(torch.float64)).pow(2).sum())
    if noise_power == 0.0:
        return math.inf
    return 10.0 * math.log10(signal_power / noise_power)


def spectral_distance(x: torch.Tensor, y: torch.Tensor, mel: Optional[MultiScaleMelLoss] = None) -> float:
    """Unweighted multi-scale Mel distance, the perceptual-quality proxy of reports."""
    mel = mel or MultiScaleMelLoss()
    with torch.no_grad():
        return float(mel(x.to(torch.float32), y.to(torch.float32)))
