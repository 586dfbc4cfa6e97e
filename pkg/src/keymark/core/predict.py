"""Redundancy estimators for the backward pass of the invertible network."""

from typing import Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..entities.exceptions import ShapeMismatchError
from . import autodiff as ad
from .inn import SPEC_CHANNELS


class ResidualBlock(nn.Module):
    """conv 3x3 -> leaky ReLU -> conv 3x3, plus identity skip."""

    def __init__(self, channels: int, slope: float = 0.2):
        super().__init__()
        self.slope = slope
        self.conv1 = ad.SameConv2d(channels, channels, 3)
        self.conv2 = ad.SameConv2d(channels, channels, 3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return ad.add(x, self.conv2(F.leaky_relu(self.conv1(x), self.slope)))


class PredictModule(nn.Module):
    """Estimates the redundancy wm_pre from a watermarked spectrogram.

    A 3x3 stem lifts the two spectrogram channels to ``hidden`` channels,
    ``blocks`` residual blocks refine them and a zero-initialised 1x1 head
    maps back to two channels, so an untrained module predicts zeros.
    """

    def __init__(self, hidden: int = 16, blocks: int = 8, slope: float = 0.2):
        super().__init__()
        self.slope = slope
        self.stem = ad.SameConv2d(SPEC_CHANNELS, hidden, 3)
        self.blocks = nn.ModuleList(ResidualBlock(hidden, slope) for _ in range(blocks))
        self.head = ad.SameConv2d(hidden, SPEC_CHANNELS, 1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x_wm_f: torch.Tensor) -> torch.Tensor:
        if x_wm_f.dim() != 4 or x_wm_f.shape[1] != SPEC_CHANNELS:
            raise ShapeMismatchError("predict", x_wm_f.shape, (-1, SPEC_CHANNELS, "F", "T"))
        h = F.leaky_relu(self.stem(x_wm_f), self.slope)
        for block in self.blocks:
            h = block(h)
        return self.head(h)


def gaussian_redundancy(
    shape: Sequence[int],
    generator: Optional[torch.Generator] = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """I.i.d. standard normal redundancy used in place of the predict module."""
    return torch.randn(tuple(shape), generator=generator, dtype=dtype)
