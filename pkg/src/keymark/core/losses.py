"""Training objectives: perceptual loss, accuracy loss and the discriminator.

All L2 terms are mean squared errors and all L1 terms mean absolute errors,
reduced over every element of the batch.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F
import torchaudio

from ..entities import AdversarialForm, LossWeights, MelScaleConfig, PerceptualConstraint, StftConfig
from ..entities.exceptions import ConfigurationError, ShapeMismatchError
from . import autodiff as ad
from .dsp import stft

logger = logging.getLogger(__name__)

LOGIT_CLAMP = 15.0


def broadweight_vector(
    length: int,
    frac: float = 0.03,
    hi: float = 10.0,
    lo: float = 1.0,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Per-sample weights: ``hi`` on the first and last floor(frac * length) samples, ``lo`` elsewhere.

    Raises:
        ConfigurationError: If ``frac`` is outside [0, 0.5]
    """
    if not 0.0 <= frac <= 0.5:
        raise ConfigurationError(f"broadweight fraction must lie in [0, 0.5], got {frac}")
    width = math.floor(frac * length + 1e-9)
    weights = torch.full((length,), lo, dtype=dtype)
    if width > 0:
        weights[:width] = hi
        weights[length - width :] = hi
    return weights


class MultiScaleMelLoss(nn.Module):
    """Sum over scales i of MAE + MSE between log-compressed Mel spectrograms.

    Scale i uses a normalized STFT with window 2^i and hop 2^i / 4 followed
    by a Slaney-normalized Mel filterbank; magnitudes are compressed with
    log(1 + mel). An optional per-sample weight multiplies both signals first.
    """

    def __init__(self, cfg: Optional[MelScaleConfig] = None):
        super().__init__()
        self.cfg = cfg or MelScaleConfig()
        with warnings.catch_warnings():
            # small windows leave some of the 64 triangular filters empty
            warnings.simplefilter("ignore", UserWarning)
            self.transforms = nn.ModuleList(
                torchaudio.transforms.MelSpectrogram(
                    sample_rate=self.cfg.sample_rate,
                    n_fft=2**i,
                    win_length=2**i,
                    hop_length=2**i // 4,
                    f_min=self.cfg.f_min,
                    f_max=self.cfg.f_max,
                    n_mels=self.cfg.n_mels,
                    power=1.0,
                    normalized=self.cfg.normalized,
                    center=True,
                    pad_mode="reflect",
                    norm="slaney",
                    mel_scale="slaney",
                )
                for i in self.cfg.scales
            )

    def forward(self, x: torch.Tensor, y: torch.Tensor, weight: Optional[torch.Tensor] = None) -> torch.Tensor:
        if x.shape != y.shape:
            raise ShapeMismatchError("multiscale_mel_loss", x.shape, y.shape)
        if weight is not None:
            if weight.shape[-1] != x.shape[-1]:
                raise ShapeMismatchError("multiscale_mel_loss", x.shape, weight.shape)
            weight = weight.to(x.dtype)
            x = ad.mul(x, weight)
            y = ad.mul(y, weight)
        total = x.new_zeros(())
        for transform in self.transforms:
            diff = torch.log1p(transform(x)) - torch.log1p(transform(y))
            total = total + diff.abs().mean() + ad.mean(ad.mul(diff, diff))
        return total


class Discriminator(nn.Module):
    """Four stride-2 3x3 conv layers over the STFT of a waveform, global mean, clamped logit.

    The last layer maps to a single channel whose spatial mean is the logit.
    """

    def __init__(self, stft_cfg: Optional[StftConfig] = None, channels: int = 16, slope: float = 0.2):
        super().__init__()
        self.stft_cfg = stft_cfg or StftConfig()
        self.slope = slope
        widths = [2, channels, channels * 2, channels * 4, 1]
        self.convs = nn.ModuleList(
            nn.Conv2d(c_in, c_out, 3, stride=2, padding=1) for c_in, c_out in zip(widths, widths[1:])
        )

    def logits(self, audio: torch.Tensor) -> torch.Tensor:
        """(B,) logits clamped to [-15, 15]."""
        h = stft(audio, self.stft_cfg)
        if h.dim() == 3:
            h = h.unsqueeze(0)
        for conv in self.convs[:-1]:
            h = F.leaky_relu(conv(h), self.slope)
        h = self.convs[-1](h)
        return torch.clamp(h.mean(dim=(1, 2, 3)), -LOGIT_CLAMP, LOGIT_CLAMP)

    def forward(self, audio: torch.Tensor) -> torch.Tensor:
        """Probability in (0, 1) that ``audio`` is unmarked."""
        return ad.sigmoid(self.logits(audio))


def adversarial_term(disc: Discriminator, x_wm: torch.Tensor, form: AdversarialForm) -> torch.Tensor:
    """Generator-side adversarial term, mean over the batch.

    ``printed`` is log(1 - D(x_wm)); ``non_saturating`` is -log D(x_wm).
    """
    logits = disc.logits(x_wm)
    if form == AdversarialForm.NON_SATURATING:
        return F.softplus(-logits).mean()
    return (-F.softplus(logits)).mean()


class PerceptualLoss(nn.Module):
    """w_p1 * MSE(x, x_wm) + w_p2 * adversarial + w_p3 * weighted multi-scale Mel loss.

    The constraint preset selects the Mel weighting: ``l2`` drops the Mel term,
    ``l2_mel`` uses uniform weights and ``l2_mel_broadweight`` the BroadWeight vector.
    """

    def __init__(
        self,
        weights: LossWeights,
        mel: Optional[MultiScaleMelLoss] = None,
        constraint: PerceptualConstraint = PerceptualConstraint.L2_MEL_BROADWEIGHT,
        broadweight_fraction: float = 0.03,
        broadweight_high: float = 10.0,
    ):
        super().__init__()
        self.weights = weights
        self.mel = mel or MultiScaleMelLoss()
        self.constraint = constraint
        self.broadweight_fraction = broadweight_fraction
        self.broadweight_high = broadweight_high

    def sample_weight(self, length: int, dtype: torch.dtype = torch.float32) -> Optional[torch.Tensor]:
        if self.constraint == PerceptualConstraint.L2_MEL_BROADWEIGHT:
            return broadweight_vector(length, self.broadweight_fraction, self.broadweight_high, dtype=dtype)
        return None

    def forward(self, x: torch.Tensor, x_wm: torch.Tensor, disc: Optional[Discriminator] = None) -> torch.Tensor:
        if x.shape != x_wm.shape:
            raise ShapeMismatchError("perceptual_loss", x.shape, x_wm.shape)
        diff = x - x_wm
        total = self.weights.w_p1 * ad.mean(ad.mul(diff, diff))
        if disc is not None and self.weights.w_p2 != 0:
            total = total + self.weights.w_p2 * adversarial_term(disc, x_wm, self.weights.adversarial_form)
        if self.constraint != PerceptualConstraint.L2 and self.weights.w_p3 != 0:
            total = total + self.weights.w_p3 * self.mel(x, x_wm, self.sample_weight(x.shape[-1], x.dtype))
        return total


@dataclass(frozen=True)
class AccuracyTerms:
    total: torch.Tensor
    bce_correct: torch.Tensor
    bce_wrong: torch.Tensor


def hinge_penalty(bce_wrong: torch.Tensor, weights: LossWeights) -> torch.Tensor:
    """w_l1 * max(0, w_l2 - BCE(wm, wm_wrong))."""
    return weights.w_l1 * F.relu(weights.w_l2 - bce_wrong)


def accuracy_loss(
    wm: torch.Tensor,
    logits_re: torch.Tensor,
    logits_wrong: torch.Tensor,
    weights: LossWeights,
) -> AccuracyTerms:
    """BCE(wm, wm_re) plus the wrong-key hinge, from logits.

    Raises:
        ShapeMismatchError: If the payload and logit shapes differ
    """
    if wm.shape != logits_re.shape or wm.shape != logits_wrong.shape:
        raise ShapeMismatchError("accuracy_loss", wm.shape, logits_re.shape, logits_wrong.shape)
    target = wm.to(logits_re.dtype)
    bce_correct = F.binary_cross_entropy_with_logits(logits_re, target)
    bce_wrong = F.binary_cross_entropy_with_logits(logits_wrong, target)
    return AccuracyTerms(
        total=bce_correct + hinge_penalty(bce_wrong, weights),
        bce_correct=bce_correct,
        bce_wrong=bce_wrong,
    )


def discriminator_loss(disc: Discriminator, x_real: torch.Tensor, x_fake: torch.Tensor) -> torch.Tensor:
    """-log D(x_real) - log(1 - D(x_fake)), mean over the batch."""
    if x_real.shape != x_fake.shape:
        raise ShapeMismatchError("discriminator_update", x_real.shape, x_fake.shape)
    return F.softplus(-disc.logits(x_real)).mean() + F.softplus(disc.logits(x_fake)).mean()


def discriminator_update(
    disc: Discriminator,
    optimizer: torch.optim.Optimizer,
    x_real: torch.Tensor,
    x_fake: torch.Tensor,
) -> float:
    """One optimizer step on the discriminator only; returns the loss before the step."""
    optimizer.zero_grad(set_to_none=True)
    loss = discriminator_loss(disc, x_real.detach(), x_fake.detach())
    loss.backward()
    optimizer.step()
    return float(loss.detach())
