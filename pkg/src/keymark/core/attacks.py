"""Audio editing operations applied between embedding and decoding.

Every operation preserves length and is differentiable with respect to its
input, so the same code serves as training augmentation and as an
evaluation attack.
"""

import logging
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
import torchaudio.functional as AF
from scipy import signal

from ..entities import AttackConfig, AttackOp, AudioClip
from ..entities.exceptions import EmptyMenuError, ShapeMismatchError
from ..entities.models import PIPELINE_SAMPLE_RATE

logger = logging.getLogger(__name__)

PINK_ROWS = 16


def _generator(cfg: AttackConfig, generator: Optional[torch.Generator]) -> torch.Generator:
    if cfg.seed is not None:
        return torch.Generator().manual_seed(cfg.seed)
    if generator is None:
        return torch.Generator().manual_seed(0)
    return generator


def _fit_length(x: torch.Tensor, length: int) -> torch.Tensor:
    if x.shape[-1] >= length:
        return x[..., :length]
    return torch.nn.functional.pad(x, (0, length - x.shape[-1]))


def _scale_to_snr(x: torch.Tensor, noise: torch.Tensor, snr_db: float) -> torch.Tensor:
    """Scale each row of ``noise`` so that 10 log10(P_x / P_noise) == snr_db."""
    p_signal = x.detach().pow(2).mean(dim=-1, keepdim=True)
    p_noise = noise.pow(2).mean(dim=-1, keepdim=True).clamp_min(torch.finfo(noise.dtype).tiny)
    return noise * torch.sqrt(p_signal / (p_noise * 10.0 ** (snr_db / 10.0)))


def pink_noise(length: int, generator: torch.Generator, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Voss-McCartney pink noise: a white row plus 16 held rows with periods 2^r and random phase."""
    n = torch.arange(length)
    total = torch.randn(length, generator=generator, dtype=torch.float64)
    for r in range(PINK_ROWS):
        period = 2**r
        offset = int(torch.randint(0, period, (1,), generator=generator).item())
        index = (n + offset) // period
        values = torch.randn(int(index[-1].item()) + 1, generator=generator, dtype=torch.float64)
        total += values[index]
    return total.to(dtype)


@lru_cache(maxsize=64)
def butterworth_sos(op: AttackOp, order: int, low_hz: float, high_hz: float) -> np.ndarray:
    """Second-order sections of the LF / HF / BF Butterworth design at 16 kHz."""
    if op == AttackOp.LF:
        return signal.butter(order, high_hz, btype="lowpass", fs=PIPELINE_SAMPLE_RATE, output="sos")
    if op == AttackOp.HF:
        return signal.butter(order, low_hz, btype="highpass", fs=PIPELINE_SAMPLE_RATE, output="sos")
    return signal.butter(order, [low_hz, high_hz], btype="bandpass", fs=PIPELINE_SAMPLE_RATE, output="sos")


def _filter_edges(cfg: AttackConfig) -> Tuple[float, float]:
    if cfg.op == AttackOp.LF:
        return 0.0, cfg.lowpass_hz
    if cfg.op == AttackOp.HF:
        return cfg.highpass_hz, 0.0
    return cfg.band_low_hz, cfg.band_high_hz


def _biquad_cascade(x: torch.Tensor, sos: np.ndarray) -> torch.Tensor:
    y = x
    for section in sos:
        b = torch.as_tensor(section[:3], dtype=x.dtype)
        a = torch.as_tensor(section[3:], dtype=x.dtype)
        y = AF.lfilter(y, a, b, clamp=False)
    return y


def _resample(x: torch.Tensor, orig_hz: int, new_hz: int, taps: int) -> torch.Tensor:
    """Kaiser-windowed sinc resampling with ``taps`` filter taps."""
    return AF.resample(x, orig_hz, new_hz, lowpass_filter_width=taps // 2, resampling_method="sinc_interp_kaiser")


def _gain(x: torch.Tensor, gain_db: float) -> torch.Tensor:
    factor = torch.tensor(10.0 ** (gain_db / 20.0), dtype=x.dtype)
    return x * factor


def _shush(x: torch.Tensor, fraction: float, generator: torch.Generator) -> torch.Tensor:
    length = x.shape[-1]
    span = int(np.floor(fraction * length + 1e-9))
    if span == 0:
        return x
    starts = torch.randint(0, length - span + 1, (x.shape[0],), generator=generator)
    n = torch.arange(length).unsqueeze(0)
    muted = (n >= starts.unsqueeze(1)) & (n < starts.unsqueeze(1) + span)
    return torch.where(muted, torch.zeros((), dtype=x.dtype), x)


def apply_attack(
    x: torch.Tensor,
    cfg: AttackConfig,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """Apply one editing operation to (L,) or (B, L) audio.

    Randomness (RN, PN, SA) is drawn from ``cfg.seed`` when set, otherwise
    from ``generator``.
    """
    if x.dim() not in (1, 2):
        raise ShapeMismatchError("apply_attack", x.shape, "(L,) or (B, L)")
    if cfg.op == AttackOp.NA:
        return x
    squeeze = x.dim() == 1
    batch = x.unsqueeze(0) if squeeze else x
    length = batch.shape[-1]
    gen = _generator(cfg, generator)

    if cfg.op == AttackOp.UD:
        down = _resample(batch, PIPELINE_SAMPLE_RATE, cfg.resample_hz, cfg.resample_taps)
        out = _fit_length(_resample(down, cfg.resample_hz, PIPELINE_SAMPLE_RATE, cfg.resample_taps), length)
    elif cfg.op == AttackOp.RN:
        noise = torch.randn(batch.shape, generator=gen, dtype=torch.float64).to(batch.dtype)
        out = batch + _scale_to_snr(batch, noise, cfg.snr_db)
    elif cfg.op == AttackOp.PN:
        noise = torch.stack([pink_noise(length, gen, batch.dtype) for _ in range(batch.shape[0])])
        out = batch + _scale_to_snr(batch, noise, cfg.snr_db)
    elif cfg.op in (AttackOp.LF, AttackOp.HF, AttackOp.BF):
        low, high = _filter_edges(cfg)
        out = _biquad_cascade(batch, butterworth_sos(cfg.op, cfg.filter_order, low, high))
    elif cfg.op in (AttackOp.BA, AttackOp.DA):
        out = _gain(batch, cfg.effective_gain_db)
    elif cfg.op == AttackOp.SA:
        out = _shush(batch, cfg.zero_fraction, gen)
    else:
        raise ValueError(f"unsupported attack {cfg.op}")

    return out.squeeze(0) if squeeze else out


def attack_clip(clip: AudioClip, cfg: AttackConfig, generator: Optional[torch.Generator] = None) -> AudioClip:
    """:func:`apply_attack` on an :class:`AudioClip`."""
    with torch.no_grad():
        return AudioClip(samples=apply_attack(clip.samples, cfg, generator), sample_rate=clip.sample_rate)


def random_attack(generator: torch.Generator, menu: Sequence[AttackConfig]) -> AttackConfig:
    """Uniform draw from ``menu``.

    Raises:
        EmptyMenuError: If ``menu`` is empty
    """
    if not menu:
        raise EmptyMenuError("attack menu must contain at least one operation")
    return menu[int(torch.randint(0, len(menu), (1,), generator=generator).item())]


def attack_from_params(op: str, params: Optional[Dict[str, object]] = None) -> AttackConfig:
    """Build an :class:`AttackConfig` from an op abbreviation and keyword parameters."""
    return AttackConfig(op=AttackOp(op.upper()), **(params or {}))
