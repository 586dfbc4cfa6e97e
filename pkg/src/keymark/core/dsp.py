"""STFT/ISTFT pair moving signals between time and frequency domains.

Spectrograms are real tensors of shape (..., 2, F, T): channel 0 holds the
real part, channel 1 the imaginary part of the one-sided transform.
"""

from functools import lru_cache

import torch

from ..entities import StftConfig
from ..entities.exceptions import ConfigurationError, ShapeMismatchError

MIN_WINDOW_SUM = 1e-8


def analysis_window(cfg: StftConfig, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Periodic Hann window of ``cfg.window_len`` samples."""
    return torch.hann_window(cfg.window_len, periodic=True, dtype=dtype)


@lru_cache(maxsize=32)
def window_sum_floor(cfg: StftConfig, length: int) -> float:
    """Smallest summed squared window over the ``length`` reconstructed samples."""
    frames = cfg.n_frames(length)
    window_sq = analysis_window(cfg, torch.float64) ** 2
    envelope = torch.zeros((frames - 1) * cfg.hop + cfg.window_len, dtype=torch.float64)
    for t in range(frames):
        envelope[t * cfg.hop : t * cfg.hop + cfg.window_len] += window_sq
    start = cfg.window_len // 2 if cfg.centered else 0
    return float(envelope[start : start + length].min())


def stft(signal: torch.Tensor, cfg: StftConfig) -> torch.Tensor:
    """Centered, reflect-padded STFT of (..., L) signals.

    Returns:
        Tensor of shape (..., 2, window_len // 2 + 1, n_frames(L))
    """
    length = signal.shape[-1]
    if length < 1:
        raise ShapeMismatchError("stft", signal.shape, "at least one sample required")
    if cfg.centered and length <= cfg.window_len // 2:
        raise ConfigurationError(
            f"centered STFT needs more than {cfg.window_len // 2} samples for reflect padding, got {length}"
        )
    if not cfg.centered and length < cfg.window_len:
        raise ConfigurationError(f"uncentered STFT needs at least {cfg.window_len} samples, got {length}")

    batch_shape = signal.shape[:-1]
    flat = signal.reshape(-1, length)
    spec = torch.stft(
        flat,
        n_fft=cfg.window_len,
        hop_length=cfg.hop,
        win_length=cfg.window_len,
        window=analysis_window(cfg, flat.dtype).to(flat.device),
        center=cfg.centered,
        pad_mode="reflect",
        normalized=False,
        onesided=True,
        return_complex=True,
    )
    out = torch.view_as_real(spec).permute(0, 3, 1, 2)
    return out.reshape(*batch_shape, 2, out.shape[-2], out.shape[-1]).contiguous()


def istft(spec: torch.Tensor, cfg: StftConfig, out_len: int) -> torch.Tensor:
    """Overlap-add inverse with division by the summed squared window.

    Raises:
        ShapeMismatchError: If ``spec`` does not match ``cfg`` and ``out_len``
        ConfigurationError: If the summed squared window drops below 1e-8
    """
    expected = (2, cfg.n_bins, cfg.n_frames(out_len))
    if spec.dim() < 3 or tuple(spec.shape[-3:]) != expected:
        raise ShapeMismatchError("istft", spec.shape, expected)
    if window_sum_floor(cfg, out_len) < MIN_WINDOW_SUM:
        raise ConfigurationError(
            f"window sum falls below {MIN_WINDOW_SUM} for window_len={cfg.window_len}, hop={cfg.hop}; "
            "reconstruction is undefined"
        )

    batch_shape = spec.shape[:-3]
    flat = spec.reshape(-1, *expected)
    complex_spec = torch.complex(flat[:, 0], flat[:, 1])
    signal = torch.istft(
        complex_spec,
        n_fft=cfg.window_len,
        hop_length=cfg.hop,
        win_length=cfg.window_len,
        window=analysis_window(cfg, flat.dtype).to(flat.device),
        center=cfg.centered,
        normalized=False,
        onesided=True,
        length=out_len,
    )
    return signal.reshape(*batch_shape, out_len)


def magnitude(spec: torch.Tensor) -> torch.Tensor:
    """|X| from a (..., 2, F, T) spectrogram."""
    return torch.sqrt(spec[..., 0, :, :] ** 2 + spec[..., 1, :, :] ** 2)
