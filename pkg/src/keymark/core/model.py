"""The learnable whole: codec, invertible network, predict module and discriminator."""

import logging
from typing import Dict, Iterator, Optional

import torch
import torch.nn as nn

from ..entities import ModelConfig, RedundancySource
from ..entities.exceptions import ShapeMismatchError
from . import autodiff as ad
from .codec import WatermarkCodec
from .dsp import istft, stft
from .inn import InvertibleNetwork, KeysLike
from .losses import Discriminator
from .predict import PredictModule, gaussian_redundancy

logger = logging.getLogger(__name__)


class WatermarkModel(nn.Module):
    """Container for every parameter of the pipeline.

    ``embed`` and ``decode`` are the batched tensor paths; clip handling,
    segmenting and stacking live in the watermarking use case.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.codec = WatermarkCodec(cfg.payload_bits, cfg.clip_len, cfg.codec_init)
        self.inn = InvertibleNetwork(
            n_blocks=cfg.key_bits,
            growth=cfg.subnet_growth,
            layers=cfg.subnet_layers,
            clamp_scale=cfg.clamp_scale,
            slope=cfg.leaky_slope,
        )
        self.predict = PredictModule(cfg.predict_hidden, cfg.predict_blocks, cfg.leaky_slope)
        self.disc = Discriminator(cfg.stft, cfg.disc_channels, cfg.leaky_slope)

    def _check_length(self, op: str, x: torch.Tensor) -> None:
        if x.dim() != 2 or x.shape[-1] != self.cfg.clip_len:
            raise ShapeMismatchError(op, x.shape, (-1, self.cfg.clip_len))

    def embed(self, x: torch.Tensor, wm: torch.Tensor, keys: KeysLike) -> torch.Tensor:
        """Watermark (B, clip_len) audio with (B, L) payload bits under ``keys``.

        The redundancy output of the invertible network is discarded.
        """
        self._check_length("embed", x)
        wm_signal = self.codec.bits_to_signal(wm).expand(x.shape[0], -1)
        x_f = stft(x, self.cfg.stft)
        wm_f = stft(wm_signal, self.cfg.stft)
        x_out, _ = self.inn(x_f, wm_f, keys)
        return istft(x_out, self.cfg.stft, x.shape[-1])

    def redundancy(
        self,
        x_wm_f: torch.Tensor,
        source: RedundancySource = RedundancySource.PREDICT,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        if source == RedundancySource.GAUSSIAN:
            return gaussian_redundancy(x_wm_f.shape, generator, x_wm_f.dtype)
        return self.predict(x_wm_f)

    def decode(
        self,
        x_wm: torch.Tensor,
        keys: KeysLike,
        source: RedundancySource = RedundancySource.PREDICT,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        """Payload logits (B, L) recovered from (B, clip_len) audio under ``keys``."""
        self._check_length("decode", x_wm)
        x_wm_f = stft(x_wm, self.cfg.stft)
        wm_pre = self.redundancy(x_wm_f, source, generator)
        _, wm_pre_out = self.inn.inverse(x_wm_f, wm_pre, keys)
        return self.codec.signal_logits(istft(wm_pre_out, self.cfg.stft, x_wm.shape[-1]))

    def generator_parameters(self) -> Iterator[nn.Parameter]:
        """Parameters updated by the generator objective."""
        for module in (self.codec, self.inn, self.predict):
            yield from module.parameters()

    def discriminator_parameters(self) -> Iterator[nn.Parameter]:
        return self.disc.parameters()

    def parameter_groups(self) -> Dict[str, nn.Module]:
        return {"codec": self.codec, "inn": self.inn, "predict": self.predict, "disc": self.disc}

    def assert_finite(self) -> None:
        """Raise NonFiniteError naming the first non-finite parameter."""
        for name, param in self.named_parameters():
            ad.assert_finite(param.detach(), f"parameter {name}")


def build_model(cfg: Optional[ModelConfig] = None, seed: Optional[int] = None) -> WatermarkModel:
    """Construct a model; ``seed`` fixes the random initialisation."""
    if seed is not None:
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            model = WatermarkModel(cfg or ModelConfig())
    else:
        model = WatermarkModel(cfg or ModelConfig())
    params = sum(p.numel() for p in model.parameters())
    logger.debug(f"Built WatermarkModel with {params} parameters")
    return model
