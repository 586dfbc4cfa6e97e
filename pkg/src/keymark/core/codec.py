"""Watermark codec: bits to a time-domain signal and back."""

import logging
from typing import Iterable, Optional, Tuple, Union

import torch
import torch.nn as nn

from ..entities import CodecInit, KeyBits, WatermarkBits
from ..entities.exceptions import KeySpaceExhaustedError, PayloadLengthError, ShapeMismatchError
from ..entities.models import BitVector
from . import autodiff as ad

logger = logging.getLogger(__name__)

BitsLike = Union[WatermarkBits, torch.Tensor]


class WatermarkCodec(nn.Module):
    """Bias-free linear embedding map (L -> clip_len) and its readout (clip_len -> L).

    The embedding consumes the signed encoding s = 2b - 1, so the synthesized
    signal of the complement payload is exactly the negated signal.
    """

    def __init__(self, payload_bits: int, clip_len: int, init: CodecInit = CodecInit.RANDOM):
        super().__init__()
        self.payload_bits = payload_bits
        self.clip_len = clip_len
        self.embed_matrix = nn.Parameter(torch.empty(payload_bits, clip_len))
        self.map_matrix = nn.Parameter(torch.empty(clip_len, payload_bits))
        self.reset_parameters(init)

    def reset_parameters(self, init: CodecInit = CodecInit.RANDOM) -> None:
        with torch.no_grad():
            if init == CodecInit.ZERO:
                self.embed_matrix.zero_()
                self.map_matrix.zero_()
            else:
                nn.init.normal_(self.embed_matrix, std=self.payload_bits**-0.5)
                nn.init.normal_(self.map_matrix, std=self.clip_len**-0.5)

    def _signed(self, wm: BitsLike) -> torch.Tensor:
        if isinstance(wm, BitVector):
            signed = wm.signed(self.embed_matrix.dtype).unsqueeze(0)
        else:
            signed = 2.0 * wm.to(self.embed_matrix.dtype) - 1.0
            if signed.dim() == 1:
                signed = signed.unsqueeze(0)
        if signed.shape[-1] != self.payload_bits:
            raise PayloadLengthError(
                f"watermark has {signed.shape[-1]} bits, codec expects {self.payload_bits}"
            )
        return signed

    def bits_to_signal(self, wm: BitsLike) -> torch.Tensor:
        """Synthesize the (B, clip_len) watermark signal from bits in {0, 1}."""
        return ad.matmul(self._signed(wm), self.embed_matrix)

    def signal_logits(self, signal: torch.Tensor) -> torch.Tensor:
        """Readout logits (B, L) from (B, clip_len) or (clip_len,) signals."""
        if signal.dim() == 1:
            signal = signal.unsqueeze(0)
        if signal.shape[-1] != self.clip_len:
            raise ShapeMismatchError("signal_to_bits", signal.shape, (self.clip_len,))
        return ad.matmul(signal, self.map_matrix)

    def signal_to_bits(self, signal: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Logits and hard bits; a bit is 1 only when sigmoid(logit) > 0.5."""
        logits = self.signal_logits(signal)
        return logits, threshold_bits(logits)


def threshold_bits(logits: torch.Tensor) -> torch.Tensor:
    """Bits from logits; exact ties (logit 0) decode to 0."""
    return (torch.sigmoid(logits) > 0.5).to(torch.long)


def ber(a: BitVector, b: BitVector) -> float:
    """Bit error rate in percent: 100 * Hamming(a, b) / L.

    Raises:
        PayloadLengthError: If the vectors differ in length
    """
    if len(a) != len(b):
        raise PayloadLengthError(f"cannot compare {len(a)}-bit and {len(b)}-bit vectors")
    errors = sum(x != y for x, y in zip(a.bits, b.bits))
    return 100.0 * errors / len(a)


def ber_tensor(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Per-row BER in percent for (B, L) tensors of {0, 1} bits."""
    if a.shape != b.shape:
        raise ShapeMismatchError("ber", a.shape, b.shape)
    return 100.0 * (a.long() != b.long()).to(torch.float64).mean(dim=-1)


def key_from_int(value: int, length: int) -> KeyBits:
    """Big-endian bits of ``value``; bit 0 gates block 1."""
    return KeyBits(bits=tuple(int(c) for c in format(value, f"0{length}b")))


def key_to_int(key: KeyBits) -> int:
    return int("".join(str(b) for b in key.bits), 2)


def sample_key(
    generator: torch.Generator,
    length: int,
    exclude: Optional[Iterable[KeyBits]] = None,
) -> KeyBits:
    """Draw a key uniformly from the keys of ``length`` bits not in ``exclude``.

    Raises:
        KeySpaceExhaustedError: If every key is excluded
    """
    space = 2**length
    excluded = {key_to_int(k) for k in (exclude or ()) if len(k) == length}
    if len(excluded) >= space:
        raise KeySpaceExhaustedError(f"all {space} keys of length {length} are excluded")

    if len(excluded) * 2 > space:
        allowed = [v for v in range(space) if v not in excluded]
        pick = int(torch.randint(0, len(allowed), (1,), generator=generator).item())
        return key_from_int(allowed[pick], length)

    while True:
        value = int(torch.randint(0, space, (1,), generator=generator).item())
        if value not in excluded:
            return key_from_int(value, length)


def sample_watermark(
    generator: torch.Generator,
    length: int,
    exclude: Optional[Iterable[WatermarkBits]] = None,
) -> WatermarkBits:
    """Uniformly random payload distinct from every payload in ``exclude``."""
    taken = set(exclude or ())
    while True:
        wm = WatermarkBits.random(length, generator)
        if wm not in taken:
            return wm
