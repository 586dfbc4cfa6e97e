import math
from typing import Iterable, List, Tuple

import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .exceptions import DuplicateKeyError, NonFiniteError, ValidationException

PIPELINE_SAMPLE_RATE = 16000


class BitVector(BaseModel):
    """Immutable vector of {0, 1} bits.

    Hex rendering is big-endian: the first bit is the most significant bit
    of the first hex digit. When the length is not a multiple of four the
    leading digit carries zero padding in its high bits.
    """

    bits: Tuple[int, ...] = Field(description="Bit values in {0, 1}")

    model_config = ConfigDict(frozen=True)

    @field_validator("bits")
    @classmethod
    def validate_bits(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(v) < 1:
            raise ValueError("bit vector must hold at least one bit")
        if any(b not in (0, 1) for b in v):
            raise ValueError("bits must be 0 or 1")
        return v

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def from_tensor(cls, t: torch.Tensor):
        """Build from a 1-D tensor of {0, 1} values."""
        return cls(bits=tuple(int(b) for b in t.detach().flatten().round().long().tolist()))

    @classmethod
    def from_hex(cls, text: str, length: int):
        """Parse a hex string of exactly ceil(length / 4) digits."""
        digits = math.ceil(length / 4)
        cleaned = text.strip().lower()
        if cleaned.startswith("0x"):
            cleaned = cleaned[2:]
        if len(cleaned) != digits:
            raise ValidationException(f"expected {digits} hex digits for {length} bits, got {len(cleaned)} ('{text}')")
        try:
            value = int(cleaned, 16)
        except ValueError:
            raise ValidationException(f"invalid hex string '{text}'")
        padded = format(value, f"0{digits * 4}b")
        if "1" in padded[: digits * 4 - length]:
            raise ValidationException(f"hex string '{text}' does not fit in {length} bits")
        return cls(bits=tuple(int(c) for c in padded[digits * 4 - length :]))

    @classmethod
    def random(cls, length: int, generator: torch.Generator):
        """Uniformly random bits drawn from ``generator``."""
        return cls.from_tensor(torch.randint(0, 2, (length,), generator=generator))

    def to_hex(self) -> str:
        digits = math.ceil(len(self.bits) / 4)
        value = int("".join(str(b) for b in self.bits), 2)
        return format(value, f"0{digits}x")

    def to_tensor(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        return torch.tensor(self.bits, dtype=dtype)

    def signed(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        """Signed encoding s = 2b - 1."""
        return 2.0 * self.to_tensor(dtype) - 1.0

    def complement(self):
        return type(self)(bits=tuple(1 - b for b in self.bits))


class WatermarkBits(BitVector):
    """Watermark payload of L bits (32 by default)."""


class KeyBits(BitVector):
    """Control key of N bits; bit i gates invertible block i."""

    @property
    def is_zero(self) -> bool:
        return not any(self.bits)


class WatermarkStack(BaseModel):
    """Ordered (watermark, key) pairs embedded one after another."""

    entries: Tuple[Tuple[WatermarkBits, KeyBits], ...] = Field(
        description="Watermark/key pairs in embedding order"
    )

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_entries(self) -> "WatermarkStack":
        if not self.entries:
            raise ValidationException("watermark stack must not be empty")
        keys = [key for _, key in self.entries]
        if len(set(keys)) != len(keys):
            raise DuplicateKeyError("keys within a watermark stack must be pairwise distinct")
        return self

    @classmethod
    def of(cls, pairs: Iterable[Tuple[WatermarkBits, KeyBits]]) -> "WatermarkStack":
        return cls(entries=tuple(pairs))

    @property
    def keys(self) -> List[KeyBits]:
        return [key for _, key in self.entries]

    @property
    def watermarks(self) -> List[WatermarkBits]:
        return [wm for wm, _ in self.entries]


class AudioClip(BaseModel):
    """Mono waveform at the pipeline sample rate.

    Samples are a 1-D float32 tensor with nominal range [-1, 1].
    """

    samples: torch.Tensor = Field(description="1-D float32 waveform")
    sample_rate: int = Field(default=PIPELINE_SAMPLE_RATE, description="Sample rate in Hz")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("samples")
    @classmethod
    def validate_samples(cls, v: torch.Tensor) -> torch.Tensor:
        if v.dim() != 1:
            raise ValueError(f"audio clip must be 1-D, got shape {tuple(v.shape)}")
        if v.numel() < 1:
            raise ValueError("audio clip must hold at least one sample")
        if not torch.isfinite(v).all():
            raise NonFiniteError("audio clip contains NaN or Inf samples")
        return v.detach().to(torch.float32)

    @field_validator("sample_rate")
    @classmethod
    def validate_sample_rate(cls, v: int) -> int:
        if v != PIPELINE_SAMPLE_RATE:
            raise ValueError(f"sample rate must be {PIPELINE_SAMPLE_RATE} Hz, got {v}")
        return v

    def __len__(self) -> int:
        return int(self.samples.numel())

    @property
    def duration(self) -> float:
        """Duration in seconds."""
        return len(self) / self.sample_rate
