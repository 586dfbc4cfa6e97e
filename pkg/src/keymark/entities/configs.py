import math
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .enums import (
    AdversarialForm,
    AttackOp,
    CodecInit,
    PerceptualConstraint,
    RedundancySource,
    WindowType,
)
from .exceptions import ConfigurationError

NYQUIST_HZ = 8000.0
DOUBLING_DB = 20.0 * math.log10(2.0)  # ~6.0206 dB, an exact factor of two


class StftConfig(BaseModel):
    """STFT framing shared by the forward and inverse transforms of a run."""

    window_len: int = Field(default=1000, gt=0, description="Window length in samples")
    hop: int = Field(default=400, gt=0, description="Frame shift in samples")
    window: WindowType = Field(default=WindowType.HANN, description="Analysis window")
    centered: bool = Field(default=True, description="Reflect-pad window_len/2 on both sides")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_hop(self) -> "StftConfig":
        if self.hop > self.window_len:
            raise ValueError(f"hop ({self.hop}) must not exceed window_len ({self.window_len})")
        return self

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1

    def n_frames(self, length: int) -> int:
        """Frame count for a signal of ``length`` samples."""
        if self.centered:
            return 1 + length // self.hop
        return 1 + (length - self.window_len) // self.hop


class AttackConfig(BaseModel):
    """One audio editing operation and its parameters.

    Parameters that do not apply to ``op`` are ignored.
    """

    op: AttackOp = Field(description="Editing operation")
    snr_db: float = Field(default=35.0, gt=0, description="Target SNR for RN/PN in dB")
    lowpass_hz: float = Field(default=5000.0, gt=0, description="LF cutoff in Hz")
    highpass_hz: float = Field(default=500.0, gt=0, description="HF cutoff in Hz")
    band_low_hz: float = Field(default=500.0, gt=0, description="BF lower edge in Hz")
    band_high_hz: float = Field(default=5000.0, gt=0, description="BF upper edge in Hz")
    filter_order: int = Field(default=4, ge=1, le=8, description="Butterworth order")
    gain_db: Optional[float] = Field(
        default=None, description="BA/DA gain in dB; defaults to +/-6.02 dB (x2 / x0.5)"
    )
    zero_fraction: float = Field(default=0.1, ge=0.0, le=1.0, description="SA zeroed fraction")
    resample_hz: int = Field(default=8000, gt=0, description="UD intermediate rate in Hz")
    resample_taps: int = Field(default=32, ge=2, description="UD Kaiser-sinc filter taps")
    seed: Optional[int] = Field(default=None, description="Seed for RN/PN/SA randomness")

    model_config = ConfigDict(frozen=True)

    @field_validator("lowpass_hz", "highpass_hz", "band_low_hz", "band_high_hz")
    @classmethod
    def validate_cutoff(cls, v: float) -> float:
        if v >= NYQUIST_HZ:
            raise ValueError(f"cutoff {v} Hz must be below Nyquist ({NYQUIST_HZ} Hz)")
        return v

    @model_validator(mode="after")
    def validate_band(self) -> "AttackConfig":
        if self.band_low_hz >= self.band_high_hz:
            raise ValueError("band_low_hz must be below band_high_hz")
        return self

    @property
    def effective_gain_db(self) -> float:
        if self.gain_db is not None:
            return self.gain_db
        if self.op == AttackOp.DA:
            return -DOUBLING_DB
        return DOUBLING_DB


def default_attack_menu() -> List[AttackConfig]:
    """All ten operations with their default parameters."""
    return [AttackConfig(op=op) for op in AttackOp]


class LossWeights(BaseModel):
    """Weights of the perceptual, training-mix and wrong-key terms."""

    w_p1: float = Field(default=1.0, ge=0, description="Time-domain L2 weight")
    w_p2: float = Field(default=1.0, ge=0, description="Adversarial term weight")
    w_p3: float = Field(default=5.0, ge=0, description="Multi-scale Mel weight")
    w_t1: float = Field(default=10.0, ge=0, description="Perceptual loss weight in the training mix")
    w_t2: float = Field(default=10.0, ge=0, description="Accuracy loss weight in the training mix")
    w_l1: float = Field(default=1000.0, ge=0, description="Wrong-key hinge weight")
    w_l2: float = Field(default=0.01, ge=0, description="Wrong-key hinge threshold (BCE)")
    adversarial_form: AdversarialForm = Field(
        default=AdversarialForm.PRINTED, description="Generator-side adversarial term"
    )

    model_config = ConfigDict(frozen=True)


class MelScaleConfig(BaseModel):
    """Scales of the multi-scale Mel loss: window 2^i, hop 2^i / 4 for i in [min_scale, max_scale]."""

    min_scale: int = Field(default=5, ge=2)
    max_scale: int = Field(default=11, ge=2)
    n_mels: int = Field(default=64, gt=0)
    sample_rate: int = Field(default=16000, gt=0)
    f_min: float = Field(default=0.0, ge=0)
    f_max: float = Field(default=8000.0, gt=0)
    normalized: bool = Field(default=True, description="Divide magnitudes by the window norm")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_scales(self) -> "MelScaleConfig":
        if self.min_scale > self.max_scale:
            raise ValueError("min_scale must not exceed max_scale")
        if self.f_max > self.sample_rate / 2:
            raise ValueError("f_max must not exceed the Nyquist frequency")
        return self

    @property
    def scales(self) -> List[int]:
        return list(range(self.min_scale, self.max_scale + 1))


class ModelConfig(BaseModel):
    """Shapes and widths of every learnable component."""

    payload_bits: int = Field(default=32, ge=1, description="Watermark length L")
    key_bits: int = Field(default=8, ge=1, le=16, description="Key length N == invertible block count")
    clip_len: int = Field(default=16000, gt=0, description="Segment length in samples")
    stft: StftConfig = Field(default_factory=StftConfig)
    subnet_growth: int = Field(default=8, gt=0, description="Channels added per dense layer")
    subnet_layers: int = Field(default=5, ge=2, description="Dense layers incl. the 1x1 projection")
    clamp_scale: float = Field(default=2.0, gt=0, description="Clamp bound c of the log-scale")
    leaky_slope: float = Field(default=0.2, ge=0, lt=1)
    predict_hidden: int = Field(default=16, gt=0)
    predict_blocks: int = Field(default=8, ge=1)
    disc_channels: int = Field(default=16, gt=0)
    codec_init: CodecInit = Field(default=CodecInit.RANDOM)

    model_config = ConfigDict(frozen=True)


class CorpusSpec(BaseModel):
    """Desk-scale synthetic corpus plus optional WAV directory."""

    n_tones: int = Field(default=70, ge=0, description="Multi-tone harmonic clips")
    n_noise: int = Field(default=65, ge=0, description="Band-filtered noise clips")
    n_am: int = Field(default=65, ge=0, description="Amplitude-modulated clips")
    clip_len: int = Field(default=16000, gt=0)
    sample_rate: int = Field(default=16000, gt=0)
    max_amplitude: float = Field(default=0.8, gt=0, le=1.0)
    wav_dir: Optional[str] = Field(default=None, description="Directory of 16 kHz mono WAV files")

    model_config = ConfigDict(frozen=True)

    @property
    def synthetic_count(self) -> int:
        return self.n_tones + self.n_noise + self.n_am


class TrainConfig(BaseModel):
    """Everything a training run depends on."""

    model: ModelConfig = Field(default_factory=ModelConfig)
    weights: LossWeights = Field(default_factory=LossWeights)
    mel: MelScaleConfig = Field(default_factory=MelScaleConfig)
    corpus: CorpusSpec = Field(default_factory=CorpusSpec)
    attacks: List[AttackConfig] = Field(default_factory=default_attack_menu)
    steps: int = Field(default=20000, ge=0)
    batch_size: int = Field(default=4, gt=0)
    lr_generator: float = Field(default=1e-4, gt=0)
    lr_discriminator: float = Field(default=1e-4, gt=0)
    betas: Tuple[float, float] = Field(default=(0.9, 0.999))
    seed: int = Field(default=0)
    single_probability: float = Field(default=0.5, ge=0.0, le=1.0)
    clean_fraction: float = Field(default=0.1, ge=0.0, le=1.0, description="Share of steps decoded without editing")
    perceptual_constraint: PerceptualConstraint = Field(default=PerceptualConstraint.L2_MEL_BROADWEIGHT)
    redundancy_source: RedundancySource = Field(default=RedundancySource.PREDICT)
    broadweight_fraction: float = Field(default=0.03, ge=0.0, le=0.5)
    broadweight_high: float = Field(default=10.0, gt=0)
    holdout_clips: int = Field(default=50, ge=0)
    checkpoint_every: int = Field(default=1000, ge=0, description="0 disables periodic checkpoints")
    checkpoint_name: str = Field(default="keymark")
    checkpoint_dir: Optional[str] = Field(default=None)
    log_every: int = Field(default=50, gt=0)
    deterministic: bool = Field(default=True, description="Strict single-threaded bit-exact mode")

    model_config = ConfigDict(frozen=True)

    @field_validator("attacks")
    @classmethod
    def validate_attacks(cls, v: List[AttackConfig]) -> List[AttackConfig]:
        if not v:
            raise ValueError("attack menu must not be empty")
        return v

    @field_validator("betas")
    @classmethod
    def validate_betas(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in v):
            raise ValueError("betas must lie in [0, 1)")
        return v


class RunConfig(BaseModel):
    """Evaluation run: checkpoint, clips, scenarios, attacks and outputs."""

    checkpoint: str = Field(description="Path to a checkpoint file")
    clips: List[str] = Field(default_factory=list, description="WAV files; empty uses the toy corpus")
    corpus: CorpusSpec = Field(default_factory=lambda: CorpusSpec(n_tones=20, n_noise=15, n_am=15))
    seed: int = Field(default=0)
    attacks: List[AttackConfig] = Field(default_factory=lambda: [AttackConfig(op=AttackOp.NA)])
    scenarios: List[int] = Field(default_factory=lambda: [1, 2], description="Embedding depths")
    repetitions: int = Field(default=5, ge=1)
    redundancy_source: RedundancySource = Field(default=RedundancySource.PREDICT)
    report: Optional[str] = Field(default=None, description="CSV output path")

    model_config = ConfigDict(frozen=True)

    @field_validator("scenarios")
    @classmethod
    def validate_scenarios(cls, v: List[int]) -> List[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("scenarios must be a non-empty list of embedding depths >= 1")
        return v

    @field_validator("attacks")
    @classmethod
    def validate_attacks(cls, v: List[AttackConfig]) -> List[AttackConfig]:
        if not v:
            raise ValueError("attack menu must not be empty")
        return v

    @model_validator(mode="after")
    def validate_paths(self) -> "RunConfig":
        missing = [p for p in [self.checkpoint, *self.clips] if not Path(p).is_file()]
        if missing:
            raise ConfigurationError(f"referenced files do not exist: {', '.join(missing)}")
        return self
