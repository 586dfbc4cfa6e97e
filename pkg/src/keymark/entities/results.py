import csv
import io
import math
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .configs import LossWeights
from .enums import AttackOp, TrainingStrategy
from .models import WatermarkBits


class StepLosses(BaseModel):
    """Scalar losses of one training step.

    ``perceptual`` and ``accuracy`` hold one entry per embedded watermark
    (one for a single step, two for a double step).
    """

    step: int = Field(ge=0)
    strategy: TrainingStrategy
    attack: AttackOp
    perceptual: List[float] = Field(description="L_p per embedding depth")
    accuracy: List[float] = Field(description="L_a per embedded watermark")
    bce_correct: List[float] = Field(description="BCE(wm, wm_re) per watermark")
    bce_wrong: List[float] = Field(description="BCE(wm, wm_wrong) per watermark")
    total: float
    discriminator: float

    model_config = ConfigDict(frozen=True)

    def recompose(self, weights: LossWeights) -> float:
        """Weighted recomposition w_t1 * sum(L_p) + w_t2 * sum(L_a)."""
        return weights.w_t1 * sum(self.perceptual) + weights.w_t2 * sum(self.accuracy)

    def is_finite(self) -> bool:
        values = [*self.perceptual, *self.accuracy, self.total, self.discriminator]
        return all(math.isfinite(v) for v in values)


class DecodeResult(BaseModel):
    """Decoded payload with its raw logits and per-bit confidences."""

    bits: WatermarkBits
    logits: Tuple[float, ...]
    confidences: Tuple[float, ...] = Field(description="sigmoid(logit) per bit")
    segments: int = Field(default=1, ge=1, description="Segments voted over")

    model_config = ConfigDict(frozen=True)

    @property
    def hex(self) -> str:
        return self.bits.to_hex()


CSV_COLUMNS = [
    "scenario",
    "j",
    "i",
    "attack",
    "ber_mean",
    "ber_std",
    "snr_mean",
    "snr_std",
    "specdist_mean",
    "trials",
]


class MetricsRow(BaseModel):
    """One BER_i^j cell: payload j against the decode under key i."""

    scenario: str
    j: int = Field(ge=1, description="Embedding index of the compared payload")
    i: int = Field(ge=1, description="Decoding key index; n + 1 is the wrong key")
    attack: AttackOp
    ber_mean: float = Field(ge=0.0, le=100.0)
    ber_std: float = Field(ge=0.0)
    snr_mean: float
    snr_std: float = Field(ge=0.0)
    specdist_mean: float = Field(ge=0.0)
    trials: int = Field(ge=1)

    model_config = ConfigDict(frozen=True)

    def to_csv_fields(self) -> List[str]:
        return [
            self.scenario,
            str(self.j),
            str(self.i),
            self.attack.value,
            f"{self.ber_mean:.6f}",
            f"{self.ber_std:.6f}",
            _format_db(self.snr_mean),
            _format_db(self.snr_std),
            f"{self.specdist_mean:.6f}",
            str(self.trials),
        ]


def _format_db(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.6f}"


class MetricsReport(BaseModel):
    """Rows of an evaluation run, serialisable as CSV."""

    rows: List[MetricsRow] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(row.to_csv_fields())
        return buffer.getvalue()

    def find(self, scenario: str, attack: AttackOp, i: int, j: int) -> Optional[MetricsRow]:
        for row in self.rows:
            if row.scenario == scenario and row.attack == attack and row.i == i and row.j == j:
                return row
        return None


class SelfTestCheck(BaseModel):
    """Outcome of one self-test oracle."""

    name: str
    value: float = Field(description="Measured error or count")
    threshold: float
    passed: bool

    model_config = ConfigDict(frozen=True)


class SelfTestReport(BaseModel):
    checks: List[SelfTestCheck] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)
