from typing import Dict, Optional

import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .configs import TrainConfig

CHECKPOINT_VERSION = 1
MODEL_PREFIX = "model."
OPTIMIZER_PREFIX = "optim."


class Checkpoint(BaseModel):
    """Snapshot of a training run.

    ``tensors`` holds the model state under ``model.<name>`` and the optimizer
    moments under ``optim.<group>.<index>.<field>``; every tensor is float32.
    """

    version: int = Field(default=CHECKPOINT_VERSION, description="Container format version")
    tensors: Dict[str, torch.Tensor] = Field(description="Named float32 tensors in insertion order")
    config: TrainConfig = Field(description="Configuration the run was started with")
    step: int = Field(default=0, ge=0, description="Completed optimizer steps")
    rng_state: Optional[bytes] = Field(default=None, description="torch.Generator state of the run")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("tensors")
    @classmethod
    def validate_tensors(cls, v: Dict[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
        for name, tensor in v.items():
            if not name:
                raise ValueError("tensor names must not be empty")
            if tensor.dtype != torch.float32:
                raise ValueError(f"tensor {name} must be float32, got {tensor.dtype}")
        return v

    def model_state(self) -> Dict[str, torch.Tensor]:
        return {k[len(MODEL_PREFIX) :]: t for k, t in self.tensors.items() if k.startswith(MODEL_PREFIX)}

    def optimizer_tensors(self) -> Dict[str, torch.Tensor]:
        return {k[len(OPTIMIZER_PREFIX) :]: t for k, t in self.tensors.items() if k.startswith(OPTIMIZER_PREFIX)}
