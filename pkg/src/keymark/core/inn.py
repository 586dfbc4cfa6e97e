"""Key-gated invertible coupling network.

Block i maps (x, wm) to

    x'  = x + phi(wm) * k_i
    wm' = wm * exp(alpha(rho(x'))) + eta(x')

and is inverted in closed form by

    wm = (wm' - eta(x')) * exp(-alpha(rho(x')))
    x  = x' - phi(wm) * k_i

The key bit gates only the additive x-update; with k_i = 0 the x-channel
passes through the block bit-exactly.
"""

import math
from typing import List, Sequence, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..entities import KeyBits
from ..entities.exceptions import ConfigurationError, KeyLengthError, ShapeMismatchError
from . import autodiff as ad
from .codec import key_from_int

SPEC_CHANNELS = 2

KeysLike = Union[KeyBits, Sequence[KeyBits], torch.Tensor]


def clamp_alpha(t: torch.Tensor, c: float) -> torch.Tensor:
    """Bounded odd clamp c * (2 / pi) * atan(t), strictly inside (-c, c)."""
    if c <= 0:
        raise ConfigurationError(f"clamp scale must be positive, got {c}")
    return (2.0 * c / math.pi) * ad.atan(t)


class DenseSubnet(nn.Module):
    """Densely connected CNN: each 3x3 layer sees the concat of the input and all earlier outputs.

    ``layers`` counts the 3x3 layers plus the final 1x1 projection, which is
    zero-initialised so a fresh subnet outputs zeros.
    """

    def __init__(self, channels: int = SPEC_CHANNELS, growth: int = 8, layers: int = 5, slope: float = 0.2):
        super().__init__()
        self.slope = slope
        self.dense = nn.ModuleList(
            ad.SameConv2d(channels + i * growth, growth, 3) for i in range(layers - 1)
        )
        self.project = ad.SameConv2d(channels + (layers - 1) * growth, channels, 1)
        nn.init.zeros_(self.project.weight)
        nn.init.zeros_(self.project.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        features = [x]
        for conv in self.dense:
            features.append(F.leaky_relu(conv(ad.concat(features, dim=1)), self.slope))
        return self.project(ad.concat(features, dim=1))


class CouplingBlock(nn.Module):
    """One invertible block with transformations phi, rho and eta."""

    def __init__(self, growth: int = 8, layers: int = 5, clamp_scale: float = 2.0, slope: float = 0.2):
        super().__init__()
        self.clamp_scale = clamp_scale
        self.phi = DenseSubnet(SPEC_CHANNELS, growth, layers, slope)
        self.rho = DenseSubnet(SPEC_CHANNELS, growth, layers, slope)
        self.eta = DenseSubnet(SPEC_CHANNELS, growth, layers, slope)

    @staticmethod
    def _gate(gate: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
        return (gate > 0).reshape(-1, *([1] * (like.dim() - 1)))

    def log_scale(self, x: torch.Tensor) -> torch.Tensor:
        return clamp_alpha(self.rho(x), self.clamp_scale)

    def forward(self, x: torch.Tensor, wm: torch.Tensor, gate: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Apply the block; ``gate`` holds one key bit per batch item."""
        if x.shape != wm.shape:
            raise ShapeMismatchError("block_forward", x.shape, wm.shape)
        x_out = torch.where(self._gate(gate, x), ad.add(x, self.phi(wm)), x)
        wm_out = ad.add(ad.mul(wm, ad.exp(self.log_scale(x_out))), self.eta(x_out))
        return x_out, wm_out

    def inverse(
        self, x_out: torch.Tensor, wm_out: torch.Tensor, gate: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        if x_out.shape != wm_out.shape:
            raise ShapeMismatchError("block_backward", x_out.shape, wm_out.shape)
        wm = ad.mul(wm_out - self.eta(x_out), ad.exp(-self.log_scale(x_out)))
        x = torch.where(self._gate(gate, x_out), x_out - self.phi(wm), x_out)
        return x, wm


class InvertibleNetwork(nn.Module):
    """N coupling blocks; bit i of the key gates block i."""

    def __init__(
        self,
        n_blocks: int = 8,
        growth: int = 8,
        layers: int = 5,
        clamp_scale: float = 2.0,
        slope: float = 0.2,
    ):
        super().__init__()
        self.n_blocks = n_blocks
        self.blocks = nn.ModuleList(CouplingBlock(growth, layers, clamp_scale, slope) for _ in range(n_blocks))

    def key_matrix(self, keys: KeysLike, batch: int) -> torch.Tensor:
        """(batch, N) tensor of key bits from one key, one key per item or a tensor.

        Raises:
            KeyLengthError: If a key does not have N bits
        """
        if isinstance(keys, KeyBits):
            keys = [keys] * batch
        if isinstance(keys, torch.Tensor):
            matrix = keys.reshape(1, -1) if keys.dim() == 1 else keys
            matrix = matrix.expand(batch, -1) if matrix.shape[0] == 1 else matrix
        else:
            keys = list(keys)
            for key in keys:
                if len(key) != self.n_blocks:
                    raise KeyLengthError(f"key has {len(key)} bits, the network has {self.n_blocks} blocks")
            matrix = torch.stack([key.to_tensor() for key in keys])
        if matrix.shape[-1] != self.n_blocks:
            raise KeyLengthError(f"key has {matrix.shape[-1]} bits, the network has {self.n_blocks} blocks")
        if matrix.shape[0] != batch:
            raise ShapeMismatchError("key_matrix", matrix.shape, (batch, self.n_blocks))
        return matrix

    def forward(self, x: torch.Tensor, wm: torch.Tensor, keys: KeysLike) -> Tuple[torch.Tensor, torch.Tensor]:
        """Run blocks 1..N on (B, 2, F, T) inputs; returns (x_out, wm_out)."""
        gates = self.key_matrix(keys, x.shape[0])
        for i, block in enumerate(self.blocks):
            x, wm = block(x, wm, gates[:, i])
        return x, wm

    def inverse(
        self, x_out: torch.Tensor, wm_out: torch.Tensor, keys: KeysLike
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Run the block inverses N..1; returns (x, wm)."""
        gates = self.key_matrix(keys, x_out.shape[0])
        for i in reversed(range(self.n_blocks)):
            x_out, wm_out = self.blocks[i].inverse(x_out, wm_out, gates[:, i])
        return x_out, wm_out

    def forward_trace(self, x: torch.Tensor, wm: torch.Tensor, keys: KeysLike) -> List[torch.Tensor]:
        """x-channel before block 1 and after every block."""
        gates = self.key_matrix(keys, x.shape[0])
        trace = [x]
        for i, block in enumerate(self.blocks):
            x, wm = block(x, wm, gates[:, i])
            trace.append(x)
        return trace


def all_keys(length: int) -> List[KeyBits]:
    """Every key of ``length`` bits in increasing numeric order."""
    return [key_from_int(v, length) for v in range(2**length)]
