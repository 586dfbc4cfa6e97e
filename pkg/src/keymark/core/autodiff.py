"""Differentiable primitives and a finite-difference gradient verifier.

Reverse-mode differentiation is torch autograd. This module fixes the set of
primitives the networks and losses are built from, checks operand shapes up
front so that errors name the operation, and verifies analytic gradients
against central differences evaluated in float64.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..entities.exceptions import NonFiniteError, NonScalarOutputError, ShapeMismatchError

logger = logging.getLogger(__name__)

ScalarFn = Callable[[torch.Tensor], torch.Tensor]


def _check_broadcast(op: str, a: torch.Tensor, b: torch.Tensor) -> None:
    try:
        torch.broadcast_shapes(a.shape, b.shape)
    except RuntimeError:
        raise ShapeMismatchError(op, a.shape, b.shape)


def add(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _check_broadcast("add", a, b)
    return a + b


def mul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _check_broadcast("mul", a, b)
    return a * b


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.dim() < 1 or b.dim() < 1:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    inner_b = b.shape[-2] if b.dim() > 1 else b.shape[0]
    if a.shape[-1] != inner_b:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    return a @ b


def conv2d(x: torch.Tensor, weight: torch.Tensor, bias: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Stride-1 convolution with same padding over (B, C, H, W) inputs."""
    if x.dim() != 4 or weight.dim() != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatchError("conv2d", x.shape, weight.shape)
    kh, kw = weight.shape[-2:]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeMismatchError("conv2d", weight.shape, "odd kernel required for same padding")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeMismatchError("conv2d", weight.shape, bias.shape)
    return F.conv2d(x, weight, bias, stride=1, padding=(kh // 2, kw // 2))


def exp(x: torch.Tensor) -> torch.Tensor:
    return torch.exp(x)


def atan(x: torch.Tensor) -> torch.Tensor:
    return torch.atan(x)


def log(x: torch.Tensor) -> torch.Tensor:
    return torch.log(x)


def sigmoid(x: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(x)


def sum_(x: torch.Tensor) -> torch.Tensor:
    return x.sum()


def mean(x: torch.Tensor) -> torch.Tensor:
    return x.mean()


def concat(tensors: Sequence[torch.Tensor], dim: int = 1) -> torch.Tensor:
    """Concatenate along the channel axis (dim 1 by default)."""
    first = tensors[0]
    for t in tensors[1:]:
        if t.dim() != first.dim() or any(
            t.shape[d] != first.shape[d] for d in range(first.dim()) if d != dim % first.dim()
        ):
            raise ShapeMismatchError("concat", first.shape, t.shape)
    return torch.cat(list(tensors), dim=dim)


def slice_(x: torch.Tensor, dim: int, start: int, stop: int) -> torch.Tensor:
    if not 0 <= start < stop <= x.shape[dim]:
        raise ShapeMismatchError("slice", x.shape, f"[{start}:{stop}] on dim {dim}")
    return x.narrow(dim, start, stop - start)


class SameConv2d(nn.Conv2d):
    """Stride-1, same-padded convolution layer routed through :func:`conv2d`."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, bias: bool = True):
        super().__init__(in_channels, out_channels, kernel_size, stride=1, padding=kernel_size // 2, bias=bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return conv2d(x, self.weight, self.bias)


def randomize_parameters(module: nn.Module, generator: torch.Generator, std: float = 0.1) -> nn.Module:
    """Overwrite every parameter of ``module`` with N(0, std^2) draws from ``generator``."""
    with torch.no_grad():
        for p in module.parameters():
            p.copy_(torch.randn(p.shape, generator=generator, dtype=p.dtype) * std)
    return module


def assert_finite(t: torch.Tensor, what: str) -> torch.Tensor:
    """Raise NonFiniteError unless every entry of ``t`` is finite."""
    if not torch.isfinite(t).all():
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return t


def primitive_checks(shape: Sequence[int], generator: torch.Generator) -> Dict[str, ScalarFn]:
    """Scalar test functions that each exercise one primitive.

    Partner operands and reduction weights are drawn once from ``generator``
    in float64 so every check is a fixed smooth function of its input.
    """
    shape = tuple(shape)
    partner = torch.randn(shape, generator=generator, dtype=torch.float64)
    weights = torch.randn(shape, generator=generator, dtype=torch.float64)
    square = torch.randn((shape[-1], 3), generator=generator, dtype=torch.float64)
    kernel = torch.randn((2, 1, 3, 3), generator=generator, dtype=torch.float64)

    def weighted(t: torch.Tensor) -> torch.Tensor:
        return sum_(mul(t, weights))

    def as_image(t: torch.Tensor) -> torch.Tensor:
        return t.reshape(1, 1, -1, shape[-1])

    return {
        "add": lambda x: weighted(mul(add(x, partner), add(x, partner))),
        "mul": lambda x: weighted(mul(x, partner)),
        "matmul": lambda x: sum_(matmul(x, square)),
        "conv2d": lambda x: sum_(mul(conv2d(as_image(x), kernel), conv2d(as_image(x), kernel))),
        "exp": lambda x: weighted(exp(x)),
        "atan": lambda x: weighted(atan(x)),
        "log": lambda x: weighted(log(add(mul(x, x), torch.ones_like(x)))),
        "sigmoid": lambda x: weighted(sigmoid(x)),
        "sum": lambda x: sum_(mul(x, x)),
        "mean": lambda x: mean(mul(x, partner)),
        "concat": lambda x: sum_(
            mul(concat([as_image(x), as_image(partner)], dim=1), concat([as_image(x), as_image(x)], dim=1))
        ),
        "slice": lambda x: sum_(mul(slice_(x, -1, 0, 1), slice_(x, -1, 0, 1))),
    }


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def _coordinates(numel: int, max_coords: Optional[int], generator: Optional[torch.Generator]) -> List[int]:
    if max_coords is None or max_coords >= numel:
        return list(range(numel))
    return torch.randperm(numel, generator=generator)[:max_coords].tolist()


def grad_check(
    f: ScalarFn,
    point: torch.Tensor,
    step: float = 1e-3,
    max_coords: Optional[int] = None,
    generator: Optional[torch.Generator] = None,
) -> float:
    """Max relative error between autograd and central differences of ``f`` at ``point``.

    The point is promoted to float64 and ``f`` is re-evaluated in float64
    for every perturbation. Error per coordinate is
    |analytic - fd| / max(|analytic|, |fd|, 1e-8).

    Raises:
        NonScalarOutputError: If ``f`` does not return a single value
    """
    x = point.detach().to(torch.float64).clone().requires_grad_(True)
    out = f(x)
    if out.numel() != 1:
        raise NonScalarOutputError(f"gradient check needs a scalar function, got shape {tuple(out.shape)}")
    (analytic,) = torch.autograd.grad(out, x, allow_unused=True)
    if analytic is None:
        analytic = torch.zeros_like(x)
    analytic_flat = analytic.detach().reshape(-1)

    worst = 0.0
    with torch.no_grad():
        base = x.detach()
        for idx in _coordinates(base.numel(), max_coords, generator):
            plus = base.clone()
            plus.view(-1)[idx] += step
            minus = base.clone()
            minus.view(-1)[idx] -= step
            numeric = (f(plus).item() - f(minus).item()) / (2.0 * step)
            worst = max(worst, _relative_error(analytic_flat[idx].item(), numeric))
    logger.debug(f"grad_check: max relative error {worst:.3e}")
    return worst


def grad_check_parameters(
    f: Callable[[], torch.Tensor],
    params: Sequence[torch.Tensor],
    step: float = 1e-6,
    max_coords: Optional[int] = 16,
    generator: Optional[torch.Generator] = None,
) -> float:
    """Gradient check of a closure with respect to float64 parameter leaves.

    Parameters are perturbed in place and restored; ``max_coords`` random
    coordinates are sampled per parameter tensor.
    """
    params = [p for p in params if p.requires_grad]
    if any(p.dtype != torch.float64 for p in params):
        raise ValueError("parameter gradient checks require float64 parameters")
    out = f()
    if out.numel() != 1:
        raise NonScalarOutputError(f"gradient check needs a scalar function, got shape {tuple(out.shape)}")
    grads = torch.autograd.grad(out, params, allow_unused=True)

    worst = 0.0
    with torch.no_grad():
        for p, g in zip(params, grads):
            g_flat = torch.zeros(p.numel(), dtype=p.dtype) if g is None else g.reshape(-1)
            flat = p.view(-1)
            for idx in _coordinates(p.numel(), max_coords, generator):
                original = flat[idx].item()
                flat[idx] = original + step
                f_plus = f().item()
                flat[idx] = original - step
                f_minus = f().item()
                flat[idx] = original
                numeric = (f_plus - f_minus) / (2.0 * step)
                worst = max(worst, _relative_error(g_flat[idx].item(), numeric))
    logger.debug(f"grad_check_parameters: max relative error {worst:.3e}")
    return worst
