import logging
from typing import List, Optional

import torch

from ..core import autodiff as ad
from ..core.dsp import istft, stft
from ..core.inn import InvertibleNetwork, all_keys
from ..core.losses import MultiScaleMelLoss, PerceptualLoss, accuracy_loss
from ..core.model import build_model
from ..core.predict import PredictModule
from ..entities import (
    KeyBits,
    LossWeights,
    MelScaleConfig,
    ModelConfig,
    PerceptualConstraint,
    SelfTestCheck,
    SelfTestReport,
    StftConfig,
)

ROUNDTRIP_TOLERANCE = 1e-5
INVERSION_TOLERANCE = 1e-4
GRADIENT_TOLERANCE = 1e-3


class SelfTestUseCase:
    """Use case running the numerical oracles at reduced size.

    Covers STFT/ISTFT reconstruction, exhaustive-key invertibility of the
    coupling network, key gating, zero-key transparency of embedding and
    finite-difference checks of the primitives, subnets, predict module and
    losses.
    """

    def __init__(
        self,
        key_bits: int = 8,
        param_draws: int = 3,
        seed: int = 0,
        logger: Optional[logging.Logger] = None,
    ):
        self.key_bits = key_bits
        self.param_draws = param_draws
        self.seed = seed
        self.logger = logger or logging.getLogger(self.__class__.__name__)

    def _check(self, name: str, value: float, threshold: float, passed: Optional[bool] = None) -> SelfTestCheck:
        ok = value <= threshold if passed is None else passed
        self.logger.info(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} (threshold {threshold:.1e})")
        return SelfTestCheck(name=name, value=value, threshold=threshold, passed=ok)

    def stft_roundtrip(self, generator: torch.Generator, clips: int = 20) -> float:
        cfg = StftConfig()
        x = torch.rand((clips, 16000), generator=generator) * 2 - 1
        return float((istft(stft(x, cfg), cfg, 16000) - x).abs().max())

    def _small_network(self, generator: torch.Generator) -> InvertibleNetwork:
        net = InvertibleNetwork(n_blocks=self.key_bits, growth=4, layers=5)
        return ad.randomize_parameters(net, generator, std=0.1)

    def inversion_error(self, generator: torch.Generator) -> float:
        keys = all_keys(self.key_bits)
        worst = 0.0
        with torch.no_grad():
            for _ in range(self.param_draws):
                net = self._small_network(generator)
                x = torch.randn((len(keys), 2, 17, 9), generator=generator)
                wm = torch.randn((len(keys), 2, 17, 9), generator=generator)
                x_back, wm_back = net.inverse(*net(x, wm, keys), keys)
                worst = max(worst, float((x_back - x).abs().max()), float((wm_back - wm).abs().max()))
        return worst

    def gating_violations(self, generator: torch.Generator) -> int:
        keys = all_keys(self.key_bits)
        gates = torch.stack([k.to_tensor() for k in keys])
        violations = 0
        with torch.no_grad():
            net = self._small_network(generator)
            x = torch.randn((len(keys), 2, 17, 9), generator=generator)
            wm = torch.randn((len(keys), 2, 17, 9), generator=generator)
            trace = net.forward_trace(x, wm, keys)
            for i in range(self.key_bits):
                closed = gates[:, i] == 0
                violations += int((~torch.eq(trace[i + 1][closed], trace[i][closed]).flatten(1).all(dim=1)).sum())
        return violations

    def zero_key_deviation(self, generator: torch.Generator) -> float:
        cfg = ModelConfig(
            payload_bits=8,
            key_bits=self.key_bits,
            clip_len=4000,
            subnet_growth=4,
            predict_hidden=4,
            predict_blocks=2,
            disc_channels=4,
        )
        model = build_model(cfg, seed=self.seed)
        ad.randomize_parameters(model.inn, generator, std=0.1)
        x = torch.rand((2, cfg.clip_len), generator=generator) * 2 - 1
        wm = torch.randint(0, 2, (2, cfg.payload_bits), generator=generator)
        zero = KeyBits(bits=(0,) * self.key_bits)
        with torch.no_grad():
            marked = model.embed(x, wm, zero)
            reference = istft(stft(x, cfg.stft), cfg.stft, cfg.clip_len)
        return float((marked - reference).abs().max())

    def gradient_errors(self, generator: torch.Generator) -> List[SelfTestCheck]:
        checks = []
        functions = ad.primitive_checks((3, 4), generator)
        worst = 0.0
        for fn in functions.values():
            for _ in range(10):
                worst = max(worst, ad.grad_check(fn, torch.randn((3, 4), generator=generator, dtype=torch.float64)))
        checks.append(self._check("grad.primitives", worst, GRADIENT_TOLERANCE))

        net = ad.randomize_parameters(InvertibleNetwork(n_blocks=2, growth=4).double(), generator, 0.1)
        x = torch.randn((1, 2, 9, 5), generator=generator, dtype=torch.float64)
        wm = torch.randn((1, 2, 9, 5), generator=generator, dtype=torch.float64)
        r1, r2 = torch.randn_like(x), torch.randn_like(wm)
        key = KeyBits(bits=(1, 1))

        def inn_objective() -> torch.Tensor:
            x_out, wm_out = net(x, wm, key)
            return (x_out * r1).sum() + (wm_out * r2).sum()

        checks.append(
            self._check(
                "grad.inn_two_blocks",
                ad.grad_check_parameters(inn_objective, list(net.parameters()), generator=generator),
                GRADIENT_TOLERANCE,
            )
        )

        predict = ad.randomize_parameters(PredictModule(hidden=4, blocks=2).double(), generator, 0.2)
        weight = torch.randn((1, 2, 9, 5), generator=generator, dtype=torch.float64)
        predict_error = ad.grad_check_parameters(
            lambda: (predict(x) * weight).sum(), list(predict.parameters()), generator=generator
        )
        checks.append(self._check("grad.predict", predict_error, GRADIENT_TOLERANCE))

        mel = MultiScaleMelLoss(MelScaleConfig(min_scale=5, max_scale=7)).double()
        perceptual = PerceptualLoss(LossWeights(w_p2=0.0), mel, PerceptualConstraint.L2_MEL_BROADWEIGHT)
        clean = torch.randn((1, 2048), generator=generator, dtype=torch.float64) * 0.3
        marked = clean + 0.05 * torch.randn((1, 2048), generator=generator, dtype=torch.float64)
        checks.append(
            self._check(
                "grad.perceptual",
                ad.grad_check(lambda v: perceptual(clean, v), marked, step=1e-6, max_coords=10, generator=generator),
                GRADIENT_TOLERANCE,
            )
        )

        bits = torch.randint(0, 2, (2, 8), generator=generator).to(torch.float64)
        wrong = torch.randn((2, 8), generator=generator, dtype=torch.float64)

        def accuracy(logits: torch.Tensor) -> torch.Tensor:
            return accuracy_loss(bits, logits, wrong, LossWeights()).total

        checks.append(
            self._check(
                "grad.accuracy",
                ad.grad_check(accuracy, torch.randn((2, 8), generator=generator, dtype=torch.float64), step=1e-6),
                GRADIENT_TOLERANCE,
            )
        )
        return checks

    def run(self) -> SelfTestReport:
        """Run every oracle; the report passes only if each check does."""
        generator = torch.Generator().manual_seed(self.seed)
        checks = [
            self._check("stft.roundtrip", self.stft_roundtrip(generator), ROUNDTRIP_TOLERANCE),
            self._check("inn.inversion", self.inversion_error(generator), INVERSION_TOLERANCE),
        ]
        violations = self.gating_violations(generator)
        checks.append(self._check("inn.key_gating", float(violations), 0.0, passed=violations == 0))
        checks.append(self._check("embed.zero_key", self.zero_key_deviation(generator), ROUNDTRIP_TOLERANCE))
        checks.extend(self.gradient_errors(generator))
        report = SelfTestReport(checks=checks)
        self.logger.info(f"Self-test {'passed' if report.passed else 'FAILED'}: {len(checks)} checks")
        return report
