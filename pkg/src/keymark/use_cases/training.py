import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import torch

from ..core.attacks import apply_attack, random_attack
from ..core.codec import sample_key, sample_watermark
from ..core.losses import MultiScaleMelLoss, PerceptualLoss, accuracy_loss, discriminator_update
from ..core.model import WatermarkModel, build_model
from ..entities import (
    AttackConfig,
    AttackOp,
    AudioClip,
    Checkpoint,
    KeyBits,
    StepLosses,
    TrainConfig,
    TrainingStrategy,
    WatermarkBits,
)
from ..entities.checkpoint import MODEL_PREFIX, OPTIMIZER_PREFIX
from ..entities.exceptions import (
    CheckpointFormatError,
    ConfigurationError,
    DuplicateKeyError,
    NonFiniteError,
    TrainingDivergedError,
    ValidationException,
)
from .interface.checkpoint_repository import ICheckpointRepository

ADAM_FIELDS = ("step", "exp_avg", "exp_avg_sq")
CLEAN_ATTACK = AttackConfig(op=AttackOp.NA)


@dataclass(frozen=True)
class StepPayload:
    """One embedding of a training step: (B, L) payload bits and (B, N) key bits."""

    wm: torch.Tensor
    key: torch.Tensor


def load_model(checkpoint: Checkpoint) -> WatermarkModel:
    """Rebuild the model stored in ``checkpoint``.

    Raises:
        CheckpointFormatError: If the stored tensors do not fit the stored configuration
    """
    model = build_model(checkpoint.config.model)
    try:
        model.load_state_dict(checkpoint.model_state(), strict=True)
    except RuntimeError as e:
        raise CheckpointFormatError(f"checkpoint tensors do not match its model configuration: {e}")
    model.eval()
    return model


class TrainingUseCase:
    """Use case for training the watermarking model.

    Every step embeds one watermark (single strategy) or two watermarks in
    sequence (double strategy), applies a random editing operation, decodes
    with the correct keys and one wrong key, then updates the generator on
    w_t1 * sum(L_p) + w_t2 * sum(L_a) and the discriminator on its own loss.
    """

    def __init__(
        self,
        config: TrainConfig,
        repository: Optional[ICheckpointRepository] = None,
        model: Optional[WatermarkModel] = None,
        logger: Optional[logging.Logger] = None,
    ):
        self.config = config
        self.repository = repository
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self.model = model or build_model(config.model, seed=config.seed)
        self.perceptual = PerceptualLoss(
            config.weights,
            MultiScaleMelLoss(config.mel),
            config.perceptual_constraint,
            config.broadweight_fraction,
            config.broadweight_high,
        )
        self.gen_optimizer = torch.optim.Adam(
            list(self.model.generator_parameters()), lr=config.lr_generator, betas=config.betas
        )
        self.disc_optimizer = torch.optim.Adam(
            list(self.model.discriminator_parameters()), lr=config.lr_discriminator, betas=config.betas
        )
        self.generator = torch.Generator().manual_seed(config.seed)
        self.step = 0
        self.strategy_counts: Dict[TrainingStrategy, int] = {s: 0 for s in TrainingStrategy}

    def _zero_key(self) -> KeyBits:
        return KeyBits(bits=(0,) * self.config.model.key_bits)

    def draw_payloads(self, batch: int, count: int) -> Tuple[List[StepPayload], torch.Tensor]:
        """``count`` embeddings with pairwise distinct payloads and keys per item, plus a wrong key per item.

        Embedding keys never use the all-zero key; the wrong key differs from
        every embedding key of its item.
        """
        n_bits, l_bits = self.config.model.key_bits, self.config.model.payload_bits
        wms = [[] for _ in range(count)]
        keys = [[] for _ in range(count)]
        wrong = []
        for _ in range(batch):
            used_keys: List[KeyBits] = []
            used_wms: List[WatermarkBits] = []
            for e in range(count):
                key = sample_key(self.generator, n_bits, [self._zero_key(), *used_keys])
                wm = sample_watermark(self.generator, l_bits, used_wms)
                used_keys.append(key)
                used_wms.append(wm)
                keys[e].append(key.to_tensor())
                wms[e].append(wm.to_tensor())
            wrong.append(sample_key(self.generator, n_bits, used_keys).to_tensor())
        payloads = [StepPayload(wm=torch.stack(wms[e]), key=torch.stack(keys[e])) for e in range(count)]
        return payloads, torch.stack(wrong)

    def draw_attack(self) -> AttackConfig:
        """NA with probability ``clean_fraction``, otherwise a uniform draw from the menu."""
        if float(torch.rand((), generator=self.generator)) < self.config.clean_fraction:
            return CLEAN_ATTACK
        return random_attack(self.generator, self.config.attacks)

    def draw_strategy(self) -> TrainingStrategy:
        if float(torch.rand((), generator=self.generator)) < self.config.single_probability:
            return TrainingStrategy.SINGLE
        return TrainingStrategy.DOUBLE

    def draw_batch(self, corpus: torch.Tensor) -> torch.Tensor:
        index = torch.randint(0, corpus.shape[0], (self.config.batch_size,), generator=self.generator)
        return corpus[index]

    @staticmethod
    def _check_distinct(payloads: Sequence[StepPayload], wrong: torch.Tensor) -> None:
        for a in range(len(payloads)):
            for b in range(a + 1, len(payloads)):
                if (payloads[a].key == payloads[b].key).all(dim=-1).any():
                    raise DuplicateKeyError("keys embedded in one training item must be pairwise distinct")
                if (payloads[a].wm == payloads[b].wm).all(dim=-1).any():
                    raise ValidationException("watermarks embedded in one training item must be pairwise distinct")
            if (payloads[a].key == wrong).all(dim=-1).any():
                raise DuplicateKeyError("the wrong key must differ from every embedding key")

    def _run_step(
        self,
        x: torch.Tensor,
        strategy: TrainingStrategy,
        payloads: Sequence[StepPayload],
        wrong: torch.Tensor,
        attack: AttackConfig,
    ) -> StepLosses:
        self._check_distinct(payloads, wrong)
        model, weights = self.model, self.config.weights
        source = self.config.redundancy_source
        self.model.train()

        marked = []
        current = x
        for payload in payloads:
            current = model.embed(current, payload.wm, payload.key)
            marked.append(current)
        edited = apply_attack(current, attack, self.generator)
        logits_wrong = model.decode(edited, wrong, source, self.generator)

        perceptual = [self.perceptual(x, x_wm, model.disc) for x_wm in marked]
        accuracy = [
            accuracy_loss(p.wm, model.decode(edited, p.key, source, self.generator), logits_wrong, weights)
            for p in payloads
        ]
        objective = weights.w_t2 * sum(a.total for a in accuracy)
        if weights.w_t1 != 0:
            objective = objective + weights.w_t1 * sum(perceptual)

        if not torch.isfinite(objective):
            terms = ", ".join(f"{float(p):.4g}" for p in perceptual)
            raise TrainingDivergedError(f"non-finite objective (perceptual: {terms})", self.step)

        self.gen_optimizer.zero_grad(set_to_none=True)
        objective.backward()
        self.gen_optimizer.step()
        d_loss = discriminator_update(model.disc, self.disc_optimizer, x, current)

        try:
            model.assert_finite()
        except NonFiniteError as e:
            raise TrainingDivergedError(e.message, self.step)

        losses = StepLosses(
            step=self.step,
            strategy=strategy,
            attack=attack.op,
            perceptual=[float(p) for p in perceptual],
            accuracy=[float(a.total) for a in accuracy],
            bce_correct=[float(a.bce_correct) for a in accuracy],
            bce_wrong=[float(a.bce_wrong) for a in accuracy],
            total=float(objective.detach()),
            discriminator=d_loss,
        )
        self.step += 1
        self.strategy_counts[strategy] += 1
        return losses

    def train_step_single(
        self,
        x: torch.Tensor,
        payload: Optional[StepPayload] = None,
        wrong: Optional[torch.Tensor] = None,
        attack: Optional[AttackConfig] = None,
    ) -> StepLosses:
        """One step on w_t1 * L_p(x, x_wm) + w_t2 * L_a(wm, wm_re).

        Payloads, the wrong key and the attack are drawn from the run's
        generator unless given.
        """
        if payload is None or wrong is None:
            drawn, drawn_wrong = self.draw_payloads(x.shape[0], 1)
            payload = payload or drawn[0]
            wrong = drawn_wrong if wrong is None else wrong
        return self._run_step(x, TrainingStrategy.SINGLE, [payload], wrong, attack or self.draw_attack())

    def train_step_double(
        self,
        x: torch.Tensor,
        payloads: Optional[Sequence[StepPayload]] = None,
        wrong: Optional[torch.Tensor] = None,
        attack: Optional[AttackConfig] = None,
    ) -> StepLosses:
        """One step on w_t1 * (L_p(x, x_wm1) + L_p(x, x_wm2)) + w_t2 * (L_a(wm_1, wm_re1) + L_a(wm_2, wm_re2)).

        Both perceptual terms compare against the original ``x``; both decodes
        run on the edited doubly-marked audio.

        Raises:
            DuplicateKeyError: If the two keys coincide for any batch item
            ValidationException: If the two payloads coincide for any batch item
        """
        if payloads is None or wrong is None:
            drawn, drawn_wrong = self.draw_payloads(x.shape[0], 2)
            payloads = payloads or drawn
            wrong = drawn_wrong if wrong is None else wrong
        if len(payloads) != 2:
            raise ValidationException(f"a double step embeds exactly two watermarks, got {len(payloads)}")
        return self._run_step(x, TrainingStrategy.DOUBLE, payloads, wrong, attack or self.draw_attack())

    def gradient_norms(self) -> Dict[str, float]:
        """L2 norm of the current gradients per parameter group."""
        norms = {}
        for name, module in self.model.parameter_groups().items():
            total = sum(float(p.grad.pow(2).sum()) for p in module.parameters() if p.grad is not None)
            norms[name] = math.sqrt(total)
        return norms

    def snapshot(self) -> Checkpoint:
        """Checkpoint of the model, both optimizers, the step counter and the generator state."""
        tensors: Dict[str, torch.Tensor] = {
            f"{MODEL_PREFIX}{name}": t.detach().clone().to(torch.float32)
            for name, t in self.model.state_dict().items()
        }
        for group, optimizer in (("generator", self.gen_optimizer), ("discriminator", self.disc_optimizer)):
            for index, state in sorted(optimizer.state_dict()["state"].items()):
                for field in ADAM_FIELDS:
                    value = torch.as_tensor(state[field]).detach().clone().to(torch.float32)
                    tensors[f"{OPTIMIZER_PREFIX}{group}.{index}.{field}"] = value
        return Checkpoint(
            tensors=tensors,
            config=self.config,
            step=self.step,
            rng_state=bytes(self.generator.get_state().tolist()),
        )

    def restore(self, checkpoint: Checkpoint) -> None:
        """Continue from ``checkpoint``: parameters, optimizer moments, step and generator state."""
        try:
            self.model.load_state_dict(checkpoint.model_state(), strict=True)
        except RuntimeError as e:
            raise CheckpointFormatError(f"checkpoint tensors do not match the model: {e}")

        stored = checkpoint.optimizer_tensors()
        for group, optimizer in (("generator", self.gen_optimizer), ("discriminator", self.disc_optimizer)):
            state_dict = optimizer.state_dict()
            state = {}
            for index in state_dict["param_groups"][0]["params"]:
                fields = {f: stored.get(f"{group}.{index}.{f}") for f in ADAM_FIELDS}
                if all(v is not None for v in fields.values()):
                    state[index] = {f: v.clone() for f, v in fields.items()}
            state_dict["state"] = state
            optimizer.load_state_dict(state_dict)

        self.step = checkpoint.step
        if checkpoint.rng_state is not None:
            self.generator.set_state(torch.tensor(list(checkpoint.rng_state), dtype=torch.uint8))
        self.logger.info(f"Resumed from step {checkpoint.step}")

    @classmethod
    def from_checkpoint(
        cls,
        checkpoint: Checkpoint,
        repository: Optional[ICheckpointRepository] = None,
        logger: Optional[logging.Logger] = None,
    ) -> "TrainingUseCase":
        use_case = cls(checkpoint.config, repository=repository, logger=logger)
        use_case.restore(checkpoint)
        return use_case

    def _save(self, name: str) -> Checkpoint:
        checkpoint = self.snapshot()
        if self.repository is not None:
            self.repository.save(name, checkpoint)
        return checkpoint

    def _stack_corpus(self, corpus: Sequence[AudioClip]) -> torch.Tensor:
        if not corpus:
            raise ConfigurationError("training corpus is empty")
        bad = [i for i, clip in enumerate(corpus) if len(clip) != self.config.model.clip_len]
        if bad:
            raise ConfigurationError(
                f"{len(bad)} corpus clips do not have {self.config.model.clip_len} samples (first index {bad[0]})"
            )
        return torch.stack([clip.samples for clip in corpus])

    def run_training(self, corpus: Sequence[AudioClip], steps: Optional[int] = None) -> Checkpoint:
        """Train until ``steps`` (default ``config.steps``) total steps are done.

        Returns:
            Checkpoint: Final snapshot, also stored in the repository if one is set
        """
        data = self._stack_corpus(corpus)
        target = self.config.steps if steps is None else steps
        previous_threads = torch.get_num_threads()
        previous_deterministic = torch.are_deterministic_algorithms_enabled()
        if self.config.deterministic:
            torch.set_num_threads(1)
            torch.use_deterministic_algorithms(True, warn_only=True)

        name = self.config.checkpoint_name
        self.logger.info(f"Training from step {self.step} to {target} on {data.shape[0]} clips")
        try:
            while self.step < target:
                x = self.draw_batch(data)
                if self.draw_strategy() == TrainingStrategy.SINGLE:
                    losses = self.train_step_single(x)
                else:
                    losses = self.train_step_double(x)
                if losses.step % self.config.log_every == 0:
                    self.logger.info(
                        f"step {losses.step} {losses.strategy.value} {losses.attack.value} "
                        f"total={losses.total:.4f} L_p={sum(losses.perceptual):.4f} "
                        f"L_a={sum(losses.accuracy):.4f} bce={sum(losses.bce_correct):.4f} "
                        f"bce_wrong={sum(losses.bce_wrong):.4f} d={losses.discriminator:.4f}"
                    )
                periodic = self.config.checkpoint_every and self.step % self.config.checkpoint_every == 0
                if periodic and self.step < target:
                    self._save(f"{name}-{self.step:06d}")
        finally:
            if self.config.deterministic:
                torch.set_num_threads(previous_threads)
                torch.use_deterministic_algorithms(previous_deterministic)

        counts = ", ".join(f"{s.value}={n}" for s, n in self.strategy_counts.items())
        self.logger.info(f"Training finished at step {self.step} ({counts})")
        return self._save(name)

    def held_out_ber(self, clips: Sequence[AudioClip]) -> float:
        """Mean correct-key BER in percent over ``clips`` with fresh single embeddings and no editing."""
        if not clips:
            return math.nan
        self.model.eval()
        data = torch.stack([clip.samples for clip in clips])
        payloads, _ = self.draw_payloads(data.shape[0], 1)
        with torch.no_grad():
            marked = self.model.embed(data, payloads[0].wm, payloads[0].key)
            logits = self.model.decode(marked, payloads[0].key, self.config.redundancy_source, self.generator)
        errors = ((torch.sigmoid(logits) > 0.5).to(torch.long) != payloads[0].wm.to(torch.long)).to(torch.float64)
        return float(100.0 * errors.mean())


def assert_disjoint(model: WatermarkModel) -> None:
    """Raise if a tensor is shared between the generator and discriminator parameter sets."""
    generator_ids = {id(p) for p in model.generator_parameters()}
    shared = [p for p in model.discriminator_parameters() if id(p) in generator_ids]
    if shared:
        raise ConfigurationError(f"{len(shared)} parameters are shared between generator and discriminator")
