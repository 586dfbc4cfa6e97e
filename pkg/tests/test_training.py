"""Tests for the training use case."""

import math
import statistics

import pytest
import torch

from keymark import MemoryCheckpointRepository, ModelConfig, TrainConfig
from keymark.entities import AttackConfig, AttackOp, CorpusSpec, TrainingStrategy
from keymark.entities.exceptions import ConfigurationError, DuplicateKeyError, TrainingDivergedError
from keymark.use_cases import CorpusUseCase, StepPayload, TrainingUseCase, load_model
from keymark.use_cases.training import assert_disjoint

CLIP_LEN = 4000
NA = AttackConfig(op=AttackOp.NA)


@pytest.fixture
def config():
    return TrainConfig(
        model=ModelConfig(
            payload_bits=8,
            key_bits=4,
            clip_len=CLIP_LEN,
            subnet_growth=4,
            predict_hidden=4,
            predict_blocks=2,
            disc_channels=4,
        ),
        corpus=CorpusSpec(n_tones=2, n_noise=2, n_am=2, clip_len=CLIP_LEN),
        steps=4,
        batch_size=2,
        checkpoint_every=0,
        checkpoint_name="run",
        log_every=1,
        holdout_clips=2,
    )


@pytest.fixture
def corpus(config):
    return CorpusUseCase().toy_corpus(config.corpus, torch.Generator().manual_seed(0))


@pytest.fixture
def batch(corpus):
    return torch.stack([clip.samples for clip in corpus[:2]])


def payload(wm_hex, key_hex):
    wm = torch.tensor([[int(b) for b in format(int(wm_hex, 16), "08b")]] * 2, dtype=torch.float32)
    key = torch.tensor([[int(b) for b in format(int(key_hex, 16), "04b")]] * 2, dtype=torch.float32)
    return StepPayload(wm=wm, key=key)


class TestSteps:
    """Test single and double training steps."""

    def test_single_step(self, config, batch):
        """Test that a single step reports one finite term per kind and recomposes."""
        use_case = TrainingUseCase(config)

        losses = use_case.train_step_single(batch, attack=NA)

        assert losses.strategy == TrainingStrategy.SINGLE
        assert len(losses.perceptual) == 1
        assert len(losses.accuracy) == 1
        assert losses.is_finite()
        assert losses.total == pytest.approx(losses.recompose(config.weights), rel=1e-5)
        assert use_case.step == 1

    def test_double_step(self, config, batch):
        """Test that a double step reports one term per embedded watermark."""
        use_case = TrainingUseCase(config)

        losses = use_case.train_step_double(batch, attack=AttackConfig(op=AttackOp.LF))

        assert losses.strategy == TrainingStrategy.DOUBLE
        assert len(losses.perceptual) == 2
        assert len(losses.accuracy) == 2
        assert losses.total == pytest.approx(losses.recompose(config.weights), rel=1e-5)
        assert use_case.strategy_counts[TrainingStrategy.DOUBLE] == 1

    def test_duplicate_keys_raise_error(self, config, batch):
        """Test that a double step rejects equal keys."""
        use_case = TrainingUseCase(config)
        wrong = torch.tensor([[1.0, 1.0, 1.0, 1.0]] * 2)

        with pytest.raises(DuplicateKeyError):
            use_case.train_step_double(batch, [payload("a7", "9"), payload("3c", "9")], wrong, NA)

    def test_wrong_key_equal_to_embedding_key_raises_error(self, config, batch):
        """Test that the wrong key must differ from the embedding key."""
        use_case = TrainingUseCase(config)

        with pytest.raises(DuplicateKeyError):
            use_case.train_step_single(batch, payload("a7", "9"), torch.tensor([[1.0, 0.0, 0.0, 1.0]] * 2), NA)

    def test_every_parameter_group_receives_gradient(self, config, batch):
        """Test non-zero gradients for codec, network, predict module and discriminator."""
        use_case = TrainingUseCase(config)
        use_case.train_step_single(batch, attack=NA)

        norms = use_case.gradient_norms()

        assert set(norms) == {"codec", "inn", "predict", "disc"}
        assert all(value > 0 for value in norms.values())

    def test_steps_move_both_parameter_sets(self, config, batch):
        """Test that generator and discriminator parameters change after a step."""
        use_case = TrainingUseCase(config)
        generator_before = [p.detach().clone() for p in use_case.model.generator_parameters()]
        disc_before = [p.detach().clone() for p in use_case.model.discriminator_parameters()]

        use_case.train_step_single(batch, attack=NA)

        moved = [not torch.equal(a, b) for a, b in zip(generator_before, use_case.model.generator_parameters())]
        assert any(moved)
        assert any(not torch.equal(a, b) for a, b in zip(disc_before, use_case.model.discriminator_parameters()))

    def test_divergence_is_reported(self, config, batch, monkeypatch):
        """Test that a non-finite objective raises TrainingDivergedError with the step index."""
        use_case = TrainingUseCase(config)
        monkeypatch.setattr(use_case, "perceptual", lambda *args, **kwargs: torch.tensor(float("nan")))

        with pytest.raises(TrainingDivergedError) as excinfo:
            use_case.train_step_single(batch, attack=NA)

        assert excinfo.value.step == 0


class TestDrawing:
    """Test payload, key and attack drawing."""

    def test_payloads_are_distinct(self, config):
        """Test distinct non-zero keys, distinct payloads and a fresh wrong key per item."""
        use_case = TrainingUseCase(config)

        payloads, wrong = use_case.draw_payloads(16, 2)

        for item in range(16):
            first, second = payloads[0].key[item], payloads[1].key[item]
            assert first.sum() > 0 and second.sum() > 0
            assert not torch.equal(first, second)
            assert not torch.equal(payloads[0].wm[item], payloads[1].wm[item])
            assert not torch.equal(wrong[item], first)
            assert not torch.equal(wrong[item], second)

    def test_clean_fraction(self, config):
        """Test that clean_fraction 1 always draws NA."""
        use_case = TrainingUseCase(config.model_copy(update={"clean_fraction": 1.0}))

        assert {use_case.draw_attack().op for _ in range(20)} == {AttackOp.NA}

    def test_parameter_sets_are_disjoint(self, config):
        """Test that no tensor is shared between generator and discriminator."""
        assert_disjoint(TrainingUseCase(config).model)


class TestRuns:
    """Test complete runs, checkpoints and determinism."""

    def test_run_saves_checkpoints(self, config, corpus):
        """Test periodic and final checkpoints."""
        repository = MemoryCheckpointRepository()
        use_case = TrainingUseCase(config.model_copy(update={"checkpoint_every": 2}), repository=repository)

        final = use_case.run_training(corpus)

        assert final.step == 4
        assert repository.list_names() == ["run", "run-000002"]
        assert repository.load("run-000002").step == 2

    def test_same_seed_gives_identical_checkpoints(self, config, corpus):
        """Test bit-identical checkpoints from identical seeds."""
        a = TrainingUseCase(config).run_training(corpus, steps=2)
        b = TrainingUseCase(config).run_training(corpus, steps=2)

        assert list(a.tensors) == list(b.tensors)
        assert all(torch.equal(a.tensors[name], b.tensors[name]) for name in a.tensors)
        assert a.rng_state == b.rng_state

    def test_resume_continues_the_trajectory(self, config, corpus):
        """Test that resuming from a checkpoint reproduces an uninterrupted run."""
        straight = TrainingUseCase(config).run_training(corpus, steps=3)
        first = TrainingUseCase(config).run_training(corpus, steps=2)

        resumed = TrainingUseCase.from_checkpoint(first).run_training(corpus, steps=3)

        assert resumed.step == 3
        assert all(torch.equal(straight.tensors[name], resumed.tensors[name]) for name in straight.tensors)

    def test_loaded_model_matches(self, config, corpus):
        """Test that a checkpoint restores the trained parameters."""
        use_case = TrainingUseCase(config)
        checkpoint = use_case.run_training(corpus, steps=1)

        model = load_model(checkpoint)

        for name, tensor in use_case.model.state_dict().items():
            assert torch.equal(model.state_dict()[name], tensor)

    def test_held_out_ber_range(self, config, corpus):
        """Test that the held-out BER is a percentage."""
        use_case = TrainingUseCase(config)

        assert 0.0 <= use_case.held_out_ber(corpus[:2]) <= 100.0

    def test_empty_corpus_raises_error(self, config):
        """Test that training without clips is rejected."""
        with pytest.raises(ConfigurationError):
            TrainingUseCase(config).run_training([])


def accuracy_curve(config, corpus, steps, seed=0):
    """Per-step accuracy losses of an NA-only single-strategy run."""
    use_case = TrainingUseCase(
        config.model_copy(
            update={
                "seed": seed,
                "lr_generator": 1e-3,
                "single_probability": 1.0,
                "clean_fraction": 1.0,
                "attacks": [NA],
            }
        )
    )
    data = torch.stack([clip.samples for clip in corpus])
    return [use_case.train_step_single(use_case.draw_batch(data)) for _ in range(steps)]


class TestLearning:
    """Test that the decoder learns to read payloads back."""

    def test_first_step_is_at_chance(self, config, corpus):
        """Test that the fresh model decodes at BCE ln 2."""
        first = accuracy_curve(config, corpus, 1)[0]

        assert first.bce_correct[0] == pytest.approx(math.log(2), abs=1e-3)

    def test_bce_falls_well_below_chance(self, config, corpus):
        """Test that 300 clean steps bring the correct-key BCE clearly under ln 2."""
        curve = accuracy_curve(config, corpus, 300)

        tail = [losses.bce_correct[0] for losses in curve[-20:]]
        assert sum(tail) / len(tail) < 0.5 * math.log(2)

    @pytest.mark.slow
    def test_accuracy_loss_descends_over_500_steps(self, config):
        """Test accuracy loss at step 500 below step 1, median over three seeds."""
        spec = config.corpus.model_copy(update={"n_tones": 17, "n_noise": 17, "n_am": 16})
        corpus = CorpusUseCase().toy_corpus(spec, torch.Generator().manual_seed(0))
        drops = []
        for seed in range(3):
            curve = accuracy_curve(config, corpus, 500, seed=seed)
            drops.append(curve[0].accuracy[0] - curve[-1].accuracy[0])

        assert statistics.median(drops) > 0
