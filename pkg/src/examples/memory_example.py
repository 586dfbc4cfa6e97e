#!/usr/bin/env python3
"""Example training a small model into the in-memory checkpoint repository and evaluating it."""

import torch
from chromatrace import LoggingConfig, LoggingSettings

from keymark import (
    AttackConfig,
    AttackOp,
    CorpusSpec,
    CorpusUseCase,
    EvaluationUseCase,
    MemoryCheckpointRepository,
    ModelConfig,
    TrainConfig,
    TrainingUseCase,
    load_model,
)

logging_config = LoggingConfig(LoggingSettings(application_level="Keymark"))
logger = logging_config.get_logger("keymark")

# Small enough to finish in a few minutes on a laptop CPU
config = TrainConfig(
    model=ModelConfig(payload_bits=16, key_bits=4, clip_len=8000, subnet_growth=4),
    corpus=CorpusSpec(n_tones=12, n_noise=10, n_am=10, clip_len=8000),
    attacks=[AttackConfig(op=AttackOp.NA), AttackConfig(op=AttackOp.LF), AttackConfig(op=AttackOp.RN, snr_db=35)],
    steps=200,
    batch_size=4,
    checkpoint_every=100,
    checkpoint_name="demo",
    log_every=20,
    holdout_clips=4,
)

repository = MemoryCheckpointRepository(logger=logger, key_prefix="demo")
corpus_use_case = CorpusUseCase(logger=logger)
clips = corpus_use_case.toy_corpus(config.corpus, torch.Generator().manual_seed(config.seed))
train_clips, held_out = corpus_use_case.split(clips, config.holdout_clips)

trainer = TrainingUseCase(config, repository=repository, logger=logger)
trainer.run_training(train_clips)
logger.info(f"Stored checkpoints: {repository.list_names()}")
logger.info(f"Held-out BER: {trainer.held_out_ber(held_out):.2f}%")

# Reload the final checkpoint and report single and double embedding
model = load_model(repository.load("demo"))
report = EvaluationUseCase(model, logger=logger).evaluate(held_out, [1, 2], config.attacks, repetitions=1)
print(report.to_csv())
