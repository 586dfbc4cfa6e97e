#!/usr/bin/env python3
"""
Simple example demonstrating keymark usage.

Embeds two payloads under two keys into a synthetic clip, edits the result
and decodes each payload with its own key and with a key that was never used.

Run with: python src/examples/simple_example.py [MODEL.wake]
Without a checkpoint an untrained model is used, so the decoded bits are
only meaningful once a model has been trained (see memory_example.py or
``keymark train --config configs/train.yaml``).
"""

import sys

import torch
from chromatrace import LoggingConfig, LoggingSettings

from keymark import (
    AttackConfig,
    AttackOp,
    BinaryCheckpointRepository,
    CorpusSpec,
    CorpusUseCase,
    KeyBits,
    ModelConfig,
    WatermarkBits,
    WatermarkingUseCase,
    apply_attack,
    build_model,
    load_model,
    snr,
)

# Configure logging
logging_config = LoggingConfig(LoggingSettings(application_level="Keymark"))
logger = logging_config.get_logger("keymark")

if len(sys.argv) > 1:
    model = load_model(BinaryCheckpointRepository(logger=logger).load(sys.argv[1]))
else:
    model = build_model(ModelConfig(), seed=0)
cfg = model.cfg

watermarking = WatermarkingUseCase(model, logger=logger)
clip = CorpusUseCase(logger=logger).toy_corpus(
    CorpusSpec(n_tones=1, n_noise=0, n_am=0, clip_len=cfg.clip_len), torch.Generator().manual_seed(0)
)[0]

# Two owners, each with their own key
owner_a = (WatermarkBits.from_hex("deadbeef", cfg.payload_bits), KeyBits.from_hex("a5", cfg.key_bits))
owner_b = (WatermarkBits.from_hex("0badf00d", cfg.payload_bits), KeyBits.from_hex("3c", cfg.key_bits))
stranger = KeyBits.from_hex("71", cfg.key_bits)

marked_once = watermarking.embed(clip, *owner_a)
marked_twice = watermarking.embed(marked_once, *owner_b)
logger.info(f"SNR after first embedding: {snr(clip.samples, marked_once.samples):.2f} dB")
logger.info(f"SNR after second embedding: {snr(clip.samples, marked_twice.samples):.2f} dB")

# Low-pass filter the doubly-marked audio before decoding
edited = marked_twice.model_copy(
    update={"samples": apply_attack(marked_twice.samples[None], AttackConfig(op=AttackOp.LF))[0]}
)

for name, (wm, key) in {"owner A": owner_a, "owner B": owner_b}.items():
    result = watermarking.decode(edited, key)
    logger.info(f"{name}: embedded {wm.to_hex()}, decoded {result.hex} with key {key.to_hex()}")

result = watermarking.decode(edited, stranger)
logger.info(f"stranger: decoded {result.hex} with unused key {stranger.to_hex()}")
