"""Command-line surface of the watermarking toolkit.

Subcommands::

    keymark embed  --in IN.wav --out OUT.wav --wm HEX --key HEX --ckpt MODEL.wake [--dump-spec OUT.npy]
    keymark decode --in IN.wav --key HEX --ckpt MODEL.wake [--redundancy predict|gaussian] [--seed N]
    keymark attack --in IN.wav --out OUT.wav --op UD|RN|PN|LF|HF|BF|BA|DA|SA|NA [--param NAME=VALUE ...]
    keymark train  --config train.yaml [--resume CKPT] [--steps N]
    keymark eval   --config eval.yaml --report report.csv
    keymark selftest

Exit codes: 0 on success, 2 on validation errors (including usage errors),
1 on runtime errors.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import torch
import yaml
from chromatrace import LoggingConfig, LoggingSettings
from pydantic import ValidationError

from ..adapters import BinaryCheckpointRepository, load_run_config, load_train_config, read_wav, wav_subtype, write_wav
from ..core.attacks import attack_clip, attack_from_params
from ..core.model import WatermarkModel
from ..entities import AttackOp, AudioClip, KeyBits, RedundancySource, WatermarkBits
from ..entities.exceptions import VALIDATION_EXIT_CODE, ConfigurationError, KeymarkException
from ..use_cases import (
    CorpusUseCase,
    EvaluationUseCase,
    SelfTestUseCase,
    TrainingUseCase,
    WatermarkingUseCase,
    load_model,
)


def configure_logging(verbose: bool = False) -> logging.Logger:
    """Process-wide logging setup; DEBUG when ``verbose``."""
    logging_config = LoggingConfig(LoggingSettings(application_level="Keymark"))
    logger = logging_config.get_logger("keymark")
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    return logger


def _parse_param(text: str) -> tuple:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got '{text}'")
    return name.strip(), yaml.safe_load(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="keymark", description="Key-controllable audio watermarking")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    embed = sub.add_parser("embed", help="Embed a watermark under a key")
    embed.add_argument("--in", dest="input", required=True, help="Input WAV (mono, 16 kHz)")
    embed.add_argument("--out", dest="output", required=True, help="Output WAV")
    embed.add_argument("--wm", required=True, help="Payload as hex, L/4 digits")
    embed.add_argument("--key", required=True, help="Key as hex, N/4 digits")
    embed.add_argument("--ckpt", required=True, help="Model checkpoint")
    embed.add_argument("--dump-spec", dest="dump_spec", help="Write the |STFT| grid of the output as .npy")

    decode = sub.add_parser("decode", help="Decode the watermark embedded under a key")
    decode.add_argument("--in", dest="input", required=True, help="Input WAV (mono, 16 kHz)")
    decode.add_argument("--key", required=True, help="Key as hex, N/4 digits")
    decode.add_argument("--ckpt", required=True, help="Model checkpoint")
    decode.add_argument(
        "--redundancy",
        choices=[s.value for s in RedundancySource],
        default=RedundancySource.PREDICT.value,
        help="Stand-in for the discarded network output",
    )
    decode.add_argument("--seed", type=int, default=0, help="Seed for the gaussian redundancy source")
    decode.add_argument("--dump-spec", dest="dump_spec", help="Write the |STFT| grid of the input as .npy")

    attack = sub.add_parser("attack", help="Apply an editing operation")
    attack.add_argument("--in", dest="input", required=True, help="Input WAV (mono, 16 kHz)")
    attack.add_argument("--out", dest="output", required=True, help="Output WAV")
    attack.add_argument("--op", required=True, choices=[op.value for op in AttackOp], type=str.upper)
    attack.add_argument(
        "--param",
        action="append",
        type=_parse_param,
        default=[],
        metavar="NAME=VALUE",
        help="Operation parameter, e.g. snr_db=20 or gain_db=-6",
    )
    attack.add_argument("--seed", type=int, help="Seed for RN/PN/SA randomness")

    train = sub.add_parser("train", help="Train a model")
    train.add_argument("--config", required=True, help="Training YAML file")
    train.add_argument("--resume", help="Checkpoint to resume from")
    train.add_argument("--steps", type=int, help="Override the total step count")

    evaluate = sub.add_parser("eval", help="Write a BER/SNR report")
    evaluate.add_argument("--config", required=True, help="Evaluation YAML file")
    evaluate.add_argument("--report", help="CSV output path (overrides paths.report)")

    sub.add_parser("selftest", help="Run the invertibility, gating and gradient oracles")
    return parser


class KeymarkCli:
    """Dispatches parsed arguments to the use cases."""

    def __init__(self, logger: Optional[logging.Logger] = None):
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self.handlers: Dict[str, Callable[[argparse.Namespace], int]] = {
            "embed": self.embed,
            "decode": self.decode,
            "attack": self.attack,
            "train": self.train,
            "eval": self.evaluate,
            "selftest": self.selftest,
        }

    def _model(self, path: str) -> WatermarkModel:
        repository = BinaryCheckpointRepository(logger=self.logger)
        return load_model(repository.load(path))

    def _dump(self, use_case: WatermarkingUseCase, clip: AudioClip, path: Optional[str]) -> None:
        if path:
            np.save(path, use_case.magnitude_grid(clip))
            self.logger.info(f"Wrote magnitude spectrogram to {path}")

    def embed(self, args: argparse.Namespace) -> int:
        model = self._model(args.ckpt)
        wm = WatermarkBits.from_hex(args.wm, model.cfg.payload_bits)
        key = KeyBits.from_hex(args.key, model.cfg.key_bits)
        if key.is_zero:
            self.logger.warning("The all-zero key leaves the audio unmarked")
        use_case = WatermarkingUseCase(model, logger=self.logger)
        marked = use_case.embed(read_wav(args.input), wm, key)
        write_wav(marked, args.output, logger=self.logger)
        self._dump(use_case, marked, args.dump_spec)
        self.logger.info(f"Embedded {wm.to_hex()} under key {key.to_hex()} into {args.output}")
        return 0

    def decode(self, args: argparse.Namespace) -> int:
        model = self._model(args.ckpt)
        key = KeyBits.from_hex(args.key, model.cfg.key_bits)
        clip = read_wav(args.input)
        use_case = WatermarkingUseCase(model, logger=self.logger)
        result = use_case.decode(
            clip, key, RedundancySource(args.redundancy), torch.Generator().manual_seed(args.seed)
        )
        self._dump(use_case, clip, args.dump_spec)
        print(result.bits.to_hex())
        print(" ".join(f"{c:.4f}" for c in result.confidences))
        return 0

    def attack(self, args: argparse.Namespace) -> int:
        params = dict(args.param)
        if args.seed is not None:
            params["seed"] = args.seed
        cfg = attack_from_params(args.op, params)
        clip = read_wav(args.input)
        edited = attack_clip(clip, cfg)
        write_wav(edited, args.output, subtype=wav_subtype(args.input), logger=self.logger)
        self.logger.info(f"Applied {cfg.op.value} to {args.input} -> {args.output}")
        return 0

    def train(self, args: argparse.Namespace) -> int:
        config = load_train_config(args.config)
        repository = BinaryCheckpointRepository(config.checkpoint_dir or ".", logger=self.logger)
        if args.resume:
            use_case = TrainingUseCase.from_checkpoint(repository.load(args.resume), repository, self.logger)
        else:
            use_case = TrainingUseCase(config, repository=repository, logger=self.logger)

        corpus_use_case = CorpusUseCase(reader=read_wav, logger=self.logger)
        clips = corpus_use_case.build(use_case.config.corpus, torch.Generator().manual_seed(use_case.config.seed))
        train_clips, held_out = corpus_use_case.split(clips, use_case.config.holdout_clips)
        use_case.run_training(train_clips, steps=args.steps)
        if held_out:
            self.logger.info(f"Held-out correct-key BER: {use_case.held_out_ber(held_out):.3f}%")
        return 0

    def evaluate(self, args: argparse.Namespace) -> int:
        config = load_run_config(args.config, report=args.report)
        model = self._model(config.checkpoint)
        corpus_use_case = CorpusUseCase(reader=read_wav, logger=self.logger)
        if config.clips:
            clips: List[AudioClip] = []
            for path in config.clips:
                clips.extend(corpus_use_case.chop(read_wav(path), model.cfg.clip_len))
        else:
            spec = config.corpus.model_copy(update={"clip_len": model.cfg.clip_len})
            clips = corpus_use_case.build(spec, torch.Generator().manual_seed(config.seed))
        if not clips:
            raise ConfigurationError("evaluation needs at least one clip")

        report = EvaluationUseCase(model, logger=self.logger).run(config, clips)
        text = report.to_csv()
        if config.report:
            Path(config.report).write_text(text, encoding="utf-8")
            self.logger.info(f"Wrote {len(report.rows)} report rows to {config.report}")
        else:
            sys.stdout.write(text)
        return 0

    def selftest(self, args: argparse.Namespace) -> int:
        report = SelfTestUseCase(logger=self.logger).run()
        for check in report.checks:
            status = "ok" if check.passed else "FAIL"
            print(f"{status:4} {check.name:24} {check.value:.3e} (threshold {check.threshold:.1e})")
        return 0 if report.passed else 1

    def run(self, args: argparse.Namespace) -> int:
        try:
            return self.handlers[args.command](args)
        except ValidationError as e:
            self.logger.error(f"Invalid input: {e}")
            return VALIDATION_EXIT_CODE
        except KeymarkException as e:
            self.logger.error(f"{e.__class__.__name__}: {e.message}")
            return e.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``keymark`` console script; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else VALIDATION_EXIT_CODE
    return KeymarkCli(configure_logging(args.verbose)).run(args)


if __name__ == "__main__":
    sys.exit(main())
