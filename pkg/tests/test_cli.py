"""Tests for the command-line surface."""

import re

import pytest
import torch

from keymark import AudioClip, BinaryCheckpointRepository, ModelConfig, TrainConfig, read_wav, write_wav
from keymark.frameworks import build_parser, main
from keymark.use_cases import TrainingUseCase


@pytest.fixture
def checkpoint_path(tmp_path):
    config = TrainConfig(
        model=ModelConfig(
            payload_bits=8,
            key_bits=4,
            clip_len=4000,
            subnet_growth=4,
            predict_hidden=4,
            predict_blocks=2,
            disc_channels=4,
        )
    )
    return BinaryCheckpointRepository(tmp_path).save("model", TrainingUseCase(config).snapshot())


@pytest.fixture
def wav_path(tmp_path):
    generator = torch.Generator().manual_seed(0)
    path = tmp_path / "in.wav"
    write_wav(AudioClip(samples=0.3 * (2 * torch.rand(8000, generator=generator) - 1)), path)
    return path


class TestParser:
    """Test argument parsing."""

    def test_unknown_flag_exits_with_validation_code(self):
        """Test that usage errors return 2."""
        assert main(["embed", "--bogus"]) == 2

    def test_missing_subcommand(self):
        """Test that a subcommand is required."""
        assert main([]) == 2

    def test_attack_params(self):
        """Test NAME=VALUE parsing and case-insensitive operations."""
        args = build_parser().parse_args(
            ["attack", "--in", "a.wav", "--out", "b.wav", "--op", "rn", "--param", "snr_db=20"]
        )

        assert args.op == "RN"
        assert args.param == [("snr_db", 20)]


class TestCommands:
    """Test the subcommands end to end."""

    def test_embed_then_decode(self, tmp_path, checkpoint_path, wav_path, capsys):
        """Test that embed writes a clip of the same length and decode prints bits and confidences."""
        out = tmp_path / "marked.wav"
        spec = tmp_path / "marked.npy"

        argv = ["embed", "--in", str(wav_path), "--out", str(out), "--wm", "a7", "--key", "9"]

        code = main([*argv, "--ckpt", checkpoint_path, "--dump-spec", str(spec)])

        assert code == 0
        assert len(read_wav(out)) == 8000
        assert spec.is_file()

        capsys.readouterr()
        assert main(["decode", "--in", str(out), "--key", "9", "--ckpt", checkpoint_path]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert any(re.fullmatch(r"[0-9a-f]{2}", line) for line in lines)
        assert any(re.fullmatch(r"(\d\.\d{4} ){7}\d\.\d{4}", line) for line in lines)

    def test_wrong_key_length_exits_with_validation_code(self, checkpoint_path, wav_path):
        """Test that a key of the wrong length returns 2."""
        assert main(["decode", "--in", str(wav_path), "--key", "abc", "--ckpt", checkpoint_path]) == 2

    def test_missing_checkpoint_exits_with_runtime_code(self, tmp_path, wav_path):
        """Test that an unreadable checkpoint returns 1."""
        assert main(["decode", "--in", str(wav_path), "--key", "9", "--ckpt", str(tmp_path / "none.wake")]) == 1

    def test_clean_attack_keeps_content(self, tmp_path, wav_path):
        """Test that NA writes identical samples."""
        out = tmp_path / "na.wav"

        assert main(["attack", "--in", str(wav_path), "--out", str(out), "--op", "NA"]) == 0
        assert torch.equal(read_wav(out).samples, read_wav(wav_path).samples)

    def test_noise_attack_changes_content(self, tmp_path, wav_path):
        """Test that RN with a seed writes different samples."""
        out = tmp_path / "rn.wav"

        argv = ["attack", "--in", str(wav_path), "--out", str(out), "--op", "RN", "--param", "snr_db=20"]

        code = main([*argv, "--seed", "3"])

        assert code == 0
        assert not torch.equal(read_wav(out).samples, read_wav(wav_path).samples)

    def test_invalid_attack_param_exits_with_validation_code(self, tmp_path, wav_path):
        """Test that an out-of-range parameter returns 2."""
        out = tmp_path / "lf.wav"

        argv = ["attack", "--in", str(wav_path), "--out", str(out), "--op", "LF", "--param", "lowpass_hz=9000"]

        assert main(argv) == 2

    def test_eval_writes_report(self, tmp_path, checkpoint_path, wav_path):
        """Test that eval writes a CSV report for the configured clips."""
        config = tmp_path / "eval.yaml"
        config.write_text(
            "evaluation:\n  scenarios: [1]\n  repetitions: 1\nattacks: [NA]\n"
            f"paths:\n  checkpoint: {checkpoint_path}\n  clips: [{wav_path}]\n",
            encoding="utf-8",
        )
        report = tmp_path / "report.csv"

        assert main(["eval", "--config", str(config), "--report", str(report)]) == 0
        lines = report.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("scenario,j,i,attack")
        assert len(lines) == 1 + 2
