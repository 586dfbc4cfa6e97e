"""Tests for the embedding and decoding pipeline."""

import pytest
import torch

from keymark import KeyBits, ModelConfig, WatermarkBits, WatermarkingUseCase, WatermarkStack, build_model
from keymark.core import autodiff as ad
from keymark.core.dsp import istft, stft
from keymark.entities import AudioClip, CodecInit, RedundancySource
from keymark.entities.exceptions import ClipTooShortError, KeyLengthError, PayloadLengthError

CLIP_LEN = 4000


@pytest.fixture
def config():
    return ModelConfig(
        payload_bits=8,
        key_bits=4,
        clip_len=CLIP_LEN,
        subnet_growth=4,
        predict_hidden=4,
        predict_blocks=2,
        disc_channels=4,
    )


@pytest.fixture
def use_case(config):
    model = build_model(config, seed=0)
    ad.randomize_parameters(model.inn, torch.Generator().manual_seed(1), std=0.1)
    return WatermarkingUseCase(model)


@pytest.fixture
def clip():
    return AudioClip(samples=torch.rand(CLIP_LEN, generator=torch.Generator().manual_seed(2)) * 0.6 - 0.3)


WM = WatermarkBits.from_hex("a7", 8)
KEY = KeyBits.from_hex("9", 4)


class TestSegments:
    """Test segmenting of long and short clips."""

    def test_exact_multiple(self, use_case):
        """Test two full segments for two clip lengths."""
        assert use_case.segments(2 * CLIP_LEN) == [(0, CLIP_LEN), (CLIP_LEN, 2 * CLIP_LEN)]

    def test_long_tail_is_a_segment(self, use_case):
        """Test that a tail of at least half a segment is processed."""
        assert use_case.segments(CLIP_LEN + 2000) == [(0, CLIP_LEN), (CLIP_LEN, CLIP_LEN + 2000)]

    def test_short_tail_is_skipped(self, use_case):
        """Test that a tail shorter than half a segment is left out."""
        assert use_case.segments(CLIP_LEN + 1999) == [(0, CLIP_LEN)]

    def test_short_clip_raises_error(self, use_case):
        """Test that clips shorter than half a segment are rejected."""
        with pytest.raises(ClipTooShortError):
            use_case.segments(1999)


class TestEmbed:
    """Test embedding."""

    def test_zero_key_is_transparent(self, use_case, clip, config):
        """Test that the all-zero key gives istft(stft(x)) within 1e-5."""
        marked = use_case.embed(clip, WM, KeyBits(bits=(0, 0, 0, 0)))
        reference = istft(stft(clip.samples, config.stft), config.stft, CLIP_LEN)

        assert float((marked.samples - reference).abs().max()) <= 1e-5
        assert float((marked.samples - clip.samples).abs().max()) <= 1e-5

    def test_nonzero_key_changes_audio(self, use_case, clip):
        """Test that an open key alters the clip."""
        marked = use_case.embed(clip, WM, KEY)

        assert len(marked) == len(clip)
        assert float((marked.samples - clip.samples).abs().max()) > 1e-4

    def test_unmarked_tail_keeps_samples(self, use_case):
        """Test that a tail shorter than half a segment is copied through."""
        samples = torch.rand(CLIP_LEN + 100, generator=torch.Generator().manual_seed(3)) - 0.5
        marked = use_case.embed(AudioClip(samples=samples), WM, KEY)

        assert torch.equal(marked.samples[CLIP_LEN:], samples[CLIP_LEN:])

    def test_wrong_lengths_raise_errors(self, use_case, clip):
        """Test key and payload length validation."""
        with pytest.raises(KeyLengthError):
            use_case.embed(clip, WM, KeyBits.from_hex("a5", 8))
        with pytest.raises(PayloadLengthError):
            use_case.embed(clip, WatermarkBits.from_hex("abc", 12), KEY)

    def test_stack_matches_sequential_embedding(self, use_case, clip):
        """Test that a watermark stack embeds its entries in order."""
        second = (WatermarkBits.from_hex("3c", 8), KeyBits.from_hex("6", 4))
        stack = WatermarkStack.of([(WM, KEY), second])

        stacked = use_case.embed_stack(clip, stack)
        sequential = use_case.embed(use_case.embed(clip, WM, KEY), *second)

        assert torch.equal(stacked.samples, sequential.samples)


class TestDecode:
    """Test decoding."""

    def test_result_shape(self, use_case, clip):
        """Test one bit, logit and confidence per payload bit."""
        result = use_case.decode(use_case.embed(clip, WM, KEY), KEY)

        assert len(result.bits) == 8
        assert len(result.logits) == 8
        assert all(0.0 <= c <= 1.0 for c in result.confidences)
        assert result.segments == 1

    def test_zero_codec_decodes_zeros(self, config, clip):
        """Test that a zero-initialised codec decodes every bit to 0 with confidence 0.5."""
        model = build_model(config.model_copy(update={"codec_init": CodecInit.ZERO}), seed=0)
        result = WatermarkingUseCase(model).decode(clip, KEY)

        assert result.bits == WatermarkBits(bits=(0,) * 8)
        assert result.confidences == (0.5,) * 8

    def test_predict_source_is_deterministic(self, use_case, clip):
        """Test that predict-mode decodes are identical."""
        a = use_case.decode(clip, KEY, RedundancySource.PREDICT)
        b = use_case.decode(clip, KEY, RedundancySource.PREDICT)

        assert a.logits == b.logits

    def test_gaussian_source_depends_on_seed(self, use_case, clip):
        """Test that gaussian-mode decodes follow the generator."""
        a = use_case.decode(clip, KEY, RedundancySource.GAUSSIAN, torch.Generator().manual_seed(0))
        b = use_case.decode(clip, KEY, RedundancySource.GAUSSIAN, torch.Generator().manual_seed(0))
        c = use_case.decode(clip, KEY, RedundancySource.GAUSSIAN, torch.Generator().manual_seed(1))

        assert a.logits == b.logits
        assert a.logits != c.logits

    def test_majority_vote_over_segments(self, use_case, monkeypatch):
        """Test that each bit is the majority of the per-segment decodes."""
        rows = torch.tensor([[5.0] * 8, [5.0] * 4 + [-5.0] * 4, [-5.0] * 8])
        monkeypatch.setattr(use_case.model, "decode", lambda batch, key, source, generator: rows[: len(batch)])
        samples = torch.zeros(3 * CLIP_LEN)

        result = use_case.decode(AudioClip(samples=samples), KEY)

        assert result.segments == 3
        assert result.bits == WatermarkBits(bits=(1, 1, 1, 1, 0, 0, 0, 0))

    def test_tied_vote_decodes_to_zero(self, use_case, monkeypatch):
        """Test that a one-to-one split between two segments decodes to 0."""
        rows = torch.tensor([[5.0] * 8, [-5.0] * 8])
        monkeypatch.setattr(use_case.model, "decode", lambda batch, key, source, generator: rows[: len(batch)])
        samples = torch.zeros(2 * CLIP_LEN)

        result = use_case.decode(AudioClip(samples=samples), KEY)

        assert result.segments == 2
        assert result.bits == WatermarkBits(bits=(0,) * 8)
        assert result.logits == pytest.approx((0.0,) * 8)

    def test_magnitude_grid(self, use_case, clip):
        """Test the |STFT| grid used for spectrogram dumps."""
        grid = use_case.magnitude_grid(clip)

        assert grid.shape == (501, 11)
        assert str(grid.dtype) == "float32"
