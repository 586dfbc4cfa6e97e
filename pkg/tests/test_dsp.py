"""Tests for the STFT/ISTFT pair."""

import pytest
import torch
import torch.nn.functional as F

from keymark.core.dsp import analysis_window, istft, magnitude, stft, window_sum_floor
from keymark.entities import StftConfig
from keymark.entities.exceptions import ConfigurationError, ShapeMismatchError


@pytest.fixture
def cfg():
    return StftConfig()


class TestStft:
    """Test the forward transform."""

    def test_shape(self, cfg):
        """Test (2, 501, 41) for a 1-s clip."""
        spec = stft(torch.zeros(16000), cfg)

        assert spec.shape == (2, 501, 41)

    def test_batched_shape(self, cfg):
        """Test that leading dimensions are preserved."""
        spec = stft(torch.zeros(3, 2, 16000), cfg)

        assert spec.shape == (3, 2, 2, 501, 41)

    def test_dc_signal_sees_only_the_window_spectrum(self, cfg):
        """Test that a constant signal leaks only into the two bins of the Hann window."""
        spec = stft(torch.ones(16000, dtype=torch.float64), cfg)
        mag = magnitude(spec)

        assert mag[0, 20] == pytest.approx(500.0, rel=1e-6)
        assert mag[1, 20] == pytest.approx(250.0, rel=1e-6)
        assert mag[2:, 20].abs().max() < 1e-6

    def test_too_short_for_reflect_padding_raises_error(self, cfg):
        """Test that reflect padding needs more than window_len / 2 samples."""
        with pytest.raises(ConfigurationError):
            stft(torch.zeros(400), cfg)

    def test_linear_in_the_input(self, cfg):
        """Test stft(a x + b y) == a stft(x) + b stft(y)."""
        gen = torch.Generator().manual_seed(0)
        x = torch.rand(16000, generator=gen, dtype=torch.float64) * 2 - 1
        y = torch.rand(16000, generator=gen, dtype=torch.float64) * 2 - 1

        combined = stft(0.7 * x - 1.3 * y, cfg)
        separate = 0.7 * stft(x, cfg) - 1.3 * stft(y, cfg)

        assert float((combined - separate).norm() / separate.norm()) < 1e-6

    def test_energy_matches_windowed_frames(self, cfg):
        """Test that one-sided spectral energy equals the energy of the windowed frames."""
        x = torch.rand(16000, generator=torch.Generator().manual_seed(1), dtype=torch.float64) * 2 - 1
        padded = F.pad(x.view(1, 1, -1), (500, 500), mode="reflect").view(-1)
        frames = padded.unfold(0, cfg.window_len, cfg.hop) * analysis_window(cfg, torch.float64)
        power = magnitude(stft(x, cfg)) ** 2
        weight = torch.full((power.shape[0], 1), 2.0, dtype=torch.float64)
        weight[0] = weight[-1] = 1.0

        spectral = float((weight * power).sum()) / cfg.window_len

        assert spectral == pytest.approx(float((frames**2).sum()), rel=1e-4)

    def test_impulse_sees_the_window_value(self, cfg):
        """Test that an impulse at sample 8000 has flat magnitude w[offset] in the frames covering it."""
        x = torch.zeros(16000, dtype=torch.float64)
        x[8000] = 1.0
        window = analysis_window(cfg, torch.float64)

        mag = magnitude(stft(x, cfg))

        for frame, offset in ((19, 900), (20, 500), (21, 100)):
            assert torch.allclose(mag[:, frame], window[offset].expand(mag.shape[0]), atol=1e-12)
        assert mag[:, :19].abs().max() == 0
        assert mag[:, 22:].abs().max() == 0


class TestIstft:
    """Test the inverse transform."""

    def test_round_trip(self, cfg):
        """Test max |istft(stft(x)) - x| <= 1e-5 on random clips."""
        generator = torch.Generator().manual_seed(0)
        x = torch.rand((50, 16000), generator=generator) * 2 - 1

        error = (istft(stft(x, cfg), cfg, 16000) - x).abs().max()

        assert float(error) <= 1e-5

    def test_round_trip_of_odd_length(self, cfg):
        """Test reconstruction of a length that is not a multiple of the hop."""
        x = torch.randn(4321, generator=torch.Generator().manual_seed(1), dtype=torch.float64)

        assert torch.allclose(istft(stft(x, cfg), cfg, 4321), x, atol=1e-10)

    def test_zero_spectrogram_gives_silence(self, cfg):
        """Test that an all-zero spectrogram inverts to zeros."""
        out = istft(torch.zeros(2, 501, 41), cfg, 16000)

        assert torch.count_nonzero(out) == 0

    def test_shape_mismatch_raises_error(self, cfg):
        """Test that frame counts must match the requested length."""
        with pytest.raises(ShapeMismatchError):
            istft(torch.zeros(2, 501, 40), cfg, 16000)

    def test_sparse_frames_raise_error(self):
        """Test that a hop leaving gaps between windows is rejected."""
        gappy = StftConfig(window_len=8, hop=8, centered=False)

        assert window_sum_floor(gappy, 64) < 1e-8
        with pytest.raises(ConfigurationError):
            istft(torch.zeros(2, 5, 8), gappy, 64)
