"""Tests for the redundancy estimators."""

import pytest
import torch

from keymark.core import autodiff as ad
from keymark.core.predict import PredictModule, gaussian_redundancy
from keymark.entities.exceptions import ShapeMismatchError


class TestPredictModule:
    """Test the predict module."""

    def test_fresh_module_predicts_zeros(self):
        """Test that the zero-initialised head gives a zero estimate."""
        module = PredictModule(hidden=4, blocks=2)

        assert torch.count_nonzero(module(torch.randn(2, 2, 9, 5))) == 0

    def test_output_shape(self):
        """Test that the estimate matches the spectrogram shape."""
        module = PredictModule(hidden=4, blocks=2)

        assert module(torch.randn(3, 2, 501, 11)).shape == (3, 2, 501, 11)

    def test_is_deterministic(self):
        """Test that repeated calls give identical estimates."""
        generator = torch.Generator().manual_seed(0)
        module = ad.randomize_parameters(PredictModule(hidden=4, blocks=2), generator)
        x = torch.randn((1, 2, 9, 5), generator=generator)

        assert torch.equal(module(x), module(x))

    def test_wrong_channel_count_raises_error(self):
        """Test that only two-channel spectrograms are accepted."""
        with pytest.raises(ShapeMismatchError):
            PredictModule(hidden=4, blocks=2)(torch.zeros(1, 3, 9, 5))

    def test_parameter_gradients(self):
        """Test analytic against finite-difference parameter gradients."""
        generator = torch.Generator().manual_seed(1)
        module = ad.randomize_parameters(PredictModule(hidden=4, blocks=2).double(), generator, std=0.2)
        x = torch.randn((1, 2, 9, 5), generator=generator, dtype=torch.float64)
        weight = torch.randn((1, 2, 9, 5), generator=generator, dtype=torch.float64)

        error = ad.grad_check_parameters(
            lambda: (module(x) * weight).sum(), list(module.parameters()), generator=generator
        )

        assert error < 1e-3


class TestGaussianRedundancy:
    """Test the Gaussian stand-in."""

    def test_seeded(self):
        """Test that equal seeds give equal samples and different seeds differ."""
        a = gaussian_redundancy((2, 2, 9, 5), torch.Generator().manual_seed(0))
        b = gaussian_redundancy((2, 2, 9, 5), torch.Generator().manual_seed(0))
        c = gaussian_redundancy((2, 2, 9, 5), torch.Generator().manual_seed(1))

        assert torch.equal(a, b)
        assert not torch.equal(a, c)

    def test_standard_normal_moments(self):
        """Test mean 0 and variance 1 over a million draws."""
        draws = gaussian_redundancy((1000, 1000), torch.Generator().manual_seed(0), dtype=torch.float64)

        assert abs(float(draws.mean())) < 0.01
        assert 0.99 <= float(draws.var()) <= 1.01
