"""Tests for the key-gated invertible network."""

import math

import pytest
import torch

from keymark.core import autodiff as ad
from keymark.core.inn import CouplingBlock, DenseSubnet, InvertibleNetwork, all_keys, clamp_alpha
from keymark.entities import KeyBits
from keymark.entities.exceptions import ConfigurationError, KeyLengthError, ShapeMismatchError


@pytest.fixture
def generator():
    return torch.Generator().manual_seed(0)


def random_network(generator, n_blocks=8, growth=4):
    return ad.randomize_parameters(InvertibleNetwork(n_blocks=n_blocks, growth=growth), generator, std=0.1)


class TestClamp:
    """Test the bounded log-scale clamp."""

    def test_bounded_and_odd(self):
        """Test |alpha| < c and alpha(-t) == -alpha(t)."""
        t = torch.linspace(-1e6, 1e6, 101, dtype=torch.float64)
        out = clamp_alpha(t, 2.0)

        assert out.abs().max() < 2.0
        assert torch.allclose(clamp_alpha(-t, 2.0), -out)
        assert clamp_alpha(torch.zeros(1), 2.0).item() == 0.0

    def test_slope_at_origin(self):
        """Test d alpha / dt = 2c / pi at zero."""
        t = torch.zeros(1, dtype=torch.float64, requires_grad=True)
        clamp_alpha(t, 2.0).backward()

        assert t.grad.item() == pytest.approx(4.0 / math.pi)

    def test_strictly_increasing(self):
        """Test strict monotonicity on a 1000-point grid."""
        out = clamp_alpha(torch.linspace(-50.0, 50.0, 1000, dtype=torch.float64), 2.0)

        assert bool((out[1:] > out[:-1]).all())

    def test_saturates_near_bound(self):
        """Test that large inputs come within 0.1% of the bound."""
        out = clamp_alpha(torch.tensor([1e6, -1e6], dtype=torch.float64), 2.0)

        assert out[0].item() > 0.999 * 2.0
        assert out[1].item() < -0.999 * 2.0

    def test_non_positive_scale_raises_error(self):
        """Test that c <= 0 is rejected."""
        with pytest.raises(ConfigurationError):
            clamp_alpha(torch.zeros(1), 0.0)
        with pytest.raises(ConfigurationError):
            clamp_alpha(torch.zeros(1), -1.0)


class TestSubnet:
    """Test the dense subnet."""

    def test_fresh_subnet_outputs_zeros(self):
        """Test that the zero-initialised projection silences a fresh subnet."""
        net = DenseSubnet(growth=4)

        assert torch.count_nonzero(net(torch.randn(2, 2, 9, 5))) == 0

    def test_shape_is_preserved(self, generator):
        """Test that the subnet maps (B, 2, F, T) to the same shape."""
        net = ad.randomize_parameters(DenseSubnet(growth=4), generator)

        assert net(torch.randn(3, 2, 11, 6)).shape == (3, 2, 11, 6)


class TestInversion:
    """Test that the inverse undoes the forward pass."""

    def test_every_key_inverts(self, generator):
        """Test max reconstruction error <= 1e-4 for all 256 keys."""
        keys = all_keys(8)
        with torch.no_grad():
            for _ in range(3):
                net = random_network(generator)
                x = torch.randn((256, 2, 9, 5), generator=generator)
                wm = torch.randn((256, 2, 9, 5), generator=generator)

                x_back, wm_back = net.inverse(*net(x, wm, keys), keys)

                assert float((x_back - x).abs().max()) <= 1e-4
                assert float((wm_back - wm).abs().max()) <= 1e-4

    @pytest.mark.slow
    def test_every_key_inverts_over_many_draws(self, generator):
        """Test the exhaustive-key inversion over 100 parameter draws."""
        keys = all_keys(8)
        with torch.no_grad():
            for _ in range(100):
                net = random_network(generator)
                x = torch.randn((256, 2, 9, 5), generator=generator)
                wm = torch.randn((256, 2, 9, 5), generator=generator)
                x_back, wm_back = net.inverse(*net(x, wm, keys), keys)

                assert float((x_back - x).abs().max()) <= 1e-4
                assert float((wm_back - wm).abs().max()) <= 1e-4

    def test_single_block_inverts(self, generator):
        """Test one block with both gate values."""
        block = ad.randomize_parameters(CouplingBlock(growth=4), generator, std=0.1)
        x = torch.randn((2, 2, 9, 5), generator=generator)
        wm = torch.randn((2, 2, 9, 5), generator=generator)
        gate = torch.tensor([0.0, 1.0])

        with torch.no_grad():
            x_back, wm_back = block.inverse(*block(x, wm, gate), gate)

        assert torch.allclose(x_back, x, atol=1e-5)
        assert torch.allclose(wm_back, wm, atol=1e-5)


class TestKeyGating:
    """Test that zero key bits leave the x-channel untouched."""

    def test_closed_blocks_are_bit_exact(self, generator):
        """Test every block with k_i = 0 for every 8-bit key."""
        keys = all_keys(8)
        gates = torch.stack([k.to_tensor() for k in keys])
        net = random_network(generator)
        x = torch.randn((256, 2, 9, 5), generator=generator)
        wm = torch.randn((256, 2, 9, 5), generator=generator)

        with torch.no_grad():
            trace = net.forward_trace(x, wm, keys)

        for i in range(8):
            closed = gates[:, i] == 0
            assert torch.equal(trace[i + 1][closed], trace[i][closed])

    def test_open_blocks_change_x(self, generator):
        """Test that a randomised open block moves the x-channel."""
        net = random_network(generator)
        x = torch.randn((1, 2, 9, 5), generator=generator)
        wm = torch.randn((1, 2, 9, 5), generator=generator)

        with torch.no_grad():
            x_out, _ = net(x, wm, KeyBits(bits=(1,) * 8))

        assert not torch.equal(x_out, x)

    def test_zero_key_is_identity_on_x(self, generator):
        """Test that the all-zero key returns x unchanged."""
        net = random_network(generator)
        x = torch.randn((2, 2, 9, 5), generator=generator)
        wm = torch.randn((2, 2, 9, 5), generator=generator)

        with torch.no_grad():
            x_out, _ = net(x, wm, KeyBits(bits=(0,) * 8))

        assert torch.equal(x_out, x)


class TestValidation:
    """Test input validation of the network."""

    def test_wrong_key_length_raises_error(self):
        """Test that a 4-bit key is rejected by an 8-block network."""
        net = InvertibleNetwork(n_blocks=8, growth=4)

        with pytest.raises(KeyLengthError):
            net(torch.zeros(1, 2, 9, 5), torch.zeros(1, 2, 9, 5), KeyBits(bits=(1, 0, 1, 0)))

    def test_mismatched_channels_raise_error(self):
        """Test that x and wm must share a shape."""
        net = InvertibleNetwork(n_blocks=2, growth=4)

        with pytest.raises(ShapeMismatchError):
            net(torch.zeros(1, 2, 9, 5), torch.zeros(1, 2, 9, 6), KeyBits(bits=(1, 1)))

    def test_all_keys_order(self):
        """Test that all_keys enumerates keys in increasing numeric order."""
        keys = all_keys(3)

        assert [k.to_hex() for k in keys] == ["0", "1", "2", "3", "4", "5", "6", "7"]
