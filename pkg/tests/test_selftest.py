"""Tests for the numerical self-test."""

import pytest
import torch

from keymark.entities import SelfTestReport
from keymark.use_cases import SelfTestUseCase
from keymark.use_cases.selftest import GRADIENT_TOLERANCE, INVERSION_TOLERANCE, ROUNDTRIP_TOLERANCE


@pytest.fixture
def use_case():
    return SelfTestUseCase(key_bits=4, param_draws=1)


@pytest.fixture
def generator():
    return torch.Generator().manual_seed(0)


class TestOracles:
    """Test the individual self-test oracles on a small key space."""

    def test_stft_roundtrip(self, use_case, generator):
        """Test the reconstruction oracle."""
        assert use_case.stft_roundtrip(generator, clips=4) <= ROUNDTRIP_TOLERANCE

    def test_inversion(self, use_case, generator):
        """Test exhaustive-key invertibility."""
        assert use_case.inversion_error(generator) <= INVERSION_TOLERANCE

    def test_gating(self, use_case, generator):
        """Test that closed blocks pass x through bit-exactly."""
        assert use_case.gating_violations(generator) == 0

    def test_zero_key(self, use_case, generator):
        """Test that the zero key leaves the reconstruction untouched."""
        assert use_case.zero_key_deviation(generator) <= ROUNDTRIP_TOLERANCE

    def test_gradients(self, use_case, generator):
        """Test every finite-difference check."""
        checks = use_case.gradient_errors(generator)

        assert [c.name for c in checks] == [
            "grad.primitives",
            "grad.inn_two_blocks",
            "grad.predict",
            "grad.perceptual",
            "grad.accuracy",
        ]
        assert all(c.value <= GRADIENT_TOLERANCE for c in checks)


class TestReport:
    """Test the aggregated report."""

    @pytest.mark.slow
    def test_full_run_passes(self):
        """Test the default self-test over all 256 keys."""
        report = SelfTestUseCase().run()

        assert report.passed
        assert len(report.checks) == 9

    def test_failed_check_fails_report(self):
        """Test that one failing check fails the report."""
        use_case = SelfTestUseCase(key_bits=2)

        failed = use_case._check("demo", 1.0, 0.5)
        report = SelfTestReport(checks=[use_case._check("ok", 0.1, 0.5), failed])

        assert not failed.passed
        assert not report.passed
