"""
Unit tests for the config module.
"""

import numpy as np
import pytest

from skewdiff.config import (PartitionSpec, SequenceSpec, Side, SkewConfig, alpha_values,
                             alphas_from_gammas, gammas_from_alphas, revuz_factor, rho_eval,
                             rho_integral, validate)
from skewdiff.errors import DomainError
from skewdiff.fixtures import (FIXTURES, bessel, brownian, constant_density, geometric_decay,
                               skew_bm, standard_partition)
from skewdiff.tails import TailFamily


class TestValidate:
    """Test configuration invariants."""

    def test_fixtures_are_valid(self):
        """Test that every named fixture passes validation."""
        for name, build in FIXTURES.items():
            report = validate(build())
            assert report.is_valid, f"{name}: {report.messages}"

    def test_sign_violation(self):
        """Test that a positive breakpoint on the negative side is reported."""
        _, pos = standard_partition()
        bad = PartitionSpec(Side.NEG, 0, 0, (1.0,), TailFamily.geometric(1.0, 0.5),
                            TailFamily.power(1.0, 1.0, shift=1.0))
        config = SkewConfig(bad, pos, constant_density(Side.NEG, 1.0),
                            constant_density(Side.POS, 1.0))
        report = validate(config)
        assert not report.is_valid
        assert any(v.code == "sign" and v.index == 0 for v in report.violations)

    def test_tail_disagreement(self):
        """Test that a tail which does not match the window edge is reported."""
        neg, _ = standard_partition()
        bad = PartitionSpec(Side.POS, 0, 0, (2.0,), TailFamily.geometric(1.0, 0.5),
                            TailFamily.power(2.0, 1.0, shift=1.0))
        config = SkewConfig(neg, bad, constant_density(Side.NEG, 1.0),
                            constant_density(Side.POS, 1.0))
        report = validate(config)
        assert any(v.code == "agreement" for v in report.violations)
        assert any("inner_tail" in m for m in report.messages)

    def test_monotonicity(self):
        """Test that a decreasing outer tail is reported."""
        neg, _ = standard_partition()
        bad = PartitionSpec(Side.POS, 0, 0, (1.0,), TailFamily.geometric(1.0, 0.5),
                            TailFamily.power(1.0, -1.0, shift=1.0))
        config = SkewConfig(neg, bad, constant_density(Side.NEG, 1.0),
                            constant_density(Side.POS, 1.0))
        codes = {v.code for v in validate(config).violations}
        assert "monotonicity" in codes

    def test_nonpositive_density(self):
        """Test the positivity check on explicit density values."""
        neg, pos = standard_partition()
        bad = SequenceSpec(Side.NEG, 0, 0, (-1.0,), TailFamily.constant(1.0),
                           TailFamily.constant(1.0))
        config = SkewConfig(neg, pos, bad, constant_density(Side.POS, 1.0))
        assert any(v.code == "positivity" for v in validate(config).violations)

    def test_window_size(self):
        """Test that the number of explicit values must match the window."""
        neg, pos = standard_partition()
        bad = SequenceSpec(Side.POS, 0, 1, (1.0,), TailFamily.constant(1.0),
                           TailFamily.constant(1.0))
        config = SkewConfig(neg, pos, constant_density(Side.NEG, 1.0), bad)
        assert any(v.code == "window" for v in validate(config).violations)


class TestLocate:
    """Test segment lookup."""

    def test_inside_segment(self):
        """Test a point strictly between breakpoints."""
        config = brownian()
        loc = config.locate(0.75)
        assert loc.side is Side.POS and loc.k == -1
        assert not loc.at_breakpoint

    def test_on_breakpoint(self):
        """Test a point on r_{-1} = 0.5."""
        loc = brownian().locate(0.5)
        assert loc.k == -1 and loc.at_breakpoint

    def test_negative_side(self):
        """Test that -1.5 sits in (l_{-1}, l_0) = (-2, -1)."""
        loc = brownian().locate(-1.5)
        assert loc.side is Side.NEG and loc.k == -1

    def test_zero(self):
        """Test that 0 is its own location."""
        assert brownian().locate(0.0).at_zero


class TestDensity:
    """Test ρ̃, the Revuz factor and ∫ρ."""

    def test_rho_inside_segments(self):
        """Test the one-sided densities of skew BM."""
        config = skew_bm(0.7)
        assert rho_eval(config, -0.3) == pytest.approx(3 / 7)
        assert rho_eval(config, 0.3) == pytest.approx(1.0)

    def test_rho_at_zero(self):
        """Test the average of the limits at 0."""
        config = skew_bm(0.7)
        assert rho_eval(config, 0.0) == pytest.approx(5 / 7)
        assert revuz_factor(config, 0.0) == pytest.approx(7 / 5)

    def test_rho_at_breakpoint(self):
        """Test the average at r_1 = 2, where ρ drops from 1 to 1/2."""
        config = geometric_decay()
        assert rho_eval(config, 2.0) == pytest.approx(0.75)
        assert revuz_factor(config, 2.0) == pytest.approx(4 / 3)

    def test_revuz_factor_needs_breakpoint(self):
        """Test that the Revuz factor is only defined on breakpoints."""
        with pytest.raises(DomainError):
            revuz_factor(brownian(), 0.3)

    def test_rho_integral(self):
        """Test ∫ρ across several layers of geometric decay."""
        assert rho_integral(geometric_decay(), -4.5, 3.3) == pytest.approx(5.3875)

    def test_rho_integral_order(self):
        """Test that a > b is rejected."""
        with pytest.raises(DomainError):
            rho_integral(brownian(), 1.0, 0.0)


class TestAlphas:
    """Test the α parametrization."""

    def test_effective_alpha(self):
        """Test α = γ̄/(γ + γ̄) for skew BM."""
        profile = alphas_from_gammas(skew_bm(0.7))
        assert profile.effective_alpha == pytest.approx(0.7)
        assert np.allclose(profile.neg.values, 0.5)
        assert profile.note == ""

    def test_effective_alpha_undefined(self):
        """Test the infinite limits of the δ = 1/2 Bessel step config."""
        profile = alphas_from_gammas(bessel(0.5))
        assert profile.effective_alpha is None
        assert "undefined" in profile.note

    def test_gammas_from_constant_alphas(self):
        """Test γ doubling on every step for α ≡ 2/3."""
        half = TailFamily.constant(0.5)
        two_thirds = TailFamily.constant(2 / 3)
        alphas_neg = SequenceSpec(Side.NEG, 0, 0, (0.5,), half, half)
        alphas_pos = SequenceSpec(Side.POS, 0, 0, (2 / 3,), two_thirds, two_thirds)
        gamma, gammabar = gammas_from_alphas(alphas_neg, alphas_pos, 1.0, 1.0)
        np.testing.assert_allclose(gamma.at([-3, 0, 4]), [1.0, 1.0, 1.0])
        np.testing.assert_allclose(gammabar.at([-1, 0, 1, 2]), [0.5, 1.0, 2.0, 4.0])
        np.testing.assert_allclose(alpha_values(gammabar, [-2, 0, 3]), 2 / 3)

    def test_alphas_out_of_range(self):
        """Test that α outside (0, 1) is rejected."""
        half = TailFamily.constant(0.5)
        good = SequenceSpec(Side.NEG, 0, 0, (0.5,), half, half)
        bad = SequenceSpec(Side.POS, 0, 0, (1.2,), half, half)
        with pytest.raises(DomainError):
            gammas_from_alphas(good, bad, 1.0, 1.0)
