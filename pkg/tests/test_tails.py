"""
Unit tests for the tails module.
"""

import math

import numpy as np
import pytest

from skewdiff.tails import CONST, ZERO, GrowthClass, TailFamily, TailKind


class TestGrowthClass:
    """Test the asymptotic classes used by the symbolic series rules."""

    def test_summable_powers(self):
        """Test the p-series boundary."""
        assert GrowthClass(1.0, -2.0).summable
        assert not GrowthClass(1.0, -1.0).summable
        assert not GrowthClass(1.0, -0.5).summable

    def test_summable_logarithmic(self):
        """Test the 1/(n log^q n) boundary."""
        assert GrowthClass(1.0, -1.0, -2.0).summable
        assert not GrowthClass(1.0, -1.0, -1.0).summable

    def test_geometric_dominates_power(self):
        """Test that a ratio below one wins over any polynomial factor."""
        assert GrowthClass(0.5, 5.0).summable
        assert not GrowthClass(2.0, -5.0).summable

    def test_zero_class(self):
        """Test that the zero class is summable and absorbs products."""
        assert ZERO.summable
        assert (ZERO * GrowthClass(3.0, 2.0)).zero

    def test_partial_sums(self):
        """Test the class of partial sums."""
        assert GrowthClass(1.0, -2.0).partial_sums() == CONST
        assert GrowthClass(1.0, 0.0).partial_sums() == GrowthClass(1.0, 1.0, 0.0)
        assert GrowthClass(1.0, -1.0).partial_sums() == GrowthClass(1.0, 0.0, 1.0)
        assert GrowthClass(1.0, -1.0, -1.0).partial_sums() is None

    def test_compare_and_dominant(self):
        """Test ordering of growth classes."""
        slow, fast = GrowthClass(1.0, 1.0), GrowthClass(2.0, 0.0)
        assert slow.compare(fast) == -1
        assert fast.dominant(slow) == fast
        assert CONST.bounded_below
        assert not GrowthClass(1.0, -0.1).bounded_below


class TestTailFamily:
    """Test closed-form tail families."""

    def test_power_values(self):
        """Test offset + scale·(n+shift)^exponent."""
        family = TailFamily.power(2.0, -1.0, shift=1.0, offset=0.5)
        assert family.value(0) == pytest.approx(2.5)
        assert family.value(3) == pytest.approx(1.0)

    def test_geometric_values(self):
        """Test scale·ratio^n."""
        family = TailFamily.geometric(1.0, 0.5)
        np.testing.assert_allclose(family.values([0, 1, 4]), [1.0, 0.5, 0.0625])

    def test_harmonic_values(self):
        """Test that the harmonic family gives H_n."""
        family = TailFamily.harmonic(1.0)
        assert family.value(1) == pytest.approx(1.0)
        assert family.value(2) == pytest.approx(1.5)
        assert family.value(4) == pytest.approx(25 / 12)

    def test_limits(self):
        """Test limits at infinity."""
        assert TailFamily.constant(3.0).limit() == 3.0
        assert TailFamily.power(1.0, -1.0).limit() == 0.0
        assert TailFamily.power(1.0, -1.0, offset=0.5).limit() == 0.5
        assert math.isinf(TailFamily.geometric(1.0, 2.0).limit())
        assert math.isinf(TailFamily.harmonic(1.0).limit())
        assert math.isinf(TailFamily.transformed(TailFamily.power(1.0, -1.0), 1.0, -1.0).limit())

    def test_variation(self):
        """Test the class of consecutive differences."""
        assert TailFamily.constant(1.0).variation().zero
        assert TailFamily.power(1.0, 2.0).variation() == GrowthClass(1.0, 1.0, 0.0)
        assert TailFamily.harmonic(1.0).variation() == GrowthClass(1.0, -1.0, 0.0)

    def test_alpha_product_is_numeric_only(self):
        """Test that products of α ratios carry no growth class."""
        family = TailFamily.alpha_product(TailFamily.constant(2 / 3), 1.0, 0, invert=False)
        assert family.value(3) == pytest.approx(8.0)
        assert not family.closed_form
        assert family.growth() is None

    def test_params_round_trip(self):
        """Test that serialization parameters rebuild the same family."""
        family = TailFamily.geometric(1.5, 0.25, exponent=1.0, shift=2.0, offset=0.1)
        assert TailFamily.from_params(family.kind, family.params) == family

    def test_transformed_needs_base(self):
        """Test that derived kinds need their base family."""
        with pytest.raises(ValueError):
            TailFamily.from_params(TailKind.TRANSFORMED, {"scale": 1.0, "exponent": 0.5})

    def test_check_reports_bad_parameters(self):
        """Test parameter admissibility."""
        assert TailFamily.power(1.0, -1.0).check() == []
        problems = TailFamily.geometric(1.0, -0.5).check()
        assert any("ratio" in p for p in problems)
