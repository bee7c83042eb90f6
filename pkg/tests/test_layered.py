"""
Unit tests for the layered module.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from skewdiff.classifier import Verdict
from skewdiff.config import SequenceSpec, Side
from skewdiff.errors import DomainError, PlanError, PreconditionError
from skewdiff.fixtures import (layered_bounded, layered_homogeneous, layered_right_transient,
                               standard_partition)
from skewdiff.layered import (CoefficientTable, LayerConfig, build_layered, classify_layered,
                              derived_alphas, dispersion_stats, drift_table, layer_alphas,
                              layered_hitting_prob, mc_layered_hitting, simulate_xy)
from skewdiff.simulation import MCEstimate, Recording, Scheme, SimPlan
from skewdiff.tails import TailFamily


def layered_geometric(beta2: CoefficientTable) -> LayerConfig:
    """Unit outer layers with D_k = 4^{-|k|}: bounded Ψ range, short relaxation time."""
    neg, pos = standard_partition()
    one = TailFamily.constant(1.0)
    decay = TailFamily.geometric(1.0, 0.25)
    return LayerConfig(neg, pos, SequenceSpec(Side.NEG, 0, 0, (1.0,), one, decay),
                       SequenceSpec(Side.POS, 0, 0, (1.0,), one, decay), 0.5, beta2=beta2,
                       name="layered-geometric")


class TestCoefficientTable:
    """Test piecewise-constant coefficients."""

    def test_lookup(self):
        """Test right-continuous lookup."""
        table = CoefficientTable((0.0,), (1.0, 2.0))
        np.testing.assert_allclose(table(np.array([-1.0, 0.0, 1.0])), [1.0, 2.0, 2.0])

    def test_average(self):
        """Test the interval mean."""
        assert CoefficientTable((0.0,), (1.0, 2.0)).average(-1.0, 1.0) == pytest.approx(1.5)

    def test_shape_checks(self):
        """Test that sizes and edge order are enforced."""
        with pytest.raises(DomainError):
            CoefficientTable((0.0,), (1.0,))
        with pytest.raises(DomainError):
            CoefficientTable((1.0, 0.0), (1.0, 2.0, 3.0))


class TestBuildLayered:
    """Test derivation of the skew configuration."""

    def test_homogeneous(self):
        """Test Ψ(z) = z/2 for unit diffusivity and α = 1/2."""
        model = build_layered(layered_homogeneous())
        assert float(model.psi(2.0)) == pytest.approx(1.0)
        assert float(model.psi.inverse(-1.0)) == pytest.approx(-2.0)
        assert model.c_alpha == pytest.approx(0.5)
        assert model.effective_alpha == pytest.approx(0.5)

    def test_derived_alphas_match_layer_alphas(self):
        """Test that the derived densities carry the layer skew weights."""
        layer = layered_bounded()
        profile = derived_alphas(build_layered(layer))
        ks = profile.pos.index.to_numpy()
        np.testing.assert_allclose(profile.pos.to_numpy(), layer_alphas(layer, Side.POS, ks),
                                   rtol=1e-12)

    def test_alternating_layers(self):
        """Test α_k for D alternating between 1 and 4."""
        neg, pos = standard_partition()
        one = TailFamily.constant(1.0)
        alternating = SequenceSpec(Side.POS, 0, 3, (1.0, 4.0, 1.0, 4.0), one,
                                   TailFamily.constant(4.0))
        layer = LayerConfig(neg, pos, SequenceSpec(Side.NEG, 0, 0, (1.0,), one, one),
                            alternating, 0.5)
        np.testing.assert_allclose(layer_alphas(layer, Side.POS, [1, 2, 3]),
                                   [2 / 3, 1 / 3, 2 / 3])

    def test_alpha_domain(self):
        """Test that α must lie in (0, 1)."""
        with pytest.raises(DomainError):
            build_layered(layered_homogeneous(alpha=1.5))

    def test_vanishing_diffusivity(self):
        """Test that a zero diffusivity limit at the accumulation point is refused."""
        neg, pos = standard_partition()
        one = TailFamily.constant(1.0)
        vanishing = SequenceSpec(Side.NEG, 0, 0, (1.0,), TailFamily.power(1.0, -1.0, shift=1.0),
                                 one)
        layer = LayerConfig(neg, pos, vanishing, SequenceSpec(Side.POS, 0, 0, (1.0,), one, one),
                            0.5)
        with pytest.raises(PreconditionError) as info:
            build_layered(layer)
        assert info.value.evidence["D"] == 0.0


class TestClassifyLayered:
    """Test recurrence of the transversal component."""

    def test_homogeneous_null_recurrent(self):
        """Test that unit diffusivity is recurrent with unbounded range."""
        report = classify_layered(build_layered(layered_homogeneous()))
        assert report.recurrent == Verdict.TRUE
        assert report.positive_recurrent == Verdict.FALSE
        assert math.isinf(report.psi_range[1])

    def test_bounded_range(self):
        """Test the finite range of Ψ and positive recurrence.

        The layer at (1, 2) reads D̄_0 = 1 while (−2, −1) reads D_{−1} = 1/16, so the
        right half carries one extra unit layer of mass 1/2.
        """
        report = classify_layered(build_layered(layered_bounded()))
        assert report.psi_range[1] == pytest.approx(0.5 * (1 + math.pi ** 2 / 6), rel=1e-5)
        assert report.psi_range[0] == pytest.approx(-0.5 * math.pi ** 2 / 6, rel=1e-5)
        assert report.recurrent == Verdict.TRUE
        assert report.positive_recurrent == Verdict.TRUE
        assert "uniform" in report.note

    def test_right_transient(self):
        """Test that fast-growing diffusivity on the right is transient."""
        report = classify_layered(build_layered(layered_right_transient()))
        assert report.recurrent == Verdict.FALSE
        assert report.positive_recurrent == Verdict.FALSE

    def test_drift_table(self):
        """Test that homogeneous layers carry no interface drift."""
        frame = drift_table(build_layered(layered_homogeneous()), count=3)
        assert np.allclose(frame["x_drift"], 0.0)
        assert np.allclose(frame["alpha_k"], 0.5)
        assert frame["z"].is_monotonic_increasing


class TestLayeredFunctionals:
    """Test hitting probabilities and joint simulation."""

    def test_symmetric_hitting(self):
        """Test P(up first) = 1/2 in a symmetric homogeneous medium."""
        model = build_layered(layered_homogeneous())
        assert layered_hitting_prob(model, 0.0, -1.0, 1.0) == pytest.approx(0.5)
        with pytest.raises(DomainError):
            layered_hitting_prob(model, 2.0, -1.0, 1.0)

    def test_mc_hitting(self):
        """Test the Monte Carlo hitting probability in Ψ coordinates."""
        model = build_layered(layered_homogeneous())
        est = mc_layered_hitting(model, 0.0, -1.0, 1.0, 2000, seed=5, dt=1e-2)
        assert est.analytic_target == pytest.approx(0.5)
        assert est.within(3.0, 0.02)

    def test_longitudinal_variance(self):
        """Test Var(Y_T) = T for unit σ₂ and no drift."""
        model = build_layered(layered_homogeneous())
        plan = SimPlan(seed=13, n_paths=4000, dt=1e-2, horizon=1.0, record=Recording.FULL,
                       record_every=10)
        ensemble = simulate_xy(model, plan)
        stats = dispersion_stats(ensemble, [0.5, 1.0])
        assert list(stats["t"]) == pytest.approx([0.5, 1.0])
        assert stats["var"].iloc[-1] == pytest.approx(1.0, rel=0.1)
        assert abs(stats["mean"].iloc[-1]) < 4 * stats["se_mean"].iloc[-1]
        assert ensemble.y_terminal.shape == (4000,)
        assert ensemble.x_paths.shape == ensemble.y_paths.shape

    def test_dispersion_needs_paths(self):
        """Test that dispersion needs recorded trajectories."""
        model = build_layered(layered_homogeneous())
        ensemble = simulate_xy(model, SimPlan(seed=1, n_paths=10, dt=1e-2, horizon=0.1))
        with pytest.raises(ValueError):
            dispersion_stats(ensemble)

    def test_barriers_rejected(self):
        """Test that joint simulation has no barrier mode."""
        model = build_layered(layered_homogeneous())
        with pytest.raises(PlanError):
            simulate_xy(model, SimPlan(seed=1, barriers=(-1.0, 1.0)))

    @pytest.mark.parametrize("scheme", [Scheme.EULER, Scheme.EXACT])
    def test_mc_hitting_bounded_range(self, scheme):
        """Test Monte Carlo hitting against h̄ in a medium with bounded Ψ range."""
        model = build_layered(layered_bounded())
        est = mc_layered_hitting(model, 0.1, -0.6, 0.9, 20000, seed=23, scheme=scheme, dt=1e-2,
                                 threads=4)
        assert est.analytic_target == pytest.approx(layered_hitting_prob(model, 0.1, -0.6, 0.9))
        assert 0.0 < est.analytic_target < 1.0
        assert est.within(3.0, 0.01)

    def test_constant_drift(self):
        """Test mean Y_T = y0 + cT for β₂ ≡ c."""
        layer = replace(layered_homogeneous(), beta2=CoefficientTable.constant(0.5))
        model = build_layered(layer)
        ensemble = simulate_xy(model, SimPlan(seed=29, n_paths=4000, dt=1e-2, horizon=2.0),
                               y0=1.0)
        est = MCEstimate.from_samples(ensemble.y_terminal, target=1.0 + 0.5 * 2.0)
        assert est.within(3.0)
        assert not ensemble.z.censored.any()

    def test_driftless_mean_is_constant(self):
        """Test that β₂ ≡ 0 keeps the Y mean at y0 at every recorded time."""
        layer = replace(layered_bounded(), sigma2=CoefficientTable((0.0,), (0.5, 2.0)))
        model = build_layered(layer)
        plan = SimPlan(seed=37, n_paths=4000, dt=1e-2, horizon=2.0, record=Recording.FULL,
                       record_every=10)
        stats = dispersion_stats(simulate_xy(model, plan, y0=-0.5))
        assert len(stats) == 21
        assert np.all(np.abs(stats["mean"] + 0.5) <= 3 * stats["se_mean"])

    def test_ergodic_drift_slope(self):
        """Test that the long-run drift of Y is β₂ averaged over the uniform law on Ψ(ℝ)."""
        beta2 = CoefficientTable((0.0,), (-1.0, 1.0))
        model = build_layered(layered_geometric(beta2))
        report = classify_layered(model)
        assert report.positive_recurrent == Verdict.TRUE
        lo, hi = report.psi_range
        target = beta2.average(lo, hi)
        assert target == pytest.approx((hi + lo) / (hi - lo))
        plan = SimPlan(scheme=Scheme.EXACT, seed=41, n_paths=1000, dt=1e-2, horizon=200.0,
                       record=Recording.FULL, record_every=5000)
        ensemble = simulate_xy(model, plan)
        np.testing.assert_allclose(ensemble.times, [0.0, 50.0, 100.0, 150.0, 200.0])
        ys = ensemble.y_paths
        slopes = (ys[:, -1] - ys[:, 1]) / (ensemble.times[-1] - ensemble.times[1])
        assert MCEstimate.from_samples(slopes, target=target).within(3.0)


class TestLayeredCensoring:
    """Test that censoring acts on |X| ≥ x_max through Ψ."""

    def test_z_bounds_map_to_x_max(self):
        """Test that the Z censor bounds are Ψ⁻¹(−x_max) and Ψ⁻¹(x_max)."""
        model = build_layered(layered_homogeneous(alpha=0.7))
        plan = SimPlan(seed=43, n_paths=500, dt=1e-2, horizon=20.0, x_max=2.0)
        ensemble = simulate_xy(model, plan)
        z_lo, z_hi = ensemble.z.censor_bounds
        assert z_lo == pytest.approx(float(model.psi.inverse(-2.0)))
        assert z_hi == pytest.approx(float(model.psi.inverse(2.0)))
        assert abs(z_lo) != pytest.approx(abs(z_hi))
        np.testing.assert_allclose(model.psi(np.array([z_lo, z_hi])), [-2.0, 2.0])

    def test_censored_paths_left_the_x_window(self):
        """Test that exactly the paths with |X| reaching x_max are censored."""
        model = build_layered(layered_homogeneous(alpha=0.7))
        plan = SimPlan(seed=43, n_paths=500, dt=1e-2, horizon=20.0, x_max=2.0)
        ensemble = simulate_xy(model, plan)
        x = ensemble.x_terminal
        censored = ensemble.z.censored
        assert censored.any() and not censored.all()
        assert np.all(np.abs(x[censored]) >= 2.0 - 1e-9)
        assert np.all(np.abs(x[~censored]) < 2.0)
