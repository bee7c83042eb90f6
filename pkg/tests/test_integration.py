"""
Integration tests for the complete pipeline.
"""

import pytest

from skewdiff import (SimPlan, build_layered, build_scale, classify_all, classify_layered,
                      hitting_prob, load_config, load_layers, mc_hitting, mean_exit_time,
                      simulate_xy, speed_and_invariant, validate)
from skewdiff.classifier import Verdict
from skewdiff.fixtures import geometric_decay, layered_homogeneous, skew_bm
from skewdiff.ingest import dump_config, dump_layers
from skewdiff.scale import INFINITE_MASS, hitting_prob_upper
from skewdiff.simulation import Recording, Scheme


class TestIntegration:
    """Integration tests for the full pipeline."""

    def test_full_pipeline_skew_bm(self, tmp_path):
        """Test file to verdicts to closed forms to simulation for skew BM."""
        # Step 1: Load configuration
        config = load_config(dump_config(skew_bm(0.7), tmp_path / "skew.json"))
        assert validate(config).is_valid

        # Step 2: Classify
        report = classify_all(config)
        assert report.conclusive
        assert report.conservative.verdict == Verdict.TRUE
        assert report.recurrent.verdict == Verdict.TRUE

        # Step 3: Closed forms
        sf = build_scale(config)
        assert hitting_prob(sf, 0.0, -1.0, 1.0) == pytest.approx(0.3)
        assert mean_exit_time(sf, 0.0, -1.0, 1.0) == pytest.approx(1.0)
        _, dist = speed_and_invariant(config, sf)
        assert dist == INFINITE_MASS

        # Step 4: Simulate
        est = mc_hitting(config, sf, 0.5, -1.0, 1.0, 2000, seed=1, scheme=Scheme.EXACT,
                         dt=1e-3)
        assert est.analytic_target == pytest.approx(hitting_prob_upper(sf, 0.5, -1.0, 1.0))
        assert est.within(3.0, 0.01)

    def test_full_pipeline_positive_recurrent(self, tmp_path):
        """Test that the invariant mass agrees between classifier and scale function."""
        # Step 1: Load configuration
        config = load_config(dump_config(geometric_decay(), tmp_path / "decay.json"))

        # Step 2: Classify
        report = classify_all(config)
        assert report.positive_recurrent.verdict == Verdict.TRUE

        # Step 3: Invariant law from the scale table
        sf = build_scale(config)
        _, dist = speed_and_invariant(config, sf)
        assert dist.mass == pytest.approx(report.positive_recurrent.combined.value)
        assert float(dist.cdf(sf.positions[-1])) == pytest.approx(1.0, abs=1e-9)

    def test_full_pipeline_layered(self, tmp_path):
        """Test layered file to classification to joint simulation."""
        # Step 1: Load layers
        layer = load_layers(dump_layers(layered_homogeneous(), tmp_path / "layers.json"))

        # Step 2: Build and classify
        model = build_layered(layer)
        report = classify_layered(model)
        assert report.recurrent == Verdict.TRUE

        # Step 3: Simulate
        plan = SimPlan(seed=7, n_paths=100, dt=1e-2, horizon=0.5, record=Recording.FULL)
        ensemble = simulate_xy(model, plan, y0=1.0)
        assert ensemble.y_paths[:, 0] == pytest.approx(1.0)
        assert ensemble.x_paths[:, 0] == pytest.approx(0.0)
        assert ensemble.times[-1] == pytest.approx(0.5)
