"""
Tests for the command-line front end and its exit codes.
"""

import json

import pandas as pd
import pytest

from skewdiff.cli import (EXIT_EXPLOSIVE, EXIT_INCONCLUSIVE, EXIT_INVALID, EXIT_NO_SCALE,
                          EXIT_OK, build_argument_parser, main, plan_from_args)
from skewdiff.fixtures import bessel, brownian, counterexample, degenerate, layered_bounded, skew_bm
from skewdiff.ingest import dump_config, dump_layers, ingest
from skewdiff.models import SCHEMA_MANIFEST
from skewdiff.simulation import Recording, Scheme


def config_file(tmp_path, config, name):
    return str(dump_config(config, tmp_path / f"{name}.json"))


class TestArguments:
    """Test argument parsing."""

    def test_plan_from_args(self):
        """Test that plan flags map onto SimPlan fields."""
        args = build_argument_parser().parse_args(
            ["simulate", "c.json", "--seed", "5", "--scheme", "exact_skew", "--t", "2",
             "--record", "full_path", "--levels", "0", "0.5", "--no-bridge"])
        plan = plan_from_args(args)
        assert plan.seed == 5
        assert plan.scheme is Scheme.EXACT
        assert plan.horizon == 2.0
        assert plan.record is Recording.FULL
        assert plan.levels == (0.0, 0.5)
        assert not plan.bridge

    def test_usage_error(self, capsys):
        """Test that argument errors use the validation exit code."""
        assert main(["classify"]) == EXIT_INVALID
        assert main(["mc", "speed", "c.json"]) == EXIT_INVALID
        assert "error" in capsys.readouterr().err


class TestClassifyCommand:
    """Test skewdiff classify."""

    def test_conclusive(self, tmp_path):
        """Test the report and manifest for BM."""
        out = tmp_path / "out"
        code = main(["classify", config_file(tmp_path, brownian(), "bm"), "--out", str(out)])
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["conclusive"] is True
        manifest = ingest(out / "manifest.json")
        assert manifest.schema_id == SCHEMA_MANIFEST
        assert manifest.value.exit_code == EXIT_OK
        assert manifest.value.command == "classify"
        assert (out / "run.log").exists()

    def test_inconclusive(self, tmp_path):
        """Test exit code 2 for undecided series."""
        out = tmp_path / "out"
        code = main(["classify", config_file(tmp_path, degenerate(), "deg"), "--out", str(out)])
        assert code == EXIT_INCONCLUSIVE

    def test_invalid_file(self, tmp_path, capsys):
        """Test exit code 1 with a located diagnostic."""
        path = tmp_path / "bad.json"
        path.write_text('{"schema": "skewdiff-config/1"}', encoding="utf-8")
        code = main(["classify", str(path), "--out", str(tmp_path / "out")])
        assert code == EXIT_INVALID
        assert f"{path}:1:" in capsys.readouterr().err

    def test_json_flag(self, tmp_path, capsys):
        """Test printing the report."""
        main(["classify", config_file(tmp_path, skew_bm(0.7), "skew"), "--json",
              "--out", str(tmp_path / "out")])
        printed = json.loads(capsys.readouterr().out)
        assert printed["effective_alpha"] == pytest.approx(0.7)


class TestScaleCommand:
    """Test skewdiff scale."""

    def test_queries(self, tmp_path):
        """Test the tabulated outputs."""
        out = tmp_path / "out"
        code = main(["scale", config_file(tmp_path, skew_bm(0.7), "skew"), "--eval", "-1", "1",
                     "--hitting", "0", "-1", "1", "--exit", "0", "-1", "1",
                     "--phi", "1.5", "--verify", "--out", str(out)])
        assert code == EXIT_OK
        hitting = pd.read_csv(out / "scale_hitting.csv")
        assert hitting.loc[0, "p_upper_first"] == pytest.approx(0.7)
        exit_time = pd.read_csv(out / "scale_exit.csv")
        assert exit_time.loc[0, "mean_exit_time"] == pytest.approx(1.0)
        phi = pd.read_csv(out / "scale_phi.csv")
        assert phi.loc[0, "phi"] == pytest.approx(1.125)
        assert phi.loc[0, "abs_diff"] < 1e-8

    def test_no_scale(self, tmp_path):
        """Test exit code 3."""
        code = main(["scale", config_file(tmp_path, bessel(1.5), "bessel"), "--eval", "1",
                     "--out", str(tmp_path / "out")])
        assert code == EXIT_NO_SCALE


class TestSimulateCommand:
    """Test skewdiff simulate and mc."""

    def test_endpoints(self, tmp_path):
        """Test a small seeded run."""
        out = tmp_path / "out"
        code = main(["simulate", config_file(tmp_path, brownian(), "bm"), "--seed", "1",
                     "--paths", "20", "--dt", "0.01", "--out", str(out)])
        assert code == EXIT_OK
        assert len(pd.read_csv(out / "endpoints.csv")) == 20
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["seed"] == 1

    def test_functionals(self, tmp_path):
        """Test the functionals table."""
        out = tmp_path / "out"
        main(["simulate", config_file(tmp_path, brownian(), "bm"), "--seed", "1",
              "--paths", "5", "--dt", "0.01", "--record", "functionals", "--levels", "0",
              "--out", str(out)])
        frame = pd.read_csv(out / "functionals.csv")
        assert set(frame["functional"]) == {"qv", "local_time@0.0"}

    def test_seed_required(self, tmp_path):
        """Test that a missing seed is a plan failure."""
        code = main(["simulate", config_file(tmp_path, brownian(), "bm"),
                     "--out", str(tmp_path / "out")])
        assert code == EXIT_INVALID

    def test_explosive(self, tmp_path):
        """Test exit code 4 and the opt-in."""
        path = config_file(tmp_path, counterexample(2.0), "explode")
        code = main(["simulate", path, "--seed", "1", "--paths", "10",
                     "--out", str(tmp_path / "refused")])
        assert code == EXIT_EXPLOSIVE
        code = main(["simulate", path, "--seed", "1", "--paths", "10", "--dt", "0.01",
                     "--x0", "1", "--x-max", "1000", "--allow-explosive",
                     "--out", str(tmp_path / "allowed")])
        assert code == EXIT_OK
        manifest = json.loads((tmp_path / "allowed" / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["censor_bounds"][0] == -1000.0
        assert manifest["censor_bounds"][1] < 1000.0
        assert "resolution" in manifest["notes"][0]

    def test_mc_hit(self, tmp_path):
        """Test the hitting estimator table."""
        out = tmp_path / "out"
        code = main(["mc", "hit", config_file(tmp_path, skew_bm(0.7), "skew"), "--seed", "3",
                     "--paths", "200", "--dt", "0.01", "--out", str(out)])
        assert code == EXIT_OK
        frame = pd.read_csv(out / "mc_hit.csv")
        assert frame.loc[0, "analytic_target"] == pytest.approx(0.7)
        assert 0.0 <= frame.loc[0, "estimate"] <= 1.0


class TestLayeredCommand:
    """Test skewdiff layered."""

    def test_classify(self, tmp_path):
        """Test the layered report and drift table."""
        layers = str(dump_layers(layered_bounded(), tmp_path / "layers.json"))
        out = tmp_path / "out"
        assert main(["layered", "classify", layers, "--out", str(out)]) == EXIT_OK
        report = pd.read_csv(out / "layered_report.csv", dtype=str)
        assert report.loc[0, "positive_recurrent"] == "true"
        assert (out / "layered_drift.csv").exists()

    def test_dispersion(self, tmp_path):
        """Test the dispersion table."""
        layers = str(dump_layers(layered_bounded(), tmp_path / "layers.json"))
        out = tmp_path / "out"
        code = main(["layered", "dispersion", layers, "--seed", "2", "--paths", "50",
                     "--dt", "0.01", "--t", "0.5", "--times", "0.25", "0.5", "--out", str(out)])
        assert code == EXIT_OK
        frame = pd.read_csv(out / "dispersion.csv")
        assert list(frame["t"]) == pytest.approx([0.25, 0.5])
