"""Rate fitting, experiment orchestration, and CLI tests."""

import json
import math

import numpy as np
import pytest

from routebench import (
    ExperimentConfig,
    default_config,
    fit_loglog_slope,
    run_experiment,
)
from routebench.cli import main
from routebench.core import stable_stream


class TestRateFit:
    def test_exact_inverse_law(self):
        samples = [(n, 3.0 / n) for n in (10, 100, 1000, 10_000)]
        fit = fit_loglog_slope(samples)
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert math.exp(fit.intercept) == pytest.approx(3.0)

    def test_exact_three_halves_law(self):
        samples = [(n, n**1.5) for n in (10, 20, 50, 400)]
        assert fit_loglog_slope(samples).slope == pytest.approx(1.5, abs=1e-12)

    def test_r_squared_reproducible_from_points(self):
        rng = np.random.default_rng(81)
        samples = [(n, n**-0.7 * float(rng.uniform(0.9, 1.1))) for n in (10, 30, 90, 270)]
        fit = fit_loglog_slope(samples)
        x = np.array([p[0] for p in fit.points])
        y = np.array([p[1] for p in fit.points])
        resid = y - (fit.slope * x + fit.intercept)
        ss_res = float(resid @ resid)
        ss_tot = float(((y - y.mean()) ** 2).sum())
        assert fit.r_squared == pytest.approx(1 - ss_res / ss_tot, abs=1e-9)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            fit_loglog_slope([(10, 1.0)])
        with pytest.raises(ValueError):
            fit_loglog_slope([(10, 1.0), (20, -0.5)])


def small_config(tmp_path, name="run", **overrides):
    base = dict(
        experiment="ktsp-rate",
        density={"kind": "uniform", "m": 1},
        n_grid=(50, 100),
        trials=8,
        master_seed=12345,
        out_dir=str(tmp_path / name),
        k_grid=(2,),
        workers=1,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRunExperiment:
    def test_rerun_is_byte_identical(self, tmp_path):
        r1 = run_experiment(small_config(tmp_path, "a"))
        r2 = run_experiment(small_config(tmp_path, "b"))
        assert open(r1.csv_path, "rb").read() == open(r2.csv_path, "rb").read()
        assert open(r1.summary_path, "rb").read() == open(r2.summary_path, "rb").read()

    def test_worker_count_does_not_change_results(self, tmp_path):
        r1 = run_experiment(small_config(tmp_path, "w1", workers=1))
        r2 = run_experiment(small_config(tmp_path, "w2", workers=2))
        assert open(r1.csv_path, "rb").read() == open(r2.csv_path, "rb").read()
        assert r1.summary["config_hash"] == r2.summary["config_hash"]

    def test_csv_schema(self, tmp_path):
        report = run_experiment(small_config(tmp_path))
        lines = open(report.csv_path).read().splitlines()
        assert lines[0] == "experiment,n,k,trial,seed,value"
        parts = lines[1].split(",")
        assert len(parts) == 6
        int(parts[1]), int(parts[2]), int(parts[3]), int(parts[4])
        float(parts[5])

    def test_trial_values_invariant_to_grid_order(self, tmp_path):
        r1 = run_experiment(small_config(tmp_path, "g1", n_grid=(50, 100)))
        r2 = run_experiment(small_config(tmp_path, "g2", n_grid=(100, 50)))
        rows1 = set(open(r1.csv_path).read().splitlines()[1:])
        rows2 = set(open(r2.csv_path).read().splitlines()[1:])
        assert rows1 == rows2

    def test_summary_carries_provenance(self, tmp_path):
        cfg = small_config(tmp_path)
        report = run_experiment(cfg)
        assert report.summary["config_hash"] == cfg.config_hash()
        assert report.summary["master_seed"] == 12345
        assert report.summary["config"]["n_grid"] == [50, 100]

    def test_threshold_failure_reported(self, tmp_path):
        cfg = small_config(tmp_path, thresholds={"slope_tol": 1e-9})
        report = run_experiment(cfg)
        assert not report.passed

    def test_stable_stream_is_documented_hash(self):
        assert stable_stream("ktsp-rate", 50, 2, 0) == stable_stream("ktsp-rate", 50, 2, 0)
        assert stable_stream("ktsp-rate", 50, 2, 0) != stable_stream("ktsp-rate", 50, 2, 1)

    def test_default_configs_valid(self):
        for kind in ("ktsp-rate", "trp-rate", "tail-dominance", "fairness-audit", "trp-factor"):
            cfg = default_config(kind)
            assert cfg.experiment == kind

    def test_config_json_round_trip(self, tmp_path):
        cfg = small_config(tmp_path)
        back = ExperimentConfig.from_json(json.dumps(cfg.canonical()))
        assert back.config_hash() == cfg.config_hash()

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig("nope", {"kind": "uniform", "m": 1}, (10,), 1, 0)


class TestCli:
    def test_pipeline(self, tmp_path):
        density = tmp_path / "density.json"
        density.write_text(json.dumps({"m": 2, "cells": [2, 2, 0, 0], "square": {"origin": [0, 0], "side": 1.0}}))
        points = tmp_path / "points.csv"
        assert main(["sample", "--density", str(density), "--n", "30", "--seed", "5", "--out", str(points)]) == 0
        assert points.read_text().startswith("x,y\n")

        out = tmp_path / "tsp.json"
        assert main(["tsp", "--points", str(points), "--method", "2opt", "--out", str(out)]) == 0
        assert "length" in json.loads(out.read_text())

        out = tmp_path / "ktsp.json"
        assert main(["ktsp", "--points", str(points), "--k", "4", "--out", str(out)]) == 0
        result = json.loads(out.read_text())
        assert result["k"] == 4 and len(result["order"]) == 4

        out = tmp_path / "trp.json"
        assert main(["trp", "--points", str(points), "--density", str(density), "--out", str(out)]) == 0
        result = json.loads(out.read_text())
        assert result["n"] == 30 and len(result["order"]) == 30

    def test_fairness_and_dispatch(self, tmp_path):
        pop = tmp_path / "pop.json"
        pop.write_text(
            json.dumps(
                {
                    "m": 2,
                    "layers": [[2.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, 0.0]],
                    "square": {"origin": [0, 0], "side": 1.0},
                }
            )
        )
        out = tmp_path / "mix.json"
        assert main(["fairness", "--population", str(pop), "--k", "2", "--targets", "0.5,0.5", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["q"] == [0.5, 0.5, 0.0, 0.0]

        out = tmp_path / "plan.json"
        assert main(["dispatch", "--mode", "trp", "--lambda", "10", "--a", "1", "--N", "100", "--m", "4", "--T", "15", "--out", str(out)]) == 0
        plan = json.loads(out.read_text())
        assert plan["feasible"] and abs(plan["slack"]) < 1e-9

    def test_experiment_exit_codes(self, tmp_path):
        cfg_pass = small_config(tmp_path, "cli-pass", thresholds={"slope_tol": 10.0, "naive_factor": 100.0})
        path = tmp_path / "pass.json"
        path.write_text(json.dumps(cfg_pass.canonical() | {"out_dir": cfg_pass.out_dir}))
        assert main(["experiment", "--config", str(path)]) == 0

        cfg_fail = small_config(tmp_path, "cli-fail", thresholds={"slope_tol": 1e-12})
        path = tmp_path / "fail.json"
        path.write_text(json.dumps(cfg_fail.canonical() | {"out_dir": cfg_fail.out_dir}))
        assert main(["experiment", "--config", str(path)]) == 2

    def test_error_exit_code(self):
        assert main(["tsp", "--points", "/nonexistent/file.csv"]) == 1
