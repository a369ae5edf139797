"""Batch harness, verification reports, CSV round trips, CLI contracts."""

import csv
import math

import numpy as np
import pytest
import yaml

from ccvo.bench import (AGGREGATE_CSV_HEADER, RUN_CSV_HEADER, ConfigError,
                        Settings, analytic_f_moments, boundary_feasible_configs,
                        load_settings, read_run_csv, run_batch, sample_f,
                        sweep_k, verify_tail_bound, verify_moments,
                        write_aggregate_csv, write_run_csv)
from ccvo.cli import cli_main
from ccvo.planner import KinematicLimits, PlannerConfig
from ccvo.sim import run_episode


def small_settings():
    # tiny worlds keep the harness tests fast
    from dataclasses import replace
    s = Settings()
    return replace(s, scenario=replace(s.scenario, n_pedestrians=2,
                                       n_cross=2, time_limit=60.0))


class TestRunBatch:
    def test_single_run_equals_episode(self, tmp_path):
        settings = small_settings()
        report = run_batch("empty", "ccvo", settings, 1, base_seed=9)
        episode = run_episode("empty", "ccvo", settings.planner,
                              settings.limits, 9,
                              params=settings.scenario,
                              sensors=settings.sensors)
        assert report.runs == 1
        row = report.rows[0]
        assert row.outcome == episode.outcome
        assert row.length_m == episode.trajectory_length
        assert row.time_s == episode.navigation_time
        assert report.success_rate == (1.0 if episode.outcome == "success"
                                       else 0.0)

    def test_csv_round_trip_exact(self, tmp_path):
        settings = small_settings()
        report = run_batch("empty", "ccvo", settings, 5, base_seed=0,
                           out_dir=tmp_path)
        path = tmp_path / "runs_empty_ccvo_k1.csv"
        parsed = read_run_csv(path)
        assert parsed == report

    def test_aggregate_csv_schema(self, tmp_path):
        settings = small_settings()
        report = run_batch("empty", "ccvo", settings, 3, base_seed=0,
                           out_dir=tmp_path)
        with open(tmp_path / "aggregate.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == AGGREGATE_CSV_HEADER
        assert rows[1][0] == "empty"
        assert int(rows[1][3]) == 3
        assert float(rows[1][5]) == report.success_rate

    def test_worker_pool_matches_serial(self):
        settings = small_settings()
        serial = run_batch("empty", "ccvo", settings, 6, base_seed=3)
        parallel = run_batch("empty", "ccvo", settings, 6, base_seed=3,
                             workers=2)
        assert serial == parallel

    def test_means_over_successes_only(self):
        settings = small_settings()
        report = run_batch("empty", "ccvo", settings, 4, base_seed=0)
        succ = [r for r in report.rows if r.outcome == "success"]
        assert report.mean_trajectory_length == pytest.approx(
            sum(r.length_m for r in succ) / len(succ))


class TestSweepK:
    def test_shared_seed_worlds(self):
        from ccvo.sim import make_scenario
        # identical seeds: world randomization must be identical per seed
        _, w1 = make_scenario("cross", 5)
        _, w2 = make_scenario("cross", 5)
        assert w1 == w2

    def test_one_report_per_k(self):
        settings = small_settings()
        reports = sweep_k("empty", [0.5, 1.0], settings, 2, base_seed=0)
        assert [r.k for r in reports] == [0.5, 1.0]
        assert all(r.runs == 2 for r in reports)
        # seeds shared across k
        assert [r.seed for r in reports[0].rows] == \
            [r.seed for r in reports[1].rows]

    def test_rejects_bad_ks(self):
        with pytest.raises(ValueError):
            sweep_k("empty", [], small_settings(), 1, 0)
        with pytest.raises(ValueError):
            sweep_k("empty", [-1.0], small_settings(), 1, 0)


class TestVerifyMoments:
    def test_passes_at_scale(self):
        report = verify_moments(n_configs=10, n_samples=1_000_000, seed=1)
        assert report.passed
        assert report.test == "clearance_moments"

    def test_zero_noise_variance(self):
        rng = np.random.default_rng(0)
        f = sample_f(rng, (1.0, 0.0), 0.0, 0.5, 1000)
        assert float(f.var()) == 0.0

    def test_doubling_noise_increases_variance(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = float(rng.uniform(0.2, 2.0))
            s = float(rng.uniform(0.05, 0.4))
            f1 = sample_f(rng, (m, 0.0), s, 0.5, 200_000)
            f2 = sample_f(rng, (m, 0.0), s * math.sqrt(2), 0.5, 200_000)
            assert f2.var() > f1.var()

    def test_analytic_moments_reference_value(self):
        # mu=(1,0), s^2=0.0125: mean = 1 + 0.025 = 1.025 (r_sum = 0)
        mu_f, _ = analytic_f_moments((1.0, 0.0), math.sqrt(0.0125), 1e-12)
        assert mu_f == pytest.approx(1.025, abs=1e-6)

    def test_rejects_small_sample_counts(self):
        with pytest.raises(ValueError):
            verify_moments(n_configs=1, n_samples=10_000)


class TestVerifyTailBound:
    def test_bound_values(self):
        # violation bounds 1/(1+k^2): 0.5 at k=1, 0.2 at k=2
        report = verify_tail_bound([1.0, 2.0], n_configs=40, n_samples=100_000,
                               seed=0)
        assert report.passed
        assert report.analytic[0] == pytest.approx(0.5)
        assert report.analytic[1] == pytest.approx(0.2)
        assert all(e <= a + 3 * se for a, e, se in
                   zip(report.analytic, report.empirical,
                       report.standard_errors))

    def test_boundary_configs_satisfy_premise(self):
        rng = np.random.default_rng(5)
        for k in (0.1, 0.7, 1.0, 2.0):
            for mu, s, r_sum in boundary_feasible_configs(rng, k, 30):
                mu_f, sigma_f = analytic_f_moments(mu, s, r_sum)
                assert mu_f - k * sigma_f > 0

    def test_deterministic_configs_never_violate(self):
        rng = np.random.default_rng(1)
        f = sample_f(rng, (2.0, 0.0), 0.0, 0.5, 10_000)
        assert float((f <= 0).mean()) == 0.0


class TestSettingsFile:
    def test_load_and_override(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text(yaml.safe_dump({
            "planner": {"k": 2.0, "n_tau": 12},
            "limits": {"v_max": 0.4},
            "sensors": {"position_sigma": {"form": "affine",
                                           "params": [0.01, 0.005]},
                        "lidar_range": 6.0},
            "scenario": {"n_pedestrians": 3},
        }))
        settings = load_settings(path)
        assert settings.planner.k == 2.0
        assert settings.planner.n_tau == 12
        assert settings.limits.v_max == 0.4
        assert settings.sensors.position_sigma.params == (0.01, 0.005)
        assert settings.sensors.lidar_range == 6.0
        assert settings.scenario.n_pedestrians == 3

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"planner": {"kk": 1.0}}))
        with pytest.raises(ConfigError):
            load_settings(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad2.yaml"
        path.write_text(yaml.safe_dump({"plannerz": {}}))
        with pytest.raises(ConfigError):
            load_settings(path)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_settings("/nonexistent/settings.yaml")


class TestCli:
    def test_scenarios_list(self, capsys):
        assert cli_main(["scenarios", "list"]) == 0
        out = capsys.readouterr().out
        for name in ("empty", "static", "dynamic", "cross", "social"):
            assert name in out

    def test_unknown_flag_exits_2(self, capsys):
        assert cli_main(["batch", "--scenario", "empty", "--frobnicate"]) == 2

    def test_unknown_scenario_exits_2(self, capsys):
        assert cli_main(["run", "--scenario", "warehouse"]) == 2

    def test_run_with_trace(self, tmp_path, capsys, monkeypatch):
        import json
        monkeypatch.setenv("CCVO_OUT", str(tmp_path))
        trace = tmp_path / "out.jsonl"
        code = cli_main(["--config", str(self._config(tmp_path)), "run",
                         "--scenario", "empty", "--seed", "3",
                         "--trace", str(trace)])
        assert code == 0
        records = [json.loads(line) for line in trace.read_text().splitlines()]
        assert records[0]["type"] == "meta"
        assert all(r["type"] == "step" for r in records[1:])
        assert len(records) > 10

    def test_batch_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "results"
        code = cli_main(["--config", str(self._config(tmp_path)), "batch",
                         "--scenario", "empty", "--runs", "3", "--seed", "7",
                         "--k", "1", "--out", str(out)])
        assert code == 0
        assert (out / "runs_empty_ccvo_k1.csv").exists()
        assert (out / "aggregate.csv").exists()
        report = read_run_csv(out / "runs_empty_ccvo_k1.csv")
        assert report.runs == 3
        assert [r.seed for r in report.rows] == [7, 8, 9]

    def test_verify_exit_reflects_pass(self, capsys):
        code = cli_main(["verify", "--test", "tail", "--k", "1,2",
                         "--samples", "100000", "--configs", "25"])
        assert code == 0
        out = capsys.readouterr().out
        assert "PASS" in out

    def _config(self, tmp_path):
        path = tmp_path / "small.yaml"
        path.write_text(yaml.safe_dump({
            "scenario": {"n_pedestrians": 2, "n_cross": 2},
        }))
        return path
