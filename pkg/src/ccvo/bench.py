"""Batch benchmarks, k sweeps, Monte-Carlo verification, file outputs.

File schemas (consumed by the figures tooling, keep in sync with README):

  per-run CSV header:    scenario,planner,k,seed,outcome,length_m,time_s
  aggregate CSV header:  scenario,planner,k,runs,successes,success_rate,
                         mean_length_m,mean_time_s
  trajectory trace:      JSON lines; one "meta" record then one "step"
                         record per control period with keys
                         time,x,y,heading,chosen_vx,chosen_vy,
                         feasible_count,status,peds.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .geometry import PinholeCamera
from .perception import SigmaModel
from .planner import KinematicLimits, PlannerConfig
from .sim import (EpisodeResult, ScenarioParams, SensorSuite, run_episode)

RUN_CSV_HEADER = ["scenario", "planner", "k", "seed", "outcome",
                  "length_m", "time_s"]
AGGREGATE_CSV_HEADER = ["scenario", "planner", "k", "runs", "successes",
                        "success_rate", "mean_length_m", "mean_time_s"]

OUTPUT_DIR_ENV = "CCVO_OUT"


class ConfigError(Exception):
    """Raised for malformed configuration files or CLI settings."""


@dataclass(frozen=True)
class RunRow:
    scenario: str
    planner: str
    k: float
    seed: int
    outcome: str
    length_m: float
    time_s: float


@dataclass(frozen=True)
class BatchReport:
    scenario: str
    planner: str
    k: float
    runs: int
    success_rate: float
    mean_trajectory_length: float  # over success episodes only
    mean_navigation_time: float    # over success episodes only
    rows: tuple[RunRow, ...]

    @property
    def successes(self) -> int:
        return sum(1 for r in self.rows if r.outcome == "success")


@dataclass(frozen=True)
class VerificationReport:
    test: str
    samples: int
    analytic: tuple[float, ...]
    empirical: tuple[float, ...]
    standard_errors: tuple[float, ...]
    passed: bool
    details: tuple[str, ...] = ()


@dataclass(frozen=True)
class Settings:
    """Everything a benchmark run needs; loadable from a YAML file."""

    planner: PlannerConfig = field(default_factory=PlannerConfig)
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    sensors: SensorSuite = field(default_factory=SensorSuite)
    scenario: ScenarioParams = field(default_factory=ScenarioParams)


def load_settings(path: str | Path) -> Settings:
    """Read a YAML settings file; unknown keys are configuration errors."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read settings file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"settings root must be a mapping in {path}")

    def build(cls, section, **extra):
        data = raw.get(section, {})
        if not isinstance(data, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        allowed = set(cls.__dataclass_fields__)
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(
                f"unknown keys in section {section!r}: {sorted(unknown)}")
        coerced = {key: _coerce(value) for key, value in data.items()}
        try:
            return cls(**coerced, **extra)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid section {section!r}: {exc}") from exc

    sensor_raw = raw.get("sensors", {})
    if not isinstance(sensor_raw, dict):
        raise ConfigError("section 'sensors' must be a mapping")
    sigma_p = _sigma_from(sensor_raw.pop("position_sigma", None))
    sigma_v = _sigma_from(sensor_raw.pop("velocity_sigma", None))
    camera_raw = sensor_raw.pop("camera", None)
    sensor_extra = {}
    if sigma_p is not None:
        sensor_extra["position_sigma"] = sigma_p
    if sigma_v is not None:
        sensor_extra["velocity_sigma"] = sigma_v
    if camera_raw is not None:
        try:
            sensor_extra["camera"] = PinholeCamera(**camera_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid camera section: {exc}") from exc
    known = {"planner", "limits", "sensors", "scenario"}
    unknown_sections = set(raw) - known
    if unknown_sections:
        raise ConfigError(f"unknown sections: {sorted(unknown_sections)}")
    return Settings(
        planner=build(PlannerConfig, "planner"),
        limits=build(KinematicLimits, "limits"),
        sensors=build(SensorSuite, "sensors", **sensor_extra),
        scenario=build(ScenarioParams, "scenario"),
    )


def _sigma_from(data) -> Optional[SigmaModel]:
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError("sigma model must be a mapping")
    try:
        return SigmaModel(form=data["form"],
                          params=tuple(float(p) for p in data["params"]),
                          floor=float(data.get("floor", 1e-3)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sigma model {data}: {exc}") from exc


def _coerce(value):
    if isinstance(value, list):
        return tuple(value)
    return value


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "results"))


# ---------------------------------------------------------------------------
# Batch runs
# ---------------------------------------------------------------------------

def _run_one(args) -> RunRow:
    scenario, planner_kind, settings, seed = args
    episode = run_episode(scenario, planner_kind, settings.planner,
                          settings.limits, seed, params=settings.scenario,
                          sensors=settings.sensors)
    return RunRow(scenario, planner_kind, settings.planner.k, seed,
                  episode.outcome, episode.trajectory_length,
                  episode.navigation_time)


def run_batch(scenario: str, planner_kind: str, settings: Settings,
              n_runs: int, base_seed: int, out_dir: Optional[Path] = None,
              workers: int = 1) -> BatchReport:
    """Run n_runs seeded episodes and aggregate the benchmark metrics.

    Means are computed over success episodes only (lengths and times of
    failed runs are not comparable). Reports are sorted by seed, so the
    result does not depend on worker scheduling.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    jobs = [(scenario, planner_kind, settings, base_seed + i)
            for i in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, jobs, chunksize=4))
    else:
        rows = [_run_one(job) for job in jobs]
    rows.sort(key=lambda r: r.seed)
    report = _aggregate(scenario, planner_kind, settings.planner.k, rows)
    if out_dir is not None:
        write_run_csv(report, Path(out_dir))
        write_aggregate_csv([report], Path(out_dir))
    return report


def _aggregate(scenario: str, planner: str, k: float,
               rows: list[RunRow]) -> BatchReport:
    succ = [r for r in rows if r.outcome == "success"]
    rate = len(succ) / len(rows)
    mean_len = sum(r.length_m for r in succ) / len(succ) if succ else math.nan
    mean_time = sum(r.time_s for r in succ) / len(succ) if succ else math.nan
    return BatchReport(scenario, planner, k, len(rows), rate, mean_len,
                       mean_time, tuple(rows))


def sweep_k(scenario: str, ks: list[float], settings: Settings, n_runs: int,
            base_seed: int, out_dir: Optional[Path] = None,
            workers: int = 1, planner_kind: str = "ccvo",
            ) -> list[BatchReport]:
    """One batch per k, all sharing the same seed block."""
    if not ks or any(k <= 0 for k in ks):
        raise ValueError("ks must be non-empty and positive")
    reports = []
    for k in ks:
        tuned = replace(settings, planner=replace(settings.planner, k=k))
        reports.append(run_batch(scenario, planner_kind, tuned, n_runs,
                                 base_seed, workers=workers))
    if out_dir is not None:
        out = Path(out_dir)
        for report in reports:
            write_run_csv(report, out)
        write_aggregate_csv(reports, out)
    return reports


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _float_repr(x: float) -> str:
    return repr(float(x))


def write_run_csv(report: BatchReport, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / (f"runs_{report.scenario}_{report.planner}"
                      f"_k{report.k:g}.csv")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RUN_CSV_HEADER)
            for r in report.rows:
                writer.writerow([r.scenario, r.planner, _float_repr(r.k),
                                 r.seed, r.outcome, _float_repr(r.length_m),
                                 _float_repr(r.time_s)])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    return path


def read_run_csv(path: Path) -> BatchReport:
    """Parse a per-run CSV back into a report (exact round trip)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RUN_CSV_HEADER:
            raise ConfigError(f"unexpected header in {path}: {header}")
        rows = [RunRow(s, p, float(k), int(seed), outcome,
                       float(length), float(time_s))
                for s, p, k, seed, outcome, length, time_s in reader]
    if not rows:
        raise ConfigError(f"no rows in {path}")
    return _aggregate(rows[0].scenario, rows[0].planner, rows[0].k, rows)


def write_aggregate_csv(reports: list[BatchReport], out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "aggregate.csv"
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(AGGREGATE_CSV_HEADER)
            for r in sorted(reports, key=lambda r: (r.scenario, r.planner,
                                                    r.k)):
                writer.writerow([r.scenario, r.planner, _float_repr(r.k),
                                 r.runs, r.successes,
                                 _float_repr(r.success_rate),
                                 _float_repr(r.mean_trajectory_length),
                                 _float_repr(r.mean_navigation_time)])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    return path


# ---------------------------------------------------------------------------
# Monte-Carlo verification of the constraint moments and the tail bound
# ---------------------------------------------------------------------------

def _moments_config_stream(rng, near_zero_mean: bool = False):
    """Random (mu_rel, s, r_sum) with |mu_f| bounded away from zero."""
    while True:
        m = float(rng.uniform(0.0 if near_zero_mean else 0.3, 3.0))
        angle = float(rng.uniform(-math.pi, math.pi))
        mu = (m * math.cos(angle), m * math.sin(angle))
        s = float(rng.uniform(0.05, 0.5))
        r_sum = float(rng.uniform(0.3, 1.0))
        mu_f = m * m + 2 * s * s - r_sum * r_sum
        if abs(mu_f) < 0.05:
            continue
        yield mu, s, r_sum


def sample_f(rng, mu, s, r_sum, n_samples: int) -> np.ndarray:
    """Draw f = ||d_rel||^2 - r_sum^2 with d_rel ~ N(mu, s^2 I)."""
    xs = rng.standard_normal(n_samples) * s + mu[0]
    ys = rng.standard_normal(n_samples) * s + mu[1]
    return xs * xs + ys * ys - r_sum * r_sum


def analytic_f_moments(mu, s, r_sum) -> tuple[float, float]:
    m_sq = mu[0] ** 2 + mu[1] ** 2
    mu_f = m_sq + 2 * s * s - r_sum * r_sum
    sigma_f = 2.0 * math.sqrt(s * s * m_sq + s ** 4)
    return mu_f, sigma_f


def verify_moments(n_configs: int = 50, n_samples: int = 1_000_000,
                    seed: int = 0) -> VerificationReport:
    """Check the analytic clearance moments against brute-force sampling.

    For each random configuration the sample mean and standard deviation
    of f must match the analytic values within 1% relative (or within 5
    Monte-Carlo standard errors where those are larger), and doubling the
    noise variance must strictly increase the sample variance.
    """
    if n_samples < 100_000:
        raise ValueError("need at least 1e5 samples")
    rng = np.random.default_rng(seed)
    stream = _moments_config_stream(rng)
    analytic, empirical, stderrs, details = [], [], [], []
    passed = True
    for index in range(n_configs):
        mu, s, r_sum = next(stream)
        f = sample_f(rng, mu, s, r_sum, n_samples)
        mu_ana, sigma_ana = analytic_f_moments(mu, s, r_sum)
        mu_emp = float(f.mean())
        sigma_emp = float(f.std(ddof=1))
        se_mean = sigma_emp / math.sqrt(n_samples)
        # SE of the sample std via the kurtosis of f.
        centered = f - mu_emp
        kurt = float((centered ** 4).mean() / sigma_emp ** 4)
        se_std = sigma_emp * math.sqrt(max(kurt - 1.0, 0.0) / (4 * n_samples))

        mean_ok = (abs(mu_emp - mu_ana) <= 0.01 * abs(mu_ana)
                   or abs(mu_emp - mu_ana) <= 5 * se_mean)
        std_ok = (abs(sigma_emp - sigma_ana) <= 0.01 * sigma_ana
                  or abs(sigma_emp - sigma_ana) <= 5 * se_std)

        # Variance monotonicity in the noise scale.
        f_wide = sample_f(rng, mu, s * math.sqrt(2.0), r_sum, n_samples)
        var_ok = float(f_wide.var()) > float(f.var())

        analytic.extend([mu_ana, sigma_ana])
        empirical.extend([mu_emp, sigma_emp])
        stderrs.extend([se_mean, se_std])
        if not (mean_ok and std_ok and var_ok):
            passed = False
            details.append(
                f"config {index}: mu=({mu[0]:.3f},{mu[1]:.3f}) s={s:.3f} "
                f"r={r_sum:.3f} mean_ok={mean_ok} std_ok={std_ok} "
                f"var_ok={var_ok}")
    return VerificationReport("clearance_moments", n_samples,
                              tuple(analytic), tuple(empirical),
                              tuple(stderrs), passed, tuple(details))


def boundary_feasible_configs(rng, k: float, n_configs: int):
    """Configurations satisfying mu_f - k*sigma_f > 0, near-boundary mixed in.

    Every third configuration sits within 0.01*sigma_f of the boundary.
    """
    configs = []
    while len(configs) < n_configs:
        m = float(rng.uniform(0.5, 3.0))
        s = float(rng.uniform(0.02, 0.3))
        mu_norm = m * m + 2 * s * s
        sigma_f = 2.0 * math.sqrt(s * s * m * m + s ** 4)
        if len(configs) % 3 == 0:
            margin = float(rng.uniform(1e-4, 0.01)) * sigma_f
        else:
            margin = float(rng.uniform(0.01, 1.0)) * sigma_f
        r_sq = mu_norm - k * sigma_f - margin
        if r_sq <= 1e-6:
            continue
        angle = float(rng.uniform(-math.pi, math.pi))
        configs.append(((m * math.cos(angle), m * math.sin(angle)), s,
                        math.sqrt(r_sq)))
    return configs


def verify_tail_bound(ks: list[float], n_configs: int = 200,
                  n_samples: int = 100_000, seed: int = 0,
                  ) -> VerificationReport:
    """Check the Cantelli violation bound empirically.

    For every configuration with mu_f - k*sigma_f > 0, the empirical
    violation probability P(f <= 0) must not exceed 1/(1+k^2) by more than
    3 binomial standard errors.
    """
    if n_samples < 100_000:
        raise ValueError("need at least 1e5 samples")
    rng = np.random.default_rng(seed)
    analytic, empirical, stderrs, details = [], [], [], []
    passed = True
    for k in ks:
        if k <= 0:
            raise ValueError("k values must be positive")
        bound = 1.0 / (1.0 + k * k)
        worst = 0.0
        for mu, s, r_sum in boundary_feasible_configs(rng, k, n_configs):
            f = sample_f(rng, mu, s, r_sum, n_samples)
            p_hat = float((f <= 0.0).mean())
            se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / n_samples)
            worst = max(worst, p_hat - 3 * se)
            if p_hat > bound + 3 * se:
                passed = False
                details.append(f"k={k}: p_hat={p_hat:.5f} exceeds "
                               f"bound={bound:.5f} (se={se:.2e})")
        analytic.append(bound)
        empirical.append(worst)
        stderrs.append(math.sqrt(bound * (1 - bound) / n_samples))
    return VerificationReport("cantelli_tail_bound", n_samples, tuple(analytic),
                              tuple(empirical), tuple(stderrs), passed,
                              tuple(details))
