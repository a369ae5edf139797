"""Command-line entry point.

Subcommands:
  run        single episode, optionally writing a JSONL trajectory trace
  batch      seeded batch of episodes, CSV outputs
  sweep-k    one batch per k value with shared seeds
  verify     Monte-Carlo checks of the constraint moments and tail bound
  scenarios  list the available scenario names

Exit codes: 0 success, 1 failed verification, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .bench import ConfigError, Settings, load_settings
from .sim import PLANNER_KINDS, SCENARIO_NAMES, run_episode


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccvo",
        description="Chance-constrained velocity-obstacle navigation "
                    "benchmarks")
    parser.add_argument("--config", type=Path, default=None,
                        help="YAML settings file (flags override it)")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a single episode")
    _common_flags(run_p)
    run_p.add_argument("--trace", type=Path, default=None,
                       help="write a JSONL trajectory trace to this path")

    batch_p = sub.add_parser("batch", help="run a seeded batch")
    _common_flags(batch_p)
    batch_p.add_argument("--runs", type=int, default=200)
    batch_p.add_argument("--out", type=Path, default=None,
                         help="output directory (default $CCVO_OUT or "
                              "./results)")
    batch_p.add_argument("--workers", type=int, default=1)

    sweep_p = sub.add_parser("sweep-k", help="batches over several k values")
    _common_flags(sweep_p, with_k=False)
    sweep_p.add_argument("--ks", type=str, default="0.1,0.7,1,2",
                         help="comma-separated k values")
    sweep_p.add_argument("--runs", type=int, default=100)
    sweep_p.add_argument("--out", type=Path, default=None)
    sweep_p.add_argument("--workers", type=int, default=1)

    verify_p = sub.add_parser("verify", help="Monte-Carlo verification")
    verify_p.add_argument("--test", choices=["moments", "tail", "all"],
                          default="all")
    verify_p.add_argument("--k", type=str, default="0.1,0.7,1,2",
                          help="comma-separated k values (tail bound)")
    verify_p.add_argument("--samples", type=int, default=100_000)
    verify_p.add_argument("--configs", type=int, default=50)
    verify_p.add_argument("--seed", type=int, default=0)

    scen_p = sub.add_parser("scenarios", help="scenario utilities")
    scen_p.add_argument("action", choices=["list"])
    return parser


def _common_flags(p: argparse.ArgumentParser, with_k: bool = True) -> None:
    p.add_argument("--scenario", choices=SCENARIO_NAMES, required=True)
    p.add_argument("--planner", choices=PLANNER_KINDS, default="ccvo")
    p.add_argument("--seed", type=int, default=0)
    if with_k:
        p.add_argument("--k", type=float, default=None,
                       help="confidence parameter (overrides config)")


def _settings(args) -> Settings:
    settings = load_settings(args.config) if args.config else Settings()
    if getattr(args, "k", None) is not None:
        settings = replace(settings,
                           planner=replace(settings.planner, k=args.k))
    return settings


def _parse_ks(text: str) -> list[float]:
    try:
        ks = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad k list {text!r}: {exc}") from exc
    if not ks or any(k <= 0 for k in ks):
        raise ConfigError(f"k values must be positive, got {text!r}")
    return ks


def _cmd_run(args) -> int:
    settings = _settings(args)
    trace: list | None = [] if args.trace else None
    episode = run_episode(args.scenario, args.planner, settings.planner,
                          settings.limits, args.seed,
                          params=settings.scenario,
                          sensors=settings.sensors, trace_sink=trace)
    if args.trace:
        args.trace.parent.mkdir(parents=True, exist_ok=True)
        with open(args.trace, "w") as fh:
            for record in trace:
                fh.write(json.dumps(record) + "\n")
    print(f"{args.scenario} seed={args.seed} planner={args.planner}: "
          f"{episode.outcome} length={episode.trajectory_length:.2f}m "
          f"time={episode.navigation_time:.2f}s")
    return 0


def _cmd_batch(args) -> int:
    settings = _settings(args)
    out = args.out if args.out is not None else bench.default_output_dir()
    report = bench.run_batch(args.scenario, args.planner, settings,
                             args.runs, args.seed, out_dir=out,
                             workers=args.workers)
    print(f"{report.scenario} planner={report.planner} k={report.k:g}: "
          f"success={report.success_rate:.1%} over {report.runs} runs, "
          f"mean_length={report.mean_trajectory_length:.2f}m "
          f"mean_time={report.mean_navigation_time:.2f}s")
    return 0


def _cmd_sweep(args) -> int:
    settings = _settings(args)
    ks = _parse_ks(args.ks)
    out = args.out if args.out is not None else bench.default_output_dir()
    reports = bench.sweep_k(args.scenario, ks, settings, args.runs,
                            args.seed, out_dir=out, workers=args.workers,
                            planner_kind=args.planner)
    for report in reports:
        print(f"k={report.k:g}: success={report.success_rate:.1%} "
              f"mean_time={report.mean_navigation_time:.2f}s")
    return 0


def _cmd_verify(args) -> int:
    reports = []
    if args.test in ("moments", "all"):
        reports.append(bench.verify_moments(
            n_configs=args.configs, n_samples=max(args.samples, 1_000_000),
            seed=args.seed))
    if args.test in ("tail", "all"):
        reports.append(bench.verify_tail_bound(
            _parse_ks(args.k), n_configs=args.configs,
            n_samples=args.samples, seed=args.seed))
    ok = True
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        print(f"{status} {report.test} (samples={report.samples})")
        for line in report.details:
            print(f"  {line}")
        ok &= report.passed
    return 0 if ok else 1


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help; pass both through.
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "batch":
            return _cmd_batch(args)
        if args.command == "sweep-k":
            return _cmd_sweep(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "scenarios":
            for name in SCENARIO_NAMES:
                print(name)
            return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
