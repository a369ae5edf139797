"""Readers for the benchmark file formats.

The producing side documents three formats; the constants below pin the
exact schema this tool understands. Anything it reads but does not plot
must appear in the ignored lists, so schema drift fails loudly instead of
silently dropping columns.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

RUN_CSV_FIELDS = ("scenario", "planner", "k", "seed", "outcome",
                  "length_m", "time_s")
RUN_CSV_CONSUMED = ("scenario", "planner", "k", "seed", "outcome",
                    "length_m", "time_s")
RUN_CSV_IGNORED: tuple[str, ...] = ()

AGGREGATE_CSV_FIELDS = ("scenario", "planner", "k", "runs", "successes",
                        "success_rate", "mean_length_m", "mean_time_s")
AGGREGATE_CSV_CONSUMED = ("scenario", "planner", "k", "success_rate",
                          "mean_time_s")
AGGREGATE_CSV_IGNORED = ("runs", "successes", "mean_length_m")

TRACE_META_FIELDS = ("type", "scenario", "planner", "k", "seed", "bounds",
                     "start", "goal", "goal_tolerance", "robot_radius",
                     "static_obstacles")
TRACE_META_CONSUMED = ("type", "scenario", "planner", "k", "seed", "bounds",
                       "start", "goal", "static_obstacles", "robot_radius")
TRACE_META_IGNORED = ("goal_tolerance",)

TRACE_STEP_FIELDS = ("type", "time", "x", "y", "heading", "chosen_vx",
                     "chosen_vy", "feasible_count", "status", "peds")
TRACE_STEP_CONSUMED = ("type", "time", "x", "y", "peds")
TRACE_STEP_IGNORED = ("heading", "chosen_vx", "chosen_vy", "feasible_count",
                      "status")


class ParseError(Exception):
    """Raised when an input file does not match the documented schema."""


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
class AggregateRow:
    scenario: str
    planner: str
    k: float
    success_rate: float
    mean_time_s: float


@dataclass(frozen=True)
class Trace:
    scenario: str
    planner: str
    k: float
    seed: int
    bounds: tuple[float, float, float, float]
    start: tuple[float, float]
    goal: tuple[float, float]
    robot_radius: float
    static_obstacles: list[tuple[float, float, float]]
    robot_path: list[tuple[float, float]]
    ped_paths: list[list[tuple[float, float]]]


def read_run_csv(path: str | Path) -> list[RunRow]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(RUN_CSV_FIELDS):
            raise ParseError(f"{path}:1: unexpected per-run header {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(RunRow(rec[0], rec[1], float(rec[2]),
                                   int(rec[3]), rec[4], float(rec[5]),
                                   float(rec[6])))
            except (IndexError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad row: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def read_aggregate_csv(path: str | Path) -> list[AggregateRow]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(AGGREGATE_CSV_FIELDS):
            raise ParseError(f"{path}:1: unexpected aggregate header "
                             f"{header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(AggregateRow(rec[0], rec[1], float(rec[2]),
                                         float(rec[5]), float(rec[7])))
            except (IndexError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad row: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def read_trace(path: str | Path) -> Trace:
    path = Path(path)
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: bad JSON: {exc}") from exc
    if not records or records[0].get("type") != "meta":
        raise ParseError(f"{path}: first record must be a meta record")
    meta = records[0]
    missing = set(TRACE_META_CONSUMED) - set(meta)
    if missing:
        raise ParseError(f"{path}:1: meta record missing {sorted(missing)}")
    steps = [r for r in records[1:] if r.get("type") == "step"]
    if not steps:
        raise ParseError(f"{path}: no step records")
    for i, rec in enumerate(steps, start=2):
        missing = set(TRACE_STEP_CONSUMED) - set(rec)
        if missing:
            raise ParseError(f"{path}:{i}: step record missing "
                             f"{sorted(missing)}")

    robot_path = [(r["x"], r["y"]) for r in steps]
    n_peds = max((len(r["peds"]) for r in steps), default=0)
    ped_paths: list[list[tuple[float, float]]] = [[] for _ in range(n_peds)]
    for rec in steps:
        for i, ped in enumerate(rec["peds"]):
            ped_paths[i].append((ped[0], ped[1]))
    return Trace(
        scenario=meta["scenario"], planner=meta["planner"],
        k=float(meta["k"]), seed=int(meta["seed"]),
        bounds=tuple(meta["bounds"]), start=tuple(meta["start"]),
        goal=tuple(meta["goal"]), robot_radius=float(meta["robot_radius"]),
        static_obstacles=[tuple(o) for o in meta["static_obstacles"]],
        robot_path=robot_path, ped_paths=ped_paths)
