"""Figure rendering. Output is SVG by default so reruns diff cleanly."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
# Pin every source of nondeterminism in the SVG backend.
matplotlib.rcParams["svg.hashsalt"] = "ccvo-figures"

import matplotlib.pyplot as plt  # noqa: E402

from .io import (ParseError, read_aggregate_csv, read_run_csv,  # noqa: E402
                 read_trace)

FIGURE_KINDS = ("trajectories", "k_sweep", "comparison")

PLANNER_COLORS = {"ccvo": "#1f77b4", "baseline": "#d62728"}


@dataclass(frozen=True)
class FigureJob:
    kind: str
    inputs: tuple[str, ...]
    output: str
    title: str = ""
    dpi: int = 100

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ParseError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ParseError("at least one input file is required")


def render(job: FigureJob) -> Path:
    """Render one figure; identical inputs produce identical bytes."""
    if job.kind == "trajectories":
        fig = _render_trajectories(job)
    elif job.kind == "k_sweep":
        fig = _render_k_sweep(job)
    else:
        fig = _render_comparison(job)
    out = Path(job.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=_metadata(out), dpi=job.dpi)
    plt.close(fig)
    return out


def _metadata(out: Path):
    if out.suffix == ".svg":
        return {"Date": None}  # drop the embedded timestamp
    if out.suffix == ".png":
        return {"Software": None}
    return None


def _render_trajectories(job: FigureJob):
    traces = [read_trace(p) for p in job.inputs]
    fig, ax = plt.subplots(figsize=(6, 6))
    first = traces[0]
    xmin, ymin, xmax, ymax = first.bounds
    ax.plot([xmin, xmax, xmax, xmin, xmin],
            [ymin, ymin, ymax, ymax, ymin], color="0.3", lw=1.0)
    for obstacle in first.static_obstacles:
        ax.add_patch(plt.Circle(obstacle[:2], obstacle[2], color="0.55"))
    for trace in traces:
        for path in trace.ped_paths:
            xs, ys = zip(*path)
            ax.plot(xs, ys, color="0.7", lw=0.8, zorder=1)
        xs, ys = zip(*trace.robot_path)
        color = PLANNER_COLORS.get(trace.planner, "#2ca02c")
        ax.plot(xs, ys, color=color, lw=1.8, zorder=3,
                label=f"{trace.planner} seed={trace.seed}")
        ax.plot(*trace.start, marker="o", color=color, ms=7, zorder=4)
        ax.plot(*trace.goal, marker="*", color=color, ms=12, zorder=4)
    ax.set_xlim(xmin - 0.5, xmax + 0.5)
    ax.set_ylim(ymin - 0.5, ymax + 0.5)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(job.title or f"{first.scenario} trajectories")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return fig


def _render_k_sweep(job: FigureJob):
    rows = []
    for path in job.inputs:
        rows.extend(read_aggregate_csv(path))
    if len({(r.scenario, r.planner) for r in rows}) > 1:
        pairs = sorted({(r.scenario, r.planner) for r in rows})
        raise ParseError(f"k-sweep input mixes {pairs}; filter it first")
    rows.sort(key=lambda r: r.k)
    ks = [r.k for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, [100 * r.success_rate for r in rows], "o-",
            color="#1f77b4", label="success rate")
    ax.set_xlabel("confidence parameter k")
    ax.set_ylabel("success rate [%]", color="#1f77b4")
    ax.set_ylim(0, 105)
    twin = ax.twinx()
    twin.plot(ks, [r.mean_time_s for r in rows], "s--", color="#d62728",
              label="mean time")
    twin.set_ylabel("mean navigation time [s]", color="#d62728")
    ax.set_title(job.title or f"{rows[0].scenario}: success and time vs k")
    fig.tight_layout()
    return fig


def _render_comparison(job: FigureJob):
    rows = []
    for path in job.inputs:
        rows.extend(read_aggregate_csv(path))
    scenarios = sorted({r.scenario for r in rows})
    planners = sorted({r.planner for r in rows})
    width = 0.8 / len(planners)
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for j, planner in enumerate(planners):
        xs, ys = [], []
        for i, scenario in enumerate(scenarios):
            match = [r for r in rows
                     if r.scenario == scenario and r.planner == planner]
            if match:
                xs.append(i + (j - (len(planners) - 1) / 2) * width)
                ys.append(100 * match[0].success_rate)
        ax.bar(xs, ys, width=width * 0.9,
               color=PLANNER_COLORS.get(planner, "0.5"), label=planner)
    ax.set_xticks(range(len(scenarios)))
    ax.set_xticklabels(scenarios)
    ax.set_ylabel("success rate [%]")
    ax.set_ylim(0, 105)
    ax.legend()
    ax.set_title(job.title or "planner comparison")
    fig.tight_layout()
    return fig
