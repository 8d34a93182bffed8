"""Figure rendering from run-record JSON and liveliness/summary CSVs.

This package consumes only the documented artifact files; it has no access to
solver internals.  Each renderer returns the data it drew so callers can check
the figure against the source files.
"""

from __future__ import annotations

import csv
import glob
import json
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("trajectories", "liveliness", "comparison")


class RenderError(Exception):
    pass


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    input_dir: str
    output_path: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not os.path.isdir(self.input_dir):
            raise RenderError(f"input directory not found: {self.input_dir}")


def _read_csv_rows(path: str, expected_header: list[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RenderError(f"{path}:1: empty CSV")
    if rows[0] != expected_header:
        raise RenderError(f"{path}:1: expected header {expected_header}, got {rows[0]}")
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(expected_header):
            raise RenderError(f"{path}:{lineno}: expected {len(expected_header)} fields, got {len(row)}")
    return rows[1:]


def _float_field(path: str, lineno: int, value: str, name: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise RenderError(f"{path}:{lineno}: bad {name} value {value!r}")


def _load_run_records(input_dir: str) -> list[dict]:
    paths = sorted(glob.glob(os.path.join(input_dir, "**", "runs", "*.json"), recursive=True))
    if not paths:
        raise RenderError(f"no run records under {input_dir} (looked for runs/*.json)")
    records = []
    for path in paths:
        try:
            with open(path) as fh:
                records.append(json.load(fh))
        except json.JSONDecodeError as exc:
            raise RenderError(f"{path}:{exc.lineno}: {exc.msg}")
    return records


def _render_trajectories(spec: PlotSpec) -> dict:
    records = _load_run_records(spec.input_dir)
    world = records[0]["config"]["world"]
    fig, ax = plt.subplots(figsize=(6, 6))
    for cx, cy, r in world["obstacles"]:
        ax.add_patch(plt.Circle((cx, cy), r, color="0.55", alpha=0.8, zorder=1))
    algos = []
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    seen: dict[str, str] = {}
    for record in records:
        algo = record["config"]["algo"]
        if algo not in seen:
            seen[algo] = colors[len(seen) % len(colors)]
        states = np.asarray(record["result"]["trajectory"]["states"])
        feasible = record["result"]["feasible"]
        ax.plot(states[:, 0], states[:, 1], color=seen[algo], zorder=2,
                alpha=0.9 if feasible else 0.45,
                linestyle="-" if feasible else "--")
        algos.append(algo)
    ax.plot(*world["start"], marker="o", color="black", markersize=8, zorder=3)
    ax.plot(*world["target"], marker="*", color="red", markersize=14, zorder=3)
    handles = [plt.Line2D([], [], color=c, label=a) for a, c in seen.items()]
    ax.legend(handles=handles, loc="upper left")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("planned trajectories")
    fig.savefig(spec.output_path, bbox_inches="tight", dpi=130)
    plt.close(fig)
    return {"n_trajectories": len(records), "algorithms": algos}


def _render_liveliness(spec: PlotSpec) -> dict:
    paths = sorted(glob.glob(os.path.join(spec.input_dir, "liveliness_*.csv")))
    if not paths:
        raise RenderError(f"no liveliness_*.csv files in {spec.input_dir}")
    curves: dict[str, list[tuple[float, float]]] = {}
    for path in paths:
        label = os.path.basename(path)[len("liveliness_"):-len(".csv")]
        rows = _read_csv_rows(path, ["step", "s", "violation_pct"])
        pts = []
        for lineno, row in enumerate(rows, start=2):
            step = _float_field(path, lineno, row[0], "step")
            pct = _float_field(path, lineno, row[2], "violation_pct")
            pts.append((step, pct))
        curves[label] = pts
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, pts in curves.items():
        xs, ys = zip(*pts)
        ax.plot(xs, ys, label=f"kappa={label}")
    ax.set_xlabel("diffusion step (reverse pass progress)")
    ax.set_ylabel("constraint violations [%]")
    ax.set_ylim(-2, 102)
    ax.legend()
    ax.set_title("sample liveliness over the reverse pass")
    fig.savefig(spec.output_path, bbox_inches="tight", dpi=130)
    plt.close(fig)
    return {"curves": curves}


def _render_comparison(spec: PlotSpec) -> dict:
    path = os.path.join(spec.input_dir, "comparison.csv")
    if not os.path.exists(path):
        path = os.path.join(spec.input_dir, "summary.csv")
    if not os.path.exists(path):
        raise RenderError(f"no comparison.csv or summary.csv in {spec.input_dir}")
    header_expected = [
        "algorithm", "world", "seeds", "mean_cost", "mean_final_distance",
        "feasibility_rate", "mean_wall_time_s",
    ]
    rows = _read_csv_rows(path, header_expected)
    if not rows:
        raise RenderError(f"{path}:2: no data rows")
    algorithms = [row[0] for row in rows]
    mean_costs = [
        _float_field(path, lineno, row[3], "mean_cost")
        for lineno, row in enumerate(rows, start=2)
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(algorithms, mean_costs, color="tab:blue")
    for i, cost in enumerate(mean_costs):
        ax.text(i, cost, f"{cost:.1f}", ha="center", va="bottom")
    ax.set_ylabel("mean trajectory cost")
    ax.set_title("algorithm comparison")
    fig.savefig(spec.output_path, bbox_inches="tight", dpi=130)
    plt.close(fig)
    return {"algorithms": algorithms, "mean_costs": mean_costs, "source": path}


def render(spec: PlotSpec) -> dict:
    """Render one figure; returns the plotted data for verification."""
    out_dir = os.path.dirname(spec.output_path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    if spec.kind == "trajectories":
        return _render_trajectories(spec)
    if spec.kind == "liveliness":
        return _render_liveliness(spec)
    return _render_comparison(spec)
