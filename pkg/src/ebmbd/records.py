"""Run-record and CSV artifact handling.

A run record holds everything deterministic about one seeded solve: the
resolved config echo, the final trajectory and its summaries, and the
per-step liveliness stats.  Wall times live in sidecar CSVs so that records
for the same (seed, config) are bitwise identical regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Any

import numpy as np

from .diffusion import IterationStats
from .problems import ObstacleWorld2D, Trajectory, world_to_dict

RUN_SCHEMA = "ebmbd-run-v1"

# Documented record fields; the schema-stability test checks these.
RECORD_FIELDS = ("schema", "config", "result")
RESULT_FIELDS = (
    "final_cost",
    "final_distance",
    "min_clearance",
    "feasible",
    "trajectory",
    "iterations",
)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats for strict JSON."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def make_run_record(
    config_echo: dict,
    world: ObstacleWorld2D,
    traj: Trajectory,
    stats: list[IterationStats],
    extra_result: dict | None = None,
) -> dict:
    final_distance = float(np.linalg.norm(traj.states[-1] - world.target))
    result = {
        "final_cost": traj.total_cost,
        "final_distance": final_distance,
        "min_clearance": traj.min_clearance,
        "feasible": traj.feasible,
        "trajectory": {
            "actions": traj.actions.tolist(),
            "states": traj.states.tolist(),
        },
        "iterations": [
            {
                "s": st.s,
                "alive_fraction": st.alive_fraction,
                "max_log_density": st.max_log_density,
                "ess": st.ess,
                "dead_batch": st.dead_batch,
            }
            for st in stats
        ],
    }
    if extra_result:
        result.update(extra_result)
    return _jsonable({"schema": RUN_SCHEMA, "config": config_echo, "result": result})


def dump_record(record: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(record, fh, sort_keys=True, indent=1, allow_nan=False)
        fh.write("\n")


def load_record(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def aggregate_records(records: list[dict]) -> dict:
    """Table-style summary recomputed from per-seed records."""
    if not records:
        raise ValueError("no records to aggregate")
    costs = [r["result"]["final_cost"] for r in records]
    dists = [r["result"]["final_distance"] for r in records]
    feas = [1.0 if r["result"]["feasible"] else 0.0 for r in records]
    return {
        "seeds": len(records),
        "mean_cost": float(np.mean(costs)),
        "mean_final_distance": float(np.mean(dists)),
        "feasibility_rate": float(np.mean(feas)),
    }


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], rows[1:]


def mean_violation_rows(stats_per_seed: list[list[IterationStats]]) -> list[list]:
    """Average the per-step violation percentage across seeds.

    Rows: (step index along the pass, diffusion index s, violation %).
    """
    if not stats_per_seed:
        raise ValueError("no stats to average")
    length = len(stats_per_seed[0])
    if any(len(st) != length for st in stats_per_seed):
        raise ValueError("stats traces have mismatched lengths")
    rows = []
    for i in range(length):
        s = stats_per_seed[0][i].s
        pct = float(np.mean([100.0 * (1.0 - st[i].alive_fraction) for st in stats_per_seed]))
        rows.append([i, s, pct])
    return rows


def echo_config(config, world: ObstacleWorld2D, seed: int) -> dict:
    """Deterministic per-seed config echo (no execution-environment fields)."""
    echo = {
        "algo": config.algo,
        "world": world_to_dict(world),
        "beta_start": config.beta_start,
        "beta_end": config.beta_end,
        "steps": config.steps,
        "kappa": config.kappa,
        "c_max": config.c_max,
        "mu": config.mu,
        "mu_policy": config.mu_policy,
        "n_samples": config.n_samples,
        "temperature": config.temperature,
        "seed": seed,
    }
    if config.algo in ("projected-mbd", "dpcc-mbd"):
        echo["projection"] = {
            "max_iters": config.projection_max_iters,
            "tol": config.projection_tol,
        }
    return echo
