"""Experiment harness: seeded runs, algorithm comparisons, kappa sweeps, and
bound validation, all emitting CSV/JSON artifacts.

Exit codes: 0 on completed runs (infeasible trajectories are data, not
failures), 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import analysis
from .diffusion import MODE_EBMBD, MODE_MBD, SolverConfig, solve_trajectory
from .problems import (
    DEFAULT_HORIZON,
    DEFAULT_TEMPERATURE,
    ObstacleWorld2D,
    load_world,
    make_canonical_world,
    world_from_dict,
    world_to_dict,
)
from .projection import ProjectionConfig, dpcc_mbd_solve, projected_mbd_solve
from .records import (
    aggregate_records,
    dump_record,
    echo_config,
    load_record,
    make_run_record,
    mean_violation_rows,
    read_csv,
    write_csv,
)
from .schedules import make_barrier_schedule, make_noise_schedule

ALGOS = ("mbd", "ebmbd", "projected-mbd", "dpcc-mbd")
PRESETS = ("easy", "hard")

SUMMARY_HEADER = [
    "algorithm", "world", "seeds", "mean_cost", "mean_final_distance",
    "feasibility_rate", "mean_wall_time_s",
]
LIVELINESS_HEADER = ["step", "s", "violation_pct"]
BOUNDS_HEADER = ["kind", "id", "bound", "estimate", "stderr", "passed"]


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved parameters of one experiment batch."""

    world: str | dict = "hard"
    algo: str = "ebmbd"
    beta_start: float = 1e-4
    beta_end: float = 0.02
    steps: int = 100
    kappa: float = 1.0
    c_max: float = 0.7
    mu: float = 1000.0
    mu_policy: str = "constant"
    n_samples: int = 128
    temperature: float = DEFAULT_TEMPERATURE
    horizon: int = DEFAULT_HORIZON
    seed: int = 0
    seeds: int = 1
    out: str = "out"
    workers: int = 1
    projection_max_iters: int = 120
    projection_tol: float = 1e-3

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.seeds < 1:
            raise ConfigError(f"seeds must be >= 1, got {self.seeds}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


def load_config(path: str, overrides: dict | None = None) -> RunConfig:
    """Parse a JSON config file; parse errors surface with line numbers."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1:1: top-level config must be an object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown config fields: {', '.join(unknown)}")
    if overrides:
        data.update(overrides)
    try:
        return RunConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}")


def resolve_world(spec: str | dict, horizon: int) -> tuple[ObstacleWorld2D, str]:
    """Turn a preset name, file path, or inline layout into a world."""
    if isinstance(spec, dict):
        return world_from_dict(spec), "inline"
    if spec in PRESETS:
        return make_canonical_world(spec, horizon=horizon), spec
    if not os.path.exists(spec):
        raise ConfigError(f"world file not found: {spec}")
    try:
        return load_world(spec), spec
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad world file {spec}: {exc}")


def build_solver_config(config: RunConfig, seed: int, mode: str) -> SolverConfig:
    noise = make_noise_schedule(config.beta_start, config.beta_end, config.steps)
    barrier = make_barrier_schedule(
        config.kappa, config.c_max, config.mu, config.steps, config.mu_policy
    )
    return SolverConfig(
        n_samples=config.n_samples, seed=seed, mode=mode, noise=noise, barrier=barrier
    )


def run_single(config: RunConfig, seed: int) -> tuple[dict, float]:
    """One seeded solve; returns (run record, wall time)."""
    world, _ = resolve_world(config.world, config.horizon)
    extra = None
    if config.algo in (MODE_MBD, MODE_EBMBD):
        cfg = build_solver_config(config, seed, config.algo)
        traj, stats, wall = solve_trajectory(world, cfg, config.temperature)
    else:
        cfg = build_solver_config(config, seed, MODE_MBD)
        proj_cfg = ProjectionConfig(
            max_iters=config.projection_max_iters, tol=config.projection_tol
        )
        solver = projected_mbd_solve if config.algo == "projected-mbd" else dpcc_mbd_solve
        traj, stats, wall, pstats = solver(world, cfg, proj_cfg, config.temperature)
        extra = {
            "projection_iters_total": pstats.iters_total,
            "projections_failed": pstats.failed,
        }
    record = make_run_record(echo_config(config, world, seed), world, traj, stats, extra)
    return record, wall


def _run_task(config: RunConfig, seed: int) -> tuple[int, dict, float]:
    record, wall = run_single(config, seed)
    return seed, record, wall


def run(config: RunConfig) -> dict:
    """Run a seed batch, write artifacts, and return the summary row."""
    world, world_name = resolve_world(config.world, config.horizon)
    seeds = [config.seed + i for i in range(config.seeds)]
    out = config.out
    runs_dir = os.path.join(out, "runs")
    os.makedirs(runs_dir, exist_ok=True)

    if config.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_task, [config] * len(seeds), seeds))
    else:
        results = [_run_task(config, seed) for seed in seeds]
    results.sort(key=lambda item: item[0])

    walls = {}
    for seed, record, wall in results:
        dump_record(record, os.path.join(runs_dir, f"{seed}.json"))
        walls[seed] = wall

    records = [load_record(os.path.join(runs_dir, f"{seed}.json")) for seed in seeds]
    agg = aggregate_records(records)
    mean_wall = float(np.mean([walls[s] for s in seeds]))
    summary = {
        "algorithm": config.algo,
        "world": world_name,
        **agg,
        "mean_wall_time_s": mean_wall,
    }
    write_csv(
        os.path.join(out, "summary.csv"),
        SUMMARY_HEADER,
        [[summary[k] for k in SUMMARY_HEADER]],
    )
    write_csv(
        os.path.join(out, "timings.csv"),
        ["seed", "wall_time_s"],
        [[s, walls[s]] for s in seeds],
    )
    stats_rows = mean_violation_rows(
        [
            [_IterationView(**it) for it in rec["result"]["iterations"]]
            for rec in records
        ]
    )
    write_csv(os.path.join(out, f"liveliness_{config.kappa:g}.csv"), LIVELINESS_HEADER, stats_rows)
    return summary


class _IterationView:
    """Dict-backed stand-in for IterationStats when re-reading records."""

    def __init__(self, s, alive_fraction, max_log_density, ess, dead_batch):
        self.s = s
        self.alive_fraction = alive_fraction
        self.max_log_density = max_log_density
        self.ess = ess
        self.dead_batch = dead_batch


def compare(configs: list[RunConfig]) -> list[dict]:
    """Run several algorithms on one world and tabulate the summaries."""
    if not configs:
        raise ConfigError("compare needs at least one config")
    world_dicts = []
    for config in configs:
        world, _ = resolve_world(config.world, config.horizon)
        world_dicts.append(world_to_dict(world))
    if any(wd != world_dicts[0] for wd in world_dicts[1:]):
        raise ConfigError("compare configs must share the same world")

    summaries = []
    for config in configs:
        sub = replace(config, out=os.path.join(config.out, config.algo))
        summaries.append(run(sub))
    out = configs[0].out
    write_csv(
        os.path.join(out, "comparison.csv"),
        SUMMARY_HEADER,
        [[s[k] for k in SUMMARY_HEADER] for s in summaries],
    )
    return summaries


def format_comparison(summaries: list[dict]) -> str:
    lines = [
        f"{'algorithm':<14} {'mean cost':>10} {'mean dist':>10} {'feasible %':>11} {'runtime s':>10}"
    ]
    for s in summaries:
        lines.append(
            f"{s['algorithm']:<14} {s['mean_cost']:>10.2f} {s['mean_final_distance']:>10.4f} "
            f"{100.0 * s['feasibility_rate']:>11.1f} {s['mean_wall_time_s']:>10.4f}"
        )
    return "\n".join(lines)


def sweep_kappa(config: RunConfig, kappas: list[float]) -> list[str]:
    """Run the batch once per kappa; emit one liveliness CSV per kappa."""
    if not kappas:
        raise ConfigError("sweep-kappa needs at least one kappa")
    paths = []
    for kappa in kappas:
        sub = replace(config, kappa=kappa, out=os.path.join(config.out, f"kappa_{kappa:g}"))
        run(sub)
        src = os.path.join(sub.out, f"liveliness_{kappa:g}.csv")
        dst = os.path.join(config.out, f"liveliness_{kappa:g}.csv")
        header, rows = read_csv(src)
        write_csv(dst, header, rows)
        paths.append(dst)
    return paths


def validate_bounds(
    out_dir: str,
    scenarios_path: str | None = None,
    n_draws_bound: int = 100_000,
    n_draws_halfspace: int = 1_000_000,
) -> list[dict]:
    """Run the bound validation suite and write bounds.csv."""
    if scenarios_path is None:
        rows = analysis.default_scenarios()
    else:
        rows = read_scenarios(scenarios_path)
    results = analysis.validate_scenarios(rows, n_draws_bound, n_draws_halfspace)
    os.makedirs(out_dir, exist_ok=True)
    write_csv(
        os.path.join(out_dir, "bounds.csv"),
        BOUNDS_HEADER,
        [[r[k] for k in BOUNDS_HEADER] for r in results],
    )
    return results


def write_scenarios(rows: list[dict], path: str) -> None:
    write_csv(path, analysis.SCENARIO_COLUMNS, [[row[k] for k in analysis.SCENARIO_COLUMNS] for row in rows])


def read_scenarios(path: str) -> list[dict]:
    header, rows = read_csv(path)
    if header != analysis.SCENARIO_COLUMNS:
        raise ConfigError(f"{path}:1: expected scenario columns {analysis.SCENARIO_COLUMNS}")
    out = []
    for i, row in enumerate(rows, start=2):
        try:
            rec = dict(zip(header, row))
            for key in ("id", "dim", "vec_seed"):
                rec[key] = int(rec[key])
            for key in ("c_s", "c_next", "sigma_s", "alpha_bar_prev", "mu_next", "M_J"):
                rec[key] = float(rec[key])
        except ValueError as exc:
            raise ConfigError(f"{path}:{i}: {exc}")
        out.append(rec)
    return out


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--preset", choices=PRESETS, help="named world preset")
    parser.add_argument("--world", help="world JSON file")
    parser.add_argument("--algo", choices=ALGOS)
    parser.add_argument("--seeds", type=int, help="number of seeds in the batch")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--n-samples", type=int)
    parser.add_argument("--kappa", type=float)
    parser.add_argument("--c-max", type=float)
    parser.add_argument("--mu", type=float)


def _resolve(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for key in ("algo", "seeds", "seed", "out", "workers", "steps", "kappa", "mu"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "n_samples", None) is not None:
        overrides["n_samples"] = args.n_samples
    if getattr(args, "c_max", None) is not None:
        overrides["c_max"] = args.c_max
    if getattr(args, "preset", None):
        overrides["world"] = args.preset
    elif getattr(args, "world", None):
        overrides["world"] = args.world
    if args.config:
        return load_config(args.config, overrides)
    try:
        return RunConfig(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ebmbd",
        description="Sampling-based constrained trajectory optimization experiments.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one algorithm over a seed batch")
    _add_common(p_run)

    p_cmp = sub.add_parser("compare", help="run several algorithms on one world")
    _add_common(p_cmp)
    p_cmp.add_argument(
        "--algos", default="mbd,ebmbd",
        help="comma-separated algorithms (default: mbd,ebmbd)",
    )

    p_sweep = sub.add_parser("sweep-kappa", help="liveliness traces over kappa values")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--kappas", default="0.5,1,2,4", help="comma-separated kappa values"
    )

    p_val = sub.add_parser("validate-bounds", help="Monte Carlo bound validation")
    p_val.add_argument("--out", default="out")
    p_val.add_argument("--scenarios", help="scenario table CSV (default: built-in)")
    p_val.add_argument("--write-scenarios", help="write the default scenario table here and exit")
    p_val.add_argument("--draws-bound", type=int, default=100_000)
    p_val.add_argument("--draws-halfspace", type=int, default=1_000_000)

    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            config = _resolve(args)
            summary = run(config)
            print(format_comparison([summary]))
        elif args.verb == "compare":
            base = _resolve(args)
            algos = [a.strip() for a in args.algos.split(",") if a.strip()]
            summaries = compare([replace(base, algo=a) for a in algos])
            print(format_comparison(summaries))
        elif args.verb == "sweep-kappa":
            config = _resolve(args)
            kappas = [float(k) for k in args.kappas.split(",") if k.strip()]
            for path in sweep_kappa(config, kappas):
                print(f"wrote {path}")
        elif args.verb == "validate-bounds":
            if args.write_scenarios:
                write_scenarios(analysis.default_scenarios(), args.write_scenarios)
                print(f"wrote {args.write_scenarios}")
                return 0
            results = validate_bounds(
                args.out, args.scenarios, args.draws_bound, args.draws_halfspace
            )
            failed = [r for r in results if not r["passed"]]
            print(f"bounds checked: {len(results)}, failed: {len(failed)}")
            for r in failed:
                print(f"  FAIL {r['kind']}#{r['id']}: bound={r['bound']:.6f} mc={r['estimate']:.6f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
