"""Reverse-diffusion optimizer with Monte Carlo score estimation.

Two weighting modes share one loop: plain MBD multiplies the Boltzmann target
by the feasibility indicator, EB-MBD replaces the indicator with an emerging
log barrier whose offset shrinks to zero across the reverse pass.  All density
arithmetic happens in log space; exp(-J/lambda) underflows for realistic
cost/temperature ratios.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .problems import ObstacleWorld2D, Problem, Trajectory, make_trajectory_problem, rollout
from .schedules import BarrierSchedule, NoiseSchedule

MODE_MBD = "mbd"
MODE_EBMBD = "ebmbd"
MODES = (MODE_MBD, MODE_EBMBD)

# Tag for the stream that draws the initial iterate; step streams use the
# step index itself, which is always < 2**64 - 1.
_INIT_STREAM = np.uint64(2**64 - 1)


@dataclass
class DiffusionState:
    """Current iterate of the reverse pass."""

    x: np.ndarray
    s: int


@dataclass
class IterationStats:
    """Liveliness and weight diagnostics for one reverse step."""

    s: int
    alive_fraction: float
    max_log_density: float
    ess: float
    dead_batch: bool


@dataclass(frozen=True)
class SolverConfig:
    """Everything a solve needs besides the problem itself."""

    n_samples: int
    seed: int
    mode: str
    noise: NoiseSchedule
    barrier: BarrierSchedule

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.barrier.steps != self.noise.steps:
            raise ValueError(
                f"barrier schedule covers {self.barrier.steps} steps, "
                f"noise schedule {self.noise.steps}"
            )

    @property
    def steps(self) -> int:
        return self.noise.steps


def step_rng(seed: int, s: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, step).

    Sample i's values occupy a fixed block of the Philox counter sequence, so
    the draws are a deterministic function of (seed, s, i) no matter how the
    downstream evaluations are parallelized.
    """
    return np.random.Generator(np.random.Philox(key=np.array([seed, s], dtype=np.uint64)))


def init_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, _INIT_STREAM], dtype=np.uint64)))


def barrier_cost(g_value, mu: float, c: float):
    """Log-barrier cost -mu * log(g + c); +inf once g + c <= 0.

    +inf is a valid output meaning zero density (the boundary g + c = 0
    included, since log 0 diverges).
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    if c < 0.0:
        raise ValueError(f"c must be >= 0, got {c}")
    g = np.asarray(g_value, dtype=float)
    arg = g + c
    inside = arg > 0.0
    out = np.where(inside, -mu * np.log(np.where(inside, arg, 1.0)), np.inf)
    return float(out) if out.ndim == 0 else out


def target_log_density(problem: Problem, x: np.ndarray, mu: float, c: float, mode: str):
    """Log of the (unnormalized) target density at x.

    MBD: -J/lambda on the feasible set, -inf elsewhere.
    EB-MBD: -J/lambda - barrier_cost(g, mu, c).
    """
    x = np.asarray(x, dtype=float)
    cost, g = problem.evaluate(x)
    cost = np.asarray(cost, dtype=float)
    g = np.asarray(g, dtype=float)
    boltzmann = -(cost / problem.temperature)
    if mode == MODE_MBD:
        out = np.where(g >= 0.0, boltzmann, -np.inf)
    elif mode == MODE_EBMBD:
        out = boltzmann - barrier_cost(g, mu, c)
    else:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return float(out) if np.ndim(out) == 0 else out


def softmax_weights(log_density: np.ndarray) -> tuple[np.ndarray, bool]:
    """Normalized weights from log densities via log-sum-exp; flags dead batches.

    A dead batch (all densities zero) yields uniform weights so the caller's
    weighted mean degenerates to the plain sample mean.
    """
    log_density = np.asarray(log_density, dtype=float)
    m = np.max(log_density)
    if not np.isfinite(m):
        n = log_density.shape[0]
        return np.full(n, 1.0 / n), True
    shifted = np.exp(log_density - m)
    return shifted / np.sum(shifted), False


def mc_score(
    problem: Problem,
    x_s: np.ndarray,
    s: int,
    cfg: SolverConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, IterationStats]:
    """Monte Carlo estimate of the score of the smoothed target at x_s.

    Draws N proposals from N(x_s / sqrt(alpha_bar_{s-1}), sigma_s^2 I),
    weights them by the step-s target density, and assembles

        score = -x_s / (1 - alpha_bar_s)
                + sqrt(alpha_bar_s) / (1 - alpha_bar_s) * (sum_i w_i xhat_i).
    """
    x_s = np.asarray(x_s, dtype=float)
    noise = cfg.noise
    sqrt_abar_prev = np.sqrt(noise.alpha_bar_prev(s))
    sigma = noise.sigma[s]
    abar = noise.alpha_bar[s]

    z = rng.standard_normal((cfg.n_samples, x_s.shape[0]))
    proposals = x_s / sqrt_abar_prev + sigma * z

    mu = float(cfg.barrier.mu[s])
    c = float(cfg.barrier.c[s])
    log_density = target_log_density(problem, proposals, mu, c, cfg.mode)

    weights, dead = softmax_weights(log_density)
    alive = float(np.mean(np.isfinite(log_density)))
    max_logp = float(np.max(log_density))
    ess = 0.0 if dead else float(1.0 / np.sum(weights**2))

    # Fixed-order reduction keeps the result independent of BLAS threading.
    weighted_mean = np.sum(weights[:, None] * proposals, axis=0)
    score = -x_s / (1.0 - abar) + (np.sqrt(abar) / (1.0 - abar)) * weighted_mean
    stats = IterationStats(s=s, alive_fraction=alive, max_log_density=max_logp,
                           ess=ess, dead_batch=dead)
    return score, stats


def reverse_step(x_s: np.ndarray, score: np.ndarray, s: int, schedule: NoiseSchedule) -> np.ndarray:
    """Deterministic DDPM reverse update (no added noise)."""
    return (x_s + (1.0 - schedule.alpha_bar[s]) * score) / np.sqrt(schedule.alpha[s])


@dataclass
class SolveResult:
    """Final iterate of a reverse pass plus its per-step diagnostics."""

    x: np.ndarray
    stats: list[IterationStats]
    wall_time: float


def solve(
    problem: Problem,
    cfg: SolverConfig,
    post_step: Callable[[np.ndarray, int], np.ndarray] | None = None,
) -> SolveResult:
    """Run the full reverse pass s = S-1, ..., 0 from x_S ~ N(0, I).

    ``post_step`` is the hook the projection baselines use to re-feasibilize
    the iterate after each reverse update.  Deterministic for a fixed
    (seed, config) regardless of worker count.
    """
    t0 = time.perf_counter()
    state = DiffusionState(x=init_rng(cfg.seed).standard_normal(problem.dim), s=cfg.steps)
    stats: list[IterationStats] = []
    for s in range(cfg.steps - 1, -1, -1):
        score, st = mc_score(problem, state.x, s, cfg, step_rng(cfg.seed, s))
        x = reverse_step(state.x, score, s, cfg.noise)
        if post_step is not None:
            x = post_step(x, s)
        state = DiffusionState(x=x, s=s)
        stats.append(st)
    return SolveResult(x=state.x, stats=stats, wall_time=time.perf_counter() - t0)


def solve_trajectory(
    world: ObstacleWorld2D,
    cfg: SolverConfig,
    temperature: float | None = None,
) -> tuple[Trajectory, list[IterationStats], float]:
    """Solve the trajectory problem of a world and roll out the final iterate.

    An infeasible final trajectory is reported, not raised; it is an
    observable outcome of a badly tuned barrier schedule.
    """
    from .problems import DEFAULT_TEMPERATURE

    problem = make_trajectory_problem(
        world, DEFAULT_TEMPERATURE if temperature is None else temperature
    )
    result = solve(problem, cfg)
    traj = rollout(world, result.x.reshape(world.n_actions, 2))
    return traj, result.stats, result.wall_time
