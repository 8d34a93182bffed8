"""Projection-based constrained baselines.

The projection onto {g(tau) + c >= 0} is solved by a self-contained augmented
penalty method: gradient descent with backtracking on the augmented
Lagrangian, constraint gradients by central finite differences (the rollout
oracle is treated as non-differentiable).  Absolute runtimes therefore differ
from an off-the-shelf NLP solver; comparisons use runtime ratios.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import (
    IterationStats,
    SolverConfig,
    solve,
)
from .problems import ObstacleWorld2D, Problem, Trajectory, make_trajectory_problem, rollout


@dataclass(frozen=True)
class LineSearchRule:
    """Backtracking (Armijo) parameters for the inner descent."""

    initial: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 20


@dataclass(frozen=True)
class ProjectionConfig:
    max_iters: int = 120          # total inner descent steps across all rounds
    tol: float = 1e-3             # allowed constraint violation at the output
    step_rule: LineSearchRule = field(default_factory=LineSearchRule)
    relaxation: float = 0.0       # default offset c when none is given
    fd_rel_step: float = 1e-5     # central-difference relative step
    penalty_init: float = 10.0
    penalty_growth: float = 4.0
    max_outer: int = 8            # multiplier/penalty update rounds
    grad_tol: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")


def fd_gradient(fn, x: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a batched scalar function."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[0]
    h = rel_step * np.maximum(np.abs(x), 1.0)
    offsets = np.diag(h)
    batch = np.concatenate([x + offsets, x - offsets], axis=0)
    vals = np.asarray(fn(batch), dtype=float)
    return (vals[:dim] - vals[dim:]) / (2.0 * h)


def project(
    problem: Problem,
    tau_d: np.ndarray,
    c: float | None,
    cfg: ProjectionConfig,
    start: np.ndarray | None = None,
) -> tuple[np.ndarray, bool, int]:
    """Local solution of min ||tau - tau_d||^2 s.t. g(tau) + c >= 0.

    Returns (tau, converged, inner_iterations).  A feasible tau_d is returned
    unchanged with zero iterations.  Non-convergence within max_iters returns
    the best iterate found with converged=False.
    """
    tau_d = np.asarray(tau_d, dtype=float)
    if c is None:
        c = cfg.relaxation

    def h(p):  # relaxed constraint, want h >= 0
        return np.asarray(problem.constraint(p), dtype=float) + c

    if float(h(tau_d)) >= 0.0:
        return tau_d.copy(), True, 0

    tau = tau_d.copy() if start is None else np.asarray(start, dtype=float).copy()
    y = 0.0
    rho = cfg.penalty_init
    iters = 0
    rule = cfg.step_rule

    def lagrangian(p, hv=None):
        hv = float(h(p)) if hv is None else hv
        slack = max(0.0, y - rho * hv)
        dist2 = float(np.sum((p - tau_d) ** 2))
        return dist2 + (slack**2 - y**2) / (2.0 * rho)

    # Track the best iterate: least violation first, then distance to tau_d.
    def key(p, hv):
        return (max(0.0, -hv), float(np.sum((p - tau_d) ** 2)))

    h_tau = float(h(tau))
    best, best_key = tau.copy(), key(tau, h_tau)

    steps_grid = rule.initial * rule.shrink ** np.arange(rule.max_backtracks)
    for _ in range(cfg.max_outer):
        prev_violation = max(0.0, -h_tau)
        while iters < cfg.max_iters:
            slack = max(0.0, y - rho * h_tau)
            grad = 2.0 * (tau - tau_d)
            if slack > 0.0:
                grad = grad - slack * fd_gradient(problem.constraint, tau, cfg.fd_rel_step)
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= cfg.grad_tol * (1.0 + float(np.linalg.norm(tau))):
                break
            # Evaluate the whole backtracking ladder in one batched call.
            cands = tau[None, :] - steps_grid[:, None] * grad[None, :]
            h_cands = h(cands)
            dist2 = np.sum((cands - tau_d) ** 2, axis=1)
            slacks = np.maximum(0.0, y - rho * h_cands)
            l_cands = dist2 + (slacks**2 - y**2) / (2.0 * rho)
            l_now = lagrangian(tau, h_tau)
            ok = l_cands <= l_now - rule.armijo * steps_grid * gnorm**2
            if not np.any(ok):
                break
            k = int(np.argmax(ok))
            tau = cands[k]
            h_tau = float(h_cands[k])
            iters += 1
            if key(tau, h_tau) < best_key:
                best, best_key = tau.copy(), key(tau, h_tau)
        y = max(0.0, y - rho * h_tau)
        violation = max(0.0, -h_tau)
        if violation <= 0.0 and y == 0.0:
            break
        if violation > 0.5 * prev_violation:
            rho *= cfg.penalty_growth
        if iters >= cfg.max_iters:
            break

    if key(tau, h_tau) <= best_key:
        best, best_key = tau, key(tau, h_tau)

    # Feasibility restoration: push along the constraint gradient until the
    # violation clears (SDF-like constraints have near-unit gradients).
    tau = best
    h_tau = float(h(tau))
    for _ in range(10):
        if h_tau >= 0.0 or iters >= cfg.max_iters + 10:
            break
        grad_g = fd_gradient(problem.constraint, tau, cfg.fd_rel_step)
        gg = float(np.dot(grad_g, grad_g))
        if gg < 1e-12:
            break
        tau = tau + ((-h_tau) + 0.25 * cfg.tol) * grad_g / gg
        h_tau = float(h(tau))
        iters += 1

    converged = h_tau >= -cfg.tol
    return tau, converged, iters


@dataclass
class ProjectionStats:
    """Projection effort bookkeeping across one solve."""

    iters_total: int = 0
    failed: int = 0


def _projected_solve(
    world: ObstacleWorld2D,
    cfg: SolverConfig,
    proj_cfg: ProjectionConfig,
    offset_for_step,
    temperature: float | None = None,
) -> tuple[Trajectory, list[IterationStats], float, ProjectionStats]:
    from .problems import DEFAULT_TEMPERATURE

    problem = make_trajectory_problem(
        world, DEFAULT_TEMPERATURE if temperature is None else temperature
    )
    pstats = ProjectionStats()

    def post_step(x: np.ndarray, s: int) -> np.ndarray:
        projected, converged, iters = project(problem, x, offset_for_step(s), proj_cfg)
        pstats.iters_total += iters
        if not converged:
            pstats.failed += 1
        return projected

    result = solve(problem, cfg, post_step=post_step)
    traj = rollout(world, result.x.reshape(world.n_actions, 2))
    return traj, result.stats, result.wall_time, pstats


def projected_mbd_solve(
    world: ObstacleWorld2D,
    cfg: SolverConfig,
    proj_cfg: ProjectionConfig | None = None,
    temperature: float | None = None,
) -> tuple[Trajectory, list[IterationStats], float, ProjectionStats]:
    """MBD loop with a projection onto {g >= 0} after every reverse step."""
    proj_cfg = proj_cfg or ProjectionConfig()
    return _projected_solve(world, cfg, proj_cfg, lambda s: 0.0, temperature)


def dpcc_mbd_solve(
    world: ObstacleWorld2D,
    cfg: SolverConfig,
    proj_cfg: ProjectionConfig | None = None,
    temperature: float | None = None,
) -> tuple[Trajectory, list[IterationStats], float, ProjectionStats]:
    """MBD loop projecting onto the iteratively tightening set {g + c_s >= 0}.

    Uses the same offsets c_s as the emerging-barrier schedule, so the final
    step projects onto the true constraint set (c_0 = 0).
    """
    proj_cfg = proj_cfg or ProjectionConfig()
    return _projected_solve(
        world, cfg, proj_cfg, lambda s: float(cfg.barrier.c[s]), temperature
    )
