"""Emerging-barrier model-based diffusion for constrained trajectory optimization."""

from .analysis import (
    BoundInputs,
    LinearConstraint,
    halfspace_gaussian_probability,
    lemma1_bound,
    liveliness_trace,
    theorem1_bound,
)
from .diffusion import (
    MODE_EBMBD,
    MODE_MBD,
    IterationStats,
    SolveResult,
    SolverConfig,
    barrier_cost,
    mc_score,
    reverse_step,
    solve,
    solve_trajectory,
    target_log_density,
)
from .problems import (
    ObstacleWorld2D,
    Problem,
    Trajectory,
    load_world,
    make_canonical_world,
    make_trajectory_problem,
    rollout,
    trajectory_constraint,
    trajectory_cost,
    world_sdf,
)
from .projection import (
    ProjectionConfig,
    dpcc_mbd_solve,
    project,
    projected_mbd_solve,
)
from .schedules import (
    BarrierSchedule,
    NoiseSchedule,
    barrier_offset,
    make_barrier_schedule,
    make_noise_schedule,
)

__version__ = "0.1.0"
