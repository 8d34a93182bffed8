"""Optimization problem interface and the canonical 2D obstacle-avoidance instance.

Decision vectors are flattened action sequences u_{0:T} (inclusive, so T+1
actions of dimension 2); rolling them out from the fixed start state yields
states xi_{0:T+1}.  Cost and constraint evaluators are pure and broadcast over
arbitrary leading batch axes, which is what the Monte Carlo score estimator
relies on for throughput.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

STEP_GAIN = 0.3          # max step length of the kinematics
SPEED_SCALE = 0.1        # sigmoid argument gain on ||u||
ACTION_WEIGHT = 0.1      # running action-magnitude cost weight
TERMINAL_WEIGHT = 20.0   # terminal distance-to-target weight
ZERO_ACTION_NORM = 1e-9  # below this, a step produces zero displacement
FREE_SPACE_SDF = 1e9     # sentinel clearance for a world with no obstacles

HARD_RADIUS_SCALE = 1.8  # "hard" difficulty scales every radius by this factor

DEFAULT_TEMPERATURE = 0.01
DEFAULT_HORIZON = 50


@dataclass(frozen=True)
class Problem:
    """Bundle of a cost J, an inequality constraint g >= 0, and a temperature.

    ``cost`` and ``constraint`` map (..., dim) arrays to (...) arrays.  When
    both derive from one rollout, ``cost_and_constraint`` fuses the work.
    """

    dim: int
    cost: Callable[[np.ndarray], np.ndarray]
    constraint: Callable[[np.ndarray], np.ndarray]
    temperature: float
    cost_and_constraint: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    def evaluate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (J(x), g(x)), sharing work when a fused evaluator exists."""
        if self.cost_and_constraint is not None:
            return self.cost_and_constraint(x)
        return self.cost(x), self.constraint(x)


@dataclass(frozen=True)
class ObstacleWorld2D:
    """Circular obstacles between a start and a target point."""

    centers: np.ndarray  # (K, 2)
    radii: np.ndarray    # (K,)
    start: np.ndarray    # (2,)
    target: np.ndarray   # (2,)
    horizon: int         # T; the trajectory has T+1 actions and T+2 states

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if centers.size == 0:
            centers = centers.reshape(0, 2)
        radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        start = np.asarray(self.start, dtype=float).reshape(2)
        target = np.asarray(self.target, dtype=float).reshape(2)
        if centers.shape[0] != radii.shape[0] or (centers.size and centers.shape[1] != 2):
            raise ValueError("obstacle centers/radii shapes do not match")
        if np.any(radii <= 0.0):
            raise ValueError("obstacle radii must be positive")
        if self.horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {self.horizon}")
        for name, arr in (("centers", centers), ("radii", radii), ("start", start), ("target", target)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if world_sdf(self, start) <= 0.0 or world_sdf(self, target) <= 0.0:
            raise ValueError("start and target must lie strictly outside all obstacles")

    @property
    def n_actions(self) -> int:
        return self.horizon + 1

    @property
    def dim(self) -> int:
        return 2 * self.n_actions


@dataclass(frozen=True)
class Trajectory:
    """An action sequence and its rollout, with the two scalar summaries."""

    actions: np.ndarray       # (T+1, 2)
    states: np.ndarray        # (T+2, 2)
    total_cost: float
    min_clearance: float

    @property
    def feasible(self) -> bool:
        return self.min_clearance >= 0.0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def rollout_states(world: ObstacleWorld2D, actions: np.ndarray) -> np.ndarray:
    """Roll out (..., H, 2) actions into (..., H+1, 2) states.

    Each step advances by STEP_GAIN * sigmoid(SPEED_SCALE * ||u||) in the
    direction of u; the zero-action step produces zero displacement.
    """
    actions = np.asarray(actions, dtype=float)
    norms = np.linalg.norm(actions, axis=-1)
    gain = STEP_GAIN * _sigmoid(SPEED_SCALE * norms)
    moving = norms > ZERO_ACTION_NORM
    scale = np.where(moving, gain / np.where(moving, norms, 1.0), 0.0)
    displacement = actions * scale[..., None]
    states = np.empty(actions.shape[:-2] + (actions.shape[-2] + 1, 2))
    states[..., 0, :] = world.start
    states[..., 1:, :] = world.start + np.cumsum(displacement, axis=-2)
    return states


def world_sdf(world: ObstacleWorld2D, points: np.ndarray) -> np.ndarray:
    """Signed distance from (..., 2) points to the closest obstacle boundary.

    Negative inside an obstacle; FREE_SPACE_SDF when the world has none (a
    large finite sentinel keeps downstream barrier terms constant rather than
    infinite).
    """
    points = np.asarray(points, dtype=float)
    if world.centers.shape[0] == 0:
        return np.full(points.shape[:-1], FREE_SPACE_SDF)
    dist = np.linalg.norm(points[..., None, :] - world.centers, axis=-1)
    return np.min(dist - world.radii, axis=-1)


def trajectory_cost_terms(world: ObstacleWorld2D, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Total cost for (..., H+1, 2) states and (..., H, 2) actions.

    J = TERMINAL_WEIGHT * ||xi_{T+1} - target||
        + sum_t (||xi_t - target|| + ACTION_WEIGHT * ||u_t||),  t = 0..T.
    """
    to_target = np.linalg.norm(states - world.target, axis=-1)
    terminal = TERMINAL_WEIGHT * to_target[..., -1]
    running = np.sum(to_target[..., :-1], axis=-1)
    effort = ACTION_WEIGHT * np.sum(np.linalg.norm(actions, axis=-1), axis=-1)
    return terminal + running + effort


def min_clearance_of_states(world: ObstacleWorld2D, states: np.ndarray) -> np.ndarray:
    """min over t of world_sdf(xi_t) for (..., H+1, 2) states."""
    return np.min(world_sdf(world, states), axis=-1)


def rollout(world: ObstacleWorld2D, actions: np.ndarray) -> Trajectory:
    """Roll out one action sequence of shape (T+1, 2) into a Trajectory."""
    actions = np.asarray(actions, dtype=float)
    if actions.shape != (world.n_actions, 2):
        raise ValueError(
            f"expected actions of shape {(world.n_actions, 2)}, got {actions.shape}"
        )
    states = rollout_states(world, actions)
    return Trajectory(
        actions=actions,
        states=states,
        total_cost=float(trajectory_cost_terms(world, states, actions)),
        min_clearance=float(min_clearance_of_states(world, states)),
    )


def trajectory_cost(world: ObstacleWorld2D, traj: Trajectory) -> float:
    return float(trajectory_cost_terms(world, traj.states, traj.actions))


def trajectory_constraint(world: ObstacleWorld2D, traj: Trajectory) -> float:
    return float(min_clearance_of_states(world, traj.states))


def make_trajectory_problem(world: ObstacleWorld2D, temperature: float = DEFAULT_TEMPERATURE) -> Problem:
    """Wrap a world into the Problem interface over flattened action vectors."""
    dim = world.dim
    n_actions = world.n_actions

    def to_actions(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x.reshape(x.shape[:-1] + (n_actions, 2))

    def cost(x: np.ndarray) -> np.ndarray:
        actions = to_actions(x)
        return trajectory_cost_terms(world, rollout_states(world, actions), actions)

    def constraint(x: np.ndarray) -> np.ndarray:
        return min_clearance_of_states(world, rollout_states(world, to_actions(x)))

    def both(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        actions = to_actions(x)
        states = rollout_states(world, actions)
        return (
            trajectory_cost_terms(world, states, actions),
            min_clearance_of_states(world, states),
        )

    return Problem(dim=dim, cost=cost, constraint=constraint,
                   temperature=temperature, cost_and_constraint=both)


# Canonical world: a two-column slalom between start and target plus a ring
# of clutter behind the start.  Coordinates are a repo decision (documented in
# the README); "hard" scales the radii so the passages nearly close (surface
# gaps drop from 0.70 to 0.14).
_CANONICAL_CENTERS = [
    [1.1, -1.4],
    [1.1, 0.0],
    [1.1, 1.4],
    [2.3, -2.1],
    [2.3, -0.7],
    [2.3, 0.7],
    [2.3, 2.1],
    [-0.44, 1.22],
    [-1.3, 0.0],
    [-0.44, -1.22],
]
_CANONICAL_RADII = [0.35] * 10
_CANONICAL_START = [0.0, 0.0]
_CANONICAL_TARGET = [3.8, 0.0]

DIFFICULTIES = ("easy", "hard")


def make_canonical_world(difficulty: str = "hard", horizon: int = DEFAULT_HORIZON) -> ObstacleWorld2D:
    """Deterministic built-in world; "hard" scales radii by HARD_RADIUS_SCALE."""
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}, got {difficulty!r}")
    radii = np.asarray(_CANONICAL_RADII, dtype=float)
    if difficulty == "hard":
        radii = radii * HARD_RADIUS_SCALE
    return ObstacleWorld2D(
        centers=np.asarray(_CANONICAL_CENTERS, dtype=float),
        radii=radii,
        start=np.asarray(_CANONICAL_START, dtype=float),
        target=np.asarray(_CANONICAL_TARGET, dtype=float),
        horizon=horizon,
    )


def world_to_dict(world: ObstacleWorld2D) -> dict:
    return {
        "obstacles": [[float(c[0]), float(c[1]), float(r)]
                      for c, r in zip(world.centers, world.radii)],
        "start": [float(v) for v in world.start],
        "target": [float(v) for v in world.target],
        "horizon": int(world.horizon),
    }


def world_from_dict(data: dict) -> ObstacleWorld2D:
    obstacles = np.asarray(data.get("obstacles", []), dtype=float)
    if obstacles.size == 0:
        centers, radii = np.zeros((0, 2)), np.zeros(0)
    else:
        obstacles = np.atleast_2d(obstacles)
        centers, radii = obstacles[:, :2], obstacles[:, 2]
    return ObstacleWorld2D(
        centers=centers,
        radii=radii,
        start=np.asarray(data["start"], dtype=float),
        target=np.asarray(data["target"], dtype=float),
        horizon=int(data.get("horizon", DEFAULT_HORIZON)),
    )


def load_world(path: str) -> ObstacleWorld2D:
    with open(path) as fh:
        return world_from_dict(json.load(fh))


def save_world(world: ObstacleWorld2D, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(world_to_dict(world), fh, indent=2)
        fh.write("\n")
