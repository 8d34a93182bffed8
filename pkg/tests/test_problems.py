import json
import math

import numpy as np
import pytest

from ebmbd.problems import (
    FREE_SPACE_SDF,
    HARD_RADIUS_SCALE,
    STEP_GAIN,
    ObstacleWorld2D,
    load_world,
    make_canonical_world,
    make_trajectory_problem,
    rollout,
    save_world,
    trajectory_constraint,
    trajectory_cost,
    world_from_dict,
    world_sdf,
    world_to_dict,
)


def open_world(horizon=5):
    return ObstacleWorld2D(
        centers=np.zeros((0, 2)), radii=np.zeros(0),
        start=np.array([0.0, 0.0]), target=np.array([2.0, 0.0]), horizon=horizon,
    )


def two_circle_world(horizon=5):
    return ObstacleWorld2D(
        centers=np.array([[1.0, 0.0], [2.0, 1.0]]), radii=np.array([0.4, 0.3]),
        start=np.array([0.0, 0.0]), target=np.array([3.0, 0.0]), horizon=horizon,
    )


class TestRollout:
    def test_zero_actions_stay_at_start(self):
        world = open_world(horizon=4)
        traj = rollout(world, np.zeros((5, 2)))
        assert np.array_equal(traj.states, np.tile(world.start, (6, 1)))

    def test_huge_action_saturates_step_length(self):
        world = open_world(horizon=0)
        traj = rollout(world, np.array([[1e9, 0.0]]))
        step = np.linalg.norm(traj.states[1] - traj.states[0])
        assert step == pytest.approx(STEP_GAIN, rel=1e-9)

    def test_single_step_closed_form(self):
        # u = (10, 0) from the origin: step = 0.3 * sigmoid(1) along +x.
        world = open_world(horizon=0)
        traj = rollout(world, np.array([[10.0, 0.0]]))
        expected = 0.3 * (1.0 / (1.0 + math.exp(-1.0)))
        assert traj.states[1][0] == pytest.approx(expected, rel=1e-12)
        assert traj.states[1][0] == pytest.approx(0.21932, abs=1e-5)
        assert traj.states[1][1] == 0.0

    def test_step_length_bounded(self):
        world = open_world(horizon=9)
        rng = np.random.default_rng(0)
        for _ in range(20):
            traj = rollout(world, rng.normal(scale=rng.uniform(0.1, 30), size=(10, 2)))
            steps = np.linalg.norm(np.diff(traj.states, axis=0), axis=1)
            assert np.all(steps <= STEP_GAIN + 1e-12)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            rollout(open_world(horizon=3), np.zeros((7, 2)))


class TestTrajectoryCost:
    def test_stationary_at_target_costs_zero(self):
        world = ObstacleWorld2D(
            centers=np.zeros((0, 2)), radii=np.zeros(0),
            start=np.array([2.0, 0.0]), target=np.array([2.0, 0.0]), horizon=3,
        )
        traj = rollout(world, np.zeros((4, 2)))
        assert traj.total_cost == 0.0

    def test_single_step_hand_evaluation(self):
        # xi_0 = target + (1, 0), zero action: cost = 20*1 + 1 + 0 = 21.
        world = ObstacleWorld2D(
            centers=np.zeros((0, 2)), radii=np.zeros(0),
            start=np.array([3.0, 0.0]), target=np.array([2.0, 0.0]), horizon=0,
        )
        traj = rollout(world, np.zeros((1, 2)))
        assert traj.total_cost == pytest.approx(21.0)

    def test_matches_term_by_term_oracle(self):
        world = two_circle_world(horizon=7)
        rng = np.random.default_rng(1)
        for _ in range(10):
            traj = rollout(world, rng.normal(size=(8, 2)))
            # independent re-summation with plain scalar arithmetic
            expected = 20.0 * math.dist(traj.states[-1], world.target)
            for t in range(8):
                expected += math.dist(traj.states[t], world.target)
                expected += 0.1 * math.hypot(*traj.actions[t])
            assert trajectory_cost(world, traj) == pytest.approx(expected, rel=1e-12)

    def test_cost_nonnegative_and_zero_only_when_parked_at_target(self):
        world = two_circle_world(horizon=6)
        rng = np.random.default_rng(2)
        for _ in range(25):
            traj = rollout(world, rng.normal(scale=3.0, size=(7, 2)))
            # any trajectory not parked at the target costs strictly more than 0
            assert traj.total_cost > 0.0


class TestWorldSdf:
    def test_center_and_boundary(self):
        world = two_circle_world()
        assert world_sdf(world, np.array([1.0, 0.0])) == pytest.approx(-0.4)
        assert world_sdf(world, np.array([1.4, 0.0])) == pytest.approx(0.0, abs=1e-12)

    def test_grid_matches_per_obstacle_minimum(self):
        world = two_circle_world()
        xs = np.linspace(-1, 4, 11)
        ys = np.linspace(-2, 3, 11)
        for x in xs:
            for y in ys:
                expected = min(
                    math.dist((x, y), world.centers[k]) - world.radii[k]
                    for k in range(2)
                )
                assert world_sdf(world, np.array([x, y])) == pytest.approx(expected, rel=1e-12)

    def test_empty_world_gives_sentinel(self):
        assert world_sdf(open_world(), np.array([5.0, 5.0])) == FREE_SPACE_SDF

    def test_one_lipschitz(self):
        world = two_circle_world()
        rng = np.random.default_rng(3)
        a = rng.uniform(-3, 5, size=(500, 2))
        b = rng.uniform(-3, 5, size=(500, 2))
        gap = np.abs(world_sdf(world, a) - world_sdf(world, b))
        dist = np.linalg.norm(a - b, axis=1)
        assert np.all(gap <= dist + 1e-12)


class TestTrajectoryConstraint:
    def test_clear_trajectory_positive(self):
        world = two_circle_world(horizon=2)
        traj = rollout(world, np.tile([0.0, -5.0], (3, 1)))
        assert trajectory_constraint(world, traj) > 0.0

    def test_state_at_center_gives_minus_radius(self):
        world = ObstacleWorld2D(
            centers=np.array([[0.0, 0.6]]), radii=np.array([0.3]),
            start=np.array([0.0, 0.0]), target=np.array([1.0, 0.0]), horizon=1,
        )
        # two saturated steps of length 0.3 straight up land on the center
        traj = rollout(world, np.array([[0.0, 1e9], [0.0, 1e9]]))
        assert traj.min_clearance == pytest.approx(-0.3, abs=1e-9)

    def test_matches_exhaustive_minimum(self):
        world = two_circle_world(horizon=9)
        rng = np.random.default_rng(4)
        for _ in range(10):
            traj = rollout(world, rng.normal(scale=4.0, size=(10, 2)))
            expected = min(
                math.dist(state, world.centers[k]) - world.radii[k]
                for state in traj.states
                for k in range(2)
            )
            assert trajectory_constraint(world, traj) == pytest.approx(expected, rel=1e-12)

    def test_min_clearance_recorded_on_trajectory(self):
        world = two_circle_world(horizon=4)
        traj = rollout(world, np.ones((5, 2)))
        assert traj.min_clearance == pytest.approx(trajectory_constraint(world, traj))


class TestCanonicalWorld:
    def test_easy_gaps_exceed_twice_step_length(self):
        world = make_canonical_world("easy")
        c, r = world.centers, world.radii
        for i in range(len(r)):
            for j in range(i + 1, len(r)):
                gap = np.linalg.norm(c[i] - c[j]) - r[i] - r[j]
                assert gap > 2 * STEP_GAIN

    def test_hard_scales_radii_only(self):
        easy = make_canonical_world("easy")
        hard = make_canonical_world("hard")
        assert np.array_equal(easy.centers, hard.centers)
        assert np.allclose(hard.radii, HARD_RADIUS_SCALE * easy.radii)

    @pytest.mark.parametrize("difficulty", ["easy", "hard"])
    def test_start_and_target_strictly_outside(self, difficulty):
        world = make_canonical_world(difficulty)
        assert world_sdf(world, world.start) > 0.0
        assert world_sdf(world, world.target) > 0.0

    def test_rejects_unknown_difficulty(self):
        with pytest.raises(ValueError):
            make_canonical_world("medium")


class TestWorldValidationAndIO:
    def test_rejects_start_inside_obstacle(self):
        with pytest.raises(ValueError):
            ObstacleWorld2D(
                centers=np.array([[0.0, 0.0]]), radii=np.array([1.0]),
                start=np.array([0.2, 0.0]), target=np.array([3.0, 0.0]), horizon=5,
            )

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            ObstacleWorld2D(
                centers=np.array([[1.0, 0.0]]), radii=np.array([0.0]),
                start=np.array([0.0, 0.0]), target=np.array([3.0, 0.0]), horizon=5,
            )

    def test_json_round_trip(self, tmp_path):
        world = make_canonical_world("hard", horizon=17)
        path = tmp_path / "world.json"
        save_world(world, str(path))
        loaded = load_world(str(path))
        assert np.allclose(loaded.centers, world.centers)
        assert np.allclose(loaded.radii, world.radii)
        assert np.allclose(loaded.start, world.start)
        assert np.allclose(loaded.target, world.target)
        assert loaded.horizon == 17

    def test_world_from_dict_no_obstacles(self):
        world = world_from_dict({"start": [0, 0], "target": [1, 1], "horizon": 4})
        assert world.centers.shape == (0, 2)
        assert world_sdf(world, world.start) == FREE_SPACE_SDF

    def test_dict_schema(self):
        world = two_circle_world()
        d = world_to_dict(world)
        assert d["obstacles"] == [[1.0, 0.0, 0.4], [2.0, 1.0, 0.3]]
        assert json.dumps(d)  # plain JSON types only


class TestTrajectoryProblem:
    def test_batch_matches_per_sample_evaluation(self):
        world = two_circle_world(horizon=6)
        problem = make_trajectory_problem(world, temperature=0.05)
        rng = np.random.default_rng(5)
        batch = rng.normal(size=(9, problem.dim))
        costs = problem.cost(batch)
        cons = problem.constraint(batch)
        fused_cost, fused_cons = problem.evaluate(batch)
        for i in range(9):
            traj = rollout(world, batch[i].reshape(-1, 2))
            assert costs[i] == pytest.approx(traj.total_cost, rel=1e-12)
            assert cons[i] == pytest.approx(traj.min_clearance, rel=1e-12)
        assert np.array_equal(fused_cost, costs)
        assert np.array_equal(fused_cons, cons)

    def test_dim_matches_world(self):
        world = two_circle_world(horizon=6)
        problem = make_trajectory_problem(world)
        assert problem.dim == 2 * (6 + 1)

    def test_purity_same_input_same_output(self):
        world = two_circle_world(horizon=3)
        problem = make_trajectory_problem(world)
        x = np.linspace(-1, 1, problem.dim)
        assert problem.cost(x) == problem.cost(x)
        assert problem.constraint(x) == problem.constraint(x)
