import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blendlab.errors import ConfigurationError, ContractViolation
from blendlab.gaussians import GaussianDensity, GaussianMixture, precision_combine
from blendlab.interaction import (
    InteractionParams,
    JointModels,
    agreeability_log,
    crowd_avoidance_log,
    joint_log_density,
)
from blendlab.trajectory import Trajectory


def traj(points, dt=0.25):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return Trajectory(dt * np.arange(points.shape[0]), points)


class TestAgreeability:
    def test_identity_gives_zero(self):
        a = traj([[0, 0], [1, 1]])
        assert agreeability_log(a, a, InteractionParams()) == 0.0

    def test_direct_substitution(self):
        # one waypoint, separation 2, gamma 2 -> -1
        a = traj([[0.0, 0.0]])
        b = traj([[2.0, 0.0]])
        assert agreeability_log(a, b, InteractionParams(gamma=2.0)) == pytest.approx(-1.0)

    def test_doubling_gamma_halves_magnitude(self):
        a = traj([[0, 0], [1, 0]])
        b = traj([[0, 1], [1, 1]])
        v1 = agreeability_log(a, b, InteractionParams(gamma=1.0))
        v2 = agreeability_log(a, b, InteractionParams(gamma=2.0))
        assert v2 == pytest.approx(0.5 * v1)

    def test_always_nonpositive_and_symmetric(self):
        rng = np.random.default_rng(0)
        params = InteractionParams()
        for _ in range(25):
            a = traj(rng.uniform(-3, 3, (4, 2)))
            b = traj(rng.uniform(-3, 3, (4, 2)))
            v = agreeability_log(a, b, params)
            assert v <= 0.0
            assert v == agreeability_log(b, a, params)

    def test_first_step_scope(self):
        a = traj([[0, 0], [1, 0], [5, 5]])
        b = traj([[0, 0], [1, 1], [0, 0]])
        v = agreeability_log(a, b, InteractionParams(gamma=0.5), scope="first-step")
        assert v == pytest.approx(-1.0)  # only the first post-current waypoint

    def test_grid_mismatch(self):
        a = traj([[0, 0], [1, 1]])
        b = traj([[0, 0], [1, 1]], dt=0.5)
        with pytest.raises(ContractViolation):
            agreeability_log(a, b, InteractionParams())


class TestCrowdAvoidance:
    def test_empty_crowd(self):
        assert crowd_avoidance_log(traj([[0, 0]]), [], InteractionParams()) == 0.0

    def test_coincident_waypoint(self):
        params = InteractionParams(crowd_alpha=0.99)
        v = crowd_avoidance_log(traj([[1, 1]]), [traj([[1, 1]])], params)
        assert v == pytest.approx(np.log(0.01), abs=1e-12)

    def test_vanishes_at_distance(self):
        params = InteractionParams()
        v = crowd_avoidance_log(traj([[0, 0]]), [traj([[50, 0]])], params)
        assert abs(v) < 1e-12

    def test_monotone_in_separation(self):
        rng = np.random.default_rng(1)
        params = InteractionParams()
        for _ in range(20):
            robot = traj(rng.uniform(-2, 2, (3, 2)))
            ped_pts = robot.points + rng.uniform(0.2, 1.0, (3, 2))
            near = traj(ped_pts)
            farther = traj(robot.points + 1.5 * (ped_pts - robot.points))
            assert crowd_avoidance_log(robot, [farther], params) >= crowd_avoidance_log(
                robot, [near], params
            )


class TestJoint:
    def setup_method(self):
        self.times = 0.25 * np.arange(2)
        dim = 4
        self.op = GaussianMixture.single(GaussianDensity(np.zeros(dim), np.eye(dim)))
        self.aut = GaussianMixture.single(GaussianDensity(np.ones(dim), np.eye(dim)))
        self.ped = GaussianMixture.single(GaussianDensity(np.full(dim, 3.0), np.eye(dim)))

    def test_missing_crowd_model(self):
        models = JointModels(self.times, self.op, self.aut, ())
        with pytest.raises(ConfigurationError):
            joint_log_density(
                traj([[0, 0], [0, 0]]),
                traj([[1, 1], [1, 1]]),
                [traj([[3, 3], [3, 3]])],
                models,
                InteractionParams(),
            )

    def test_crowd_permutation_invariance(self):
        ped2 = GaussianMixture.single(GaussianDensity(np.full(4, -3.0), np.eye(4)))
        h = traj([[0, 0], [0, 0]])
        f = traj([[1, 1], [1, 1]])
        c1 = traj([[3, 3], [3, 3]])
        c2 = traj([[-3, -3], [-3, -3]])
        params = InteractionParams()
        a = joint_log_density(
            h, f, [c1, c2], JointModels(self.times, self.op, self.aut, (self.ped, ped2)), params
        )
        b = joint_log_density(
            h, f, [c2, c1], JointModels(self.times, self.op, self.aut, (ped2, self.ped)), params
        )
        assert a == b

    def test_decoupled_limit(self):
        # enormous gamma: each model's mean maximizes its own term
        params = InteractionParams(gamma=1e12)
        models = JointModels(self.times, self.op, self.aut, ())
        h_best = traj(self.op.components[0].mean.reshape(-1, 2))
        f_best = traj(self.aut.components[0].mean.reshape(-1, 2))
        base = joint_log_density(h_best, f_best, [], models, params)
        rng = np.random.default_rng(3)
        for _ in range(20):
            h = traj(h_best.points + rng.normal(0, 0.3, (2, 2)))
            f = traj(f_best.points + rng.normal(0, 0.3, (2, 2)))
            assert joint_log_density(h, f, [], models, params) <= base + 1e-9

    def test_unimodal_argmax_matches_precision_combine(self):
        # with the operator pinned, the best robot trajectory is the
        # precision-weighted combination
        gamma = 0.7
        sigma_r = 1.3
        params = InteractionParams(gamma=gamma)
        z_h = np.array([0.5, -0.25, 1.0, 0.5])
        f_bar = np.array([1.5, 0.75, 2.0, 1.5])
        op = GaussianMixture.single(GaussianDensity(z_h, 1e-12 * np.eye(4)))
        aut = GaussianMixture.single(GaussianDensity(f_bar, sigma_r * np.eye(4)))
        models = JointModels(self.times, op, aut, ())
        expected = precision_combine(gamma, sigma_r, z_h, f_bar)

        h = Trajectory.from_stacked(self.times, z_h)
        base = joint_log_density(h, Trajectory.from_stacked(self.times, expected), [], models, params)
        rng = np.random.default_rng(5)
        for _ in range(30):
            f = Trajectory.from_stacked(self.times, expected + rng.normal(0, 0.2, 4))
            assert joint_log_density(h, f, [], models, params) <= base + 1e-9

    def test_h_argmax_lies_between_operator_mean_and_robot(self):
        # for fixed fR the joint in h peaks between the two Gaussian
        # centers (convex combination of the two quadratic terms)
        params = InteractionParams(gamma=0.8)
        op_mean = np.array([0.0, 0.0, 0.0, 0.0])
        op = GaussianMixture.single(GaussianDensity(op_mean, 0.5 * np.eye(4)))
        aut = GaussianMixture.single(GaussianDensity(np.full(4, 2.0), np.eye(4)))
        models = JointModels(self.times, op, aut, ())
        f = Trajectory.from_stacked(self.times, np.full(4, 2.0))
        grid = np.linspace(-1.0, 3.0, 401)
        vals = []
        for hx in grid:
            h = Trajectory.from_stacked(self.times, np.full(4, hx))
            vals.append(joint_log_density(h, f, [], models, params))
        best = grid[int(np.argmax(vals))]
        assert 0.0 - 1e-9 <= best <= 2.0 + 1e-9

    def test_brute_force_grid_two_waypoint_toy(self):
        # 1-D toy on a 2-waypoint grid: x components free, y pinned at zero
        # by symmetric models; exhaustive grid oracle over (f1x, f2x).
        from blendlab.arbitration import psc_map
        from blendlab.prediction import TrajectoryBelief

        gamma = 0.5
        params = InteractionParams(gamma=gamma)
        z_h = np.array([0.2, 0.0, 0.6, 0.0])
        f_bar = np.array([1.0, 0.0, 1.6, 0.0])
        op = TrajectoryBelief.unimodal(self.times, GaussianDensity(z_h, 1e-12 * np.eye(4)))
        aut = TrajectoryBelief.unimodal(self.times, GaussianDensity(f_bar, 0.9 * np.eye(4)))
        models = JointModels(self.times, op.mixture, aut.mixture, ())
        h = Trajectory.from_stacked(self.times, z_h)

        grid = np.linspace(-0.5, 2.5, 201)
        best = (-np.inf, None)
        for f1 in grid:
            for f2 in grid:
                f = Trajectory(self.times, np.array([[f1, 0.0], [f2, 0.0]]))
                val = joint_log_density(h, f, [], models, params)
                if val > best[0]:
                    best = (val, (f1, f2))
        report = psc_map(op, aut, params=params, search_budget=64, seed=0)
        found = report.control.trajectory.points
        step = grid[1] - grid[0]
        assert abs(found[0, 0] - best[1][0]) <= step
        assert abs(found[1, 0] - best[1][1]) <= step
        assert abs(found[0, 1]) < 1e-6 and abs(found[1, 1]) < 1e-6


class TestParams:
    def test_validation(self):
        with pytest.raises(ContractViolation):
            InteractionParams(gamma=0.0)
        with pytest.raises(ContractViolation):
            InteractionParams(crowd_alpha=1.0)
        with pytest.raises(ContractViolation):
            InteractionParams(crowd_lengthscale=-1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 1000))
def test_agreeability_symmetry_property(gamma, seed):
    rng = np.random.default_rng(seed)
    a = traj(rng.uniform(-4, 4, (3, 2)))
    b = traj(rng.uniform(-4, 4, (3, 2)))
    params = InteractionParams(gamma=gamma)
    va = agreeability_log(a, b, params)
    assert va == agreeability_log(b, a, params)
    assert va <= 0.0
