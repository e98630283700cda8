import numpy as np
import pytest

from blendlab.arbitration import (
    BlendGains,
    SharedControl,
    ctb,
    default_gains,
    linear_blend,
    ltb,
    ltbo,
    psc_map,
)
from blendlab.errors import ContractViolation, InfeasibilityError, ProvenanceError
from blendlab.gaussians import (
    GaussianDensity,
    GaussianMixture,
    mixture_argmax,
    mixture_times_gaussian,
)
from blendlab.interaction import InteractionParams
from blendlab.prediction import OperatorStatistic, TrajectoryBelief
from blendlab.trajectory import Trajectory

TIMES = 0.25 * np.arange(6)
DIM = 12


def unimodal(mean, var, n_obs=0):
    return TrajectoryBelief.unimodal(
        TIMES, GaussianDensity(np.asarray(mean, dtype=float), var * np.eye(DIM)), n_obs
    )


def bimodal(mean_a, mean_b, var=0.4, weights=(0.6, 0.4)):
    comps = (
        GaussianDensity(np.asarray(mean_a, dtype=float), var * np.eye(DIM)),
        GaussianDensity(np.asarray(mean_b, dtype=float), var * np.eye(DIM)),
    )
    return TrajectoryBelief(TIMES, GaussianMixture(comps, np.log(weights)))


class TestLinearBlend:
    def test_direct_formula(self):
        out = linear_blend([1.0, 0.0], [0.0, 1.0], BlendGains(0.3))
        np.testing.assert_allclose(out, [0.3, 0.7])

    def test_operator_passthrough(self):
        out = linear_blend([2.0, -1.0], [9.0, 9.0], BlendGains(1.0))
        np.testing.assert_allclose(out, [2.0, -1.0])

    def test_fixed_point(self):
        u = np.array([0.4, 0.6])
        for k_h in (0.0, 0.25, 1.0):
            np.testing.assert_allclose(linear_blend(u, u, BlendGains(k_h)), u)

    def test_gains_invariant(self):
        g = BlendGains(0.3)
        assert g.k_h + g.k_r == 1.0
        with pytest.raises(ContractViolation):
            BlendGains(1.5)


class TestSharedControl:
    def test_next_command_formula(self):
        traj = Trajectory([0.0, 0.5], [[0, 0], [0.5, 0.25]])
        control = SharedControl.from_trajectory(traj)
        np.testing.assert_allclose(control.next_command, [1.0, 0.5])
        assert control.speed_feasible

    def test_speed_clamped_with_flag(self):
        traj = Trajectory([0.0, 0.25], [[0, 0], [2.0, 0]])  # 8 m/s
        control = SharedControl.from_trajectory(traj, v_max=2.0)
        assert not control.speed_feasible
        assert np.linalg.norm(control.next_command) == pytest.approx(2.0)


class TestLTB:
    def test_fixed_point(self):
        model = unimodal(np.linspace(0, 3, DIM), 0.5)
        report = ltb(model, model, InteractionParams())
        np.testing.assert_allclose(
            report.control.trajectory.stacked(), model.mixture.components[0].mean, atol=1e-8
        )

    def test_gain_mapping_recovers_map_blend(self):
        gamma, sigma_r = 0.8, 1.7
        rng = np.random.default_rng(0)
        z_h, f_bar = rng.uniform(-3, 3, DIM), rng.uniform(-3, 3, DIM)
        operator = unimodal(z_h, 1e-12)
        autonomy = unimodal(f_bar, sigma_r)
        params = InteractionParams(gamma=gamma)
        k_h = sigma_r / (sigma_r + gamma)
        rep_ltb = ltb(operator, autonomy, params, gains=BlendGains(k_h))
        rep_psc = psc_map(operator, autonomy, params=params, search_budget=32, seed=0)
        np.testing.assert_allclose(
            rep_ltb.control.trajectory.stacked(),
            rep_psc.control.trajectory.stacked(),
            atol=1e-8,
        )

    def test_default_gains_use_trace_average(self):
        autonomy = unimodal(np.zeros(DIM), 1.5)
        gains = default_gains(autonomy, InteractionParams(gamma=0.5))
        assert gains.k_h == pytest.approx(1.5 / 2.0)

    def test_diagnostics_keys(self):
        model = unimodal(np.zeros(DIM), 1.0)
        report = ltb(model, model, InteractionParams())
        assert {"k_h", "k_r", "operator_mode_index", "autonomy_mode_index"} <= set(
            report.diagnostics
        )
        assert report.to_json_dict().keys() == {"method", "control", "diagnostics"}


class TestLTBo:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.operator = TrajectoryBelief.unimodal(
            TIMES,
            GaussianDensity(rng.uniform(-1, 1, DIM), 0.3 * np.eye(DIM)),
            n_observations=5,
        )
        self.autonomy = unimodal(rng.uniform(-1, 1, DIM) + 1.0, 0.9)
        self.params = InteractionParams()

    def test_uninformative_statistic_reduces_to_ltb(self):
        statistic = OperatorStatistic(
            "goal-point", [0.0, 0.0], std=np.inf, source_indices=(0, 1)
        )
        rep_o = ltbo(self.operator, statistic, self.autonomy, self.params)
        rep = ltb(self.operator, self.autonomy, self.params)
        np.testing.assert_array_equal(
            rep_o.control.trajectory.points, rep.control.trajectory.points
        )

    def test_conditioning_on_own_mode_is_fixed_point(self):
        f_bar = Trajectory.from_stacked(TIMES, mixture_argmax(self.autonomy.mixture))
        statistic = OperatorStatistic("full-trajectory", f_bar, source_indices=(0,))
        rep = ltbo(self.operator, statistic, self.autonomy, self.params, gains=BlendGains(0.0))
        np.testing.assert_allclose(
            rep.control.trajectory.stacked(), f_bar.stacked(), atol=1e-8
        )

    def test_double_counting_witness_differs_from_ctb(self):
        h_bar = Trajectory.from_stacked(TIMES, mixture_argmax(self.operator.mixture))
        statistic = OperatorStatistic("full-trajectory", h_bar, source_indices=(0,))
        rep_o = ltbo(self.operator, statistic, self.autonomy, self.params)
        rep_c = ctb(self.operator, self.autonomy, self.params, 1, samples=[h_bar])
        gap = np.max(
            np.abs(rep_o.control.trajectory.stacked() - rep_c.control.trajectory.stacked())
        )
        assert gap > 1e-7
        assert rep_o.diagnostics["operator_data_used_twice"] == 1.0

    def test_provenance_enforced(self):
        statistic = OperatorStatistic("goal-point", [0.0, 0.0], std=0.5, source_indices=(7,))
        with pytest.raises(ProvenanceError):
            ltbo(self.operator, statistic, self.autonomy, self.params)


class TestCTB:
    def setup_method(self):
        rng = np.random.default_rng(6)
        self.operator = unimodal(rng.uniform(-1, 1, DIM), 0.3)
        self.autonomy = bimodal(
            rng.uniform(-1, 1, DIM), rng.uniform(-1, 1, DIM) + 2.5, var=0.5
        )
        self.params = InteractionParams()

    def test_single_forced_sample_is_conditioned_argmax(self):
        h_bar = Trajectory.from_stacked(TIMES, mixture_argmax(self.operator.mixture))
        rep = ctb(self.operator, self.autonomy, self.params, 1, samples=[h_bar])
        pseudo = GaussianDensity(h_bar.stacked(), self.params.gamma * np.eye(DIM))
        conditioned, _ = mixture_times_gaussian(self.autonomy.mixture, pseudo)
        expected = mixture_argmax(conditioned)
        np.testing.assert_allclose(rep.control.trajectory.stacked(), expected, atol=1e-8)

    def test_duplicated_sample_merges_exactly(self):
        h_bar = Trajectory.from_stacked(TIMES, mixture_argmax(self.operator.mixture))
        rep_one = ctb(self.operator, self.autonomy, self.params, 1, samples=[h_bar])
        rep_dup = ctb(self.operator, self.autonomy, self.params, 2, samples=[h_bar, h_bar])
        np.testing.assert_array_equal(
            rep_one.control.trajectory.points, rep_dup.control.trajectory.points
        )
        assert rep_dup.diagnostics["n_samples_unique"] == 1.0

    def test_weight_normalization(self):
        rep = ctb(self.operator, self.autonomy, self.params, 32, seed=0)
        assert abs(rep.diagnostics["weight_sum"] - 1.0) < 1e-9

    def test_deterministic_given_seed(self):
        a = ctb(self.operator, self.autonomy, self.params, 16, seed=9)
        b = ctb(self.operator, self.autonomy, self.params, 16, seed=9)
        np.testing.assert_array_equal(
            a.control.trajectory.points, b.control.trajectory.points
        )

    def test_count_precondition(self):
        with pytest.raises(ContractViolation):
            ctb(self.operator, self.autonomy, self.params, 0)


class TestPSC:
    def test_unimodal_closed_form(self):
        rng = np.random.default_rng(1)
        for i in range(10):
            gamma = float(np.exp(rng.uniform(np.log(0.1), np.log(10))))
            sigma_r = float(np.exp(rng.uniform(np.log(0.1), np.log(10))))
            z_h = rng.uniform(-5, 5, DIM)
            f_bar = rng.uniform(-5, 5, DIM)
            report = psc_map(
                unimodal(z_h, 1e-12),
                unimodal(f_bar, sigma_r),
                params=InteractionParams(gamma=gamma),
                search_budget=32,
                seed=i,
            )
            k_h = sigma_r / (sigma_r + gamma)
            np.testing.assert_allclose(
                report.control.trajectory.stacked(),
                k_h * z_h + (1 - k_h) * f_bar,
                atol=1e-6,
            )

    def test_dominates_ltb_by_construction(self):
        rng = np.random.default_rng(12)
        params = InteractionParams()
        for i in range(8):
            operator = bimodal(rng.uniform(-2, 2, DIM), rng.uniform(-2, 2, DIM))
            autonomy = bimodal(rng.uniform(-2, 2, DIM), rng.uniform(-2, 2, DIM))
            report = psc_map(operator, autonomy, params=params, search_budget=128, seed=i)
            assert (
                report.diagnostics["joint_log_density"]
                >= report.diagnostics["ltb_joint_log_density"] - 1e-12
            )

    def test_deterministic_reports(self):
        operator = bimodal(np.zeros(DIM), np.ones(DIM))
        autonomy = bimodal(np.full(DIM, 0.5), np.full(DIM, -0.5))
        a = psc_map(operator, autonomy, params=InteractionParams(), search_budget=256, seed=3)
        b = psc_map(operator, autonomy, params=InteractionParams(), search_budget=256, seed=3)
        assert a.to_json_dict() == b.to_json_dict()

    def test_scale_free_argmax(self):
        # shifting unnormalized log-weights by a constant (scaling the
        # density) leaves the chosen trajectory bit-identical
        rng = np.random.default_rng(2)
        means = (rng.uniform(-2, 2, DIM), rng.uniform(-2, 2, DIM))
        comps = tuple(GaussianDensity(m, 0.5 * np.eye(DIM)) for m in means)
        base = TrajectoryBelief(TIMES, GaussianMixture(comps, np.log([0.7, 0.3])))
        shifted = TrajectoryBelief(
            TIMES, GaussianMixture(comps, np.log([0.7, 0.3]) + 123.0)
        )
        autonomy = unimodal(np.zeros(DIM), 1.0)
        a = psc_map(base, autonomy, params=InteractionParams(), search_budget=64, seed=0)
        b = psc_map(shifted, autonomy, params=InteractionParams(), search_budget=64, seed=0)
        np.testing.assert_array_equal(
            a.control.trajectory.points, b.control.trajectory.points
        )

    def test_infeasibility_error(self):
        broken = TrajectoryBelief.unimodal(
            TIMES, GaussianDensity(np.zeros(DIM), np.eye(DIM))
        )
        nan_mean = np.zeros(DIM)
        object.__setattr__(
            broken.mixture.components[0], "mean", np.full(DIM, np.nan)
        )
        with pytest.raises(InfeasibilityError):
            psc_map(broken, unimodal(np.zeros(DIM), 1.0), search_budget=4, seed=0)

    def test_tie_flag_on_symmetric_candidates(self):
        comp = GaussianDensity(np.zeros(DIM), np.eye(DIM))
        operator = TrajectoryBelief(TIMES, GaussianMixture((comp, comp), np.log([0.5, 0.5])))
        autonomy = unimodal(np.zeros(DIM), 1.0)
        report = psc_map(operator, autonomy, params=InteractionParams(), search_budget=0, seed=0)
        assert report.diagnostics["tie"] == 1.0

    def test_mode_selection_in_two_mode_field(self):
        # operator near the weaker autonomy mode: the chosen trajectory
        # stays in that mode's basin
        rng = np.random.default_rng(7)
        strong = rng.uniform(-1, 1, DIM)
        weak = strong + 4.0
        autonomy = bimodal(strong, weak, var=0.3, weights=(0.7, 0.3))
        operator = unimodal(weak + rng.normal(0, 0.05, DIM), 0.2)
        report = psc_map(operator, autonomy, params=InteractionParams(), search_budget=256, seed=0)
        chosen = report.control.trajectory.stacked()
        assert np.linalg.norm(chosen - weak) < np.linalg.norm(chosen - strong)
        assert report.diagnostics["autonomy_mode_index"] == 1.0
