import json

import numpy as np
import pytest

from blendlab.errors import ContractViolation
from blendlab.trajectory import OPERATOR, ObservationLog, Trajectory, crowd_agent


def line(n=5, dt=0.25, v=(1.0, 0.0)):
    times = dt * np.arange(n)
    pts = np.outer(times, v)
    return Trajectory(times, pts)


class TestTrajectory:
    def test_invariants(self):
        with pytest.raises(ContractViolation):
            Trajectory([0.0, 0.0], [[0, 0], [1, 1]])  # not strictly increasing
        with pytest.raises(ContractViolation):
            Trajectory([0.0, 1.0], [[0, 0]])  # length mismatch
        with pytest.raises(ContractViolation):
            Trajectory([], np.empty((0, 2)))

    def test_stacking_roundtrip(self):
        traj = line()
        back = Trajectory.from_stacked(traj.times, traj.stacked())
        np.testing.assert_array_equal(back.points, traj.points)
        assert traj.stacked().shape == (10,)
        # interleaved layout: (x1, y1, x2, y2, ...)
        assert traj.stacked()[2] == traj.points[1, 0]

    def test_speed_flagging_not_clipping(self):
        fast = Trajectory([0.0, 0.25], [[0, 0], [2.0, 0]])  # 8 m/s
        assert fast.max_speed() == pytest.approx(8.0)
        assert not fast.is_feasible(2.0)
        assert fast.is_feasible(10.0)
        np.testing.assert_array_equal(fast.points[1], [2.0, 0.0])  # untouched

    def test_json_roundtrip(self):
        traj = line()
        back = Trajectory.from_dict(json.loads(json.dumps(traj.to_dict())))
        np.testing.assert_array_equal(back.times, traj.times)
        np.testing.assert_array_equal(back.points, traj.points)

    def test_immutability(self):
        traj = line()
        with pytest.raises(ValueError):
            traj.points[0, 0] = 9.0


class TestObservationLog:
    def test_add_and_query(self):
        log = ObservationLog()
        log.add(OPERATOR, 0.0, [0.0, 0.0], 0.1)
        log.add(OPERATOR, 0.5, [0.5, 0.0], 0.1)
        log.add(crowd_agent(0), 0.0, [3.0, 1.0], 0.2)
        assert log.agents() == ["crowd0", OPERATOR]
        assert log.count(OPERATOR) == 2
        np.testing.assert_array_equal(log.times(OPERATOR), [0.0, 0.5])
        t, p = log.last(OPERATOR)
        assert t == 0.5 and p[0] == 0.5

    def test_timestamps_non_decreasing(self):
        log = ObservationLog()
        log.add(OPERATOR, 1.0, [0, 0], 0.1)
        with pytest.raises(ContractViolation):
            log.add(OPERATOR, 0.5, [0, 0], 0.1)
        log.add(OPERATOR, 1.0, [1, 1], 0.1)  # equal is allowed

    def test_noise_must_be_positive(self):
        log = ObservationLog()
        with pytest.raises(ContractViolation):
            log.add(OPERATOR, 0.0, [0, 0], 0.0)

    def test_window(self):
        log = ObservationLog()
        for k in range(10):
            log.add(OPERATOR, 0.1 * k, [k, 0.0], 0.1)
        assert log.times(OPERATOR, last_k=3).shape == (3,)
        assert log.points(OPERATOR, last_k=3)[0, 0] == 7.0

    def test_json_roundtrip_schema_fields(self):
        log = ObservationLog()
        log.add(OPERATOR, 0.0, [0.0, 1.0], 0.1)
        log.add("robot", 0.0, [0.5, 0.5], 0.05)
        records = json.loads(log.to_json())
        assert {"agent", "times", "points", "noise_std"} == set(records[0])
        back = ObservationLog.from_json(log.to_json())
        assert back.agents() == log.agents()
        np.testing.assert_array_equal(back.points(OPERATOR), log.points(OPERATOR))
