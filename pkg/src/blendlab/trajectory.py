"""Discretized trajectories and timestamped agent observations.

JSON layout (used by the CLI and the service):

* Trajectory: ``{"times": [t0, ...], "points": [[x, y], ...]}``
* ObservationLog: a list of per-agent records
  ``{"agent": "operator", "times": [...], "points": [[x, y], ...],
  "noise_std": [...]}`` sorted by agent name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

DEFAULT_V_MAX = 2.0

OPERATOR = "operator"
ROBOT = "robot"


def crowd_agent(index):
    """Agent id for crowd member `index` (zero-based)."""
    return f"crowd{int(index)}"


@dataclass(frozen=True)
class Trajectory:
    """A path of 2-D waypoints on a strictly increasing time grid."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ContractViolation(f"points must have shape (T, 2), got {points.shape}")
        if times.shape[0] != points.shape[0]:
            raise ContractViolation(
                f"{times.shape[0]} times but {points.shape[0]} waypoints"
            )
        if times.shape[0] == 0:
            raise ContractViolation("trajectory must contain at least one waypoint")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(points)):
            raise ContractViolation("times and points must be finite")
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0):
            raise ContractViolation("times must be strictly increasing")
        times.setflags(write=False)
        points = np.array(points, dtype=float)
        points.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    def __len__(self):
        return self.times.shape[0]

    def stacked(self):
        """Waypoints flattened to (2T,), interleaved (x1, y1, x2, y2, ...)."""
        return self.points.reshape(-1)

    @classmethod
    def from_stacked(cls, times, stacked):
        stacked = np.asarray(stacked, dtype=float).reshape(-1)
        return cls(times, stacked.reshape(-1, 2))

    def speeds(self):
        """Per-segment speeds (m/s); empty for a single waypoint."""
        if len(self) < 2:
            return np.empty(0)
        steps = np.diff(self.points, axis=0)
        return np.linalg.norm(steps, axis=1) / np.diff(self.times)

    def max_speed(self):
        sp = self.speeds()
        return float(sp.max()) if sp.size else 0.0

    def is_feasible(self, v_max=DEFAULT_V_MAX):
        """Whether every segment respects the speed cap (never silently clipped)."""
        return self.max_speed() <= v_max + 1e-9

    def to_dict(self):
        return {"times": self.times.tolist(), "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["times"]), np.asarray(data["points"]))


class ObservationLog:
    """Timestamped position measurements, grouped per agent.

    Timestamps must be non-decreasing per agent and every noise standard
    deviation strictly positive.
    """

    def __init__(self):
        self._agents = {}

    def add(self, agent, time, position, noise_std):
        time = float(time)
        position = np.asarray(position, dtype=float).reshape(-1)
        noise_std = float(noise_std)
        if position.shape != (2,):
            raise ContractViolation(f"position must be 2-D, got shape {position.shape}")
        if not noise_std > 0.0:
            raise ContractViolation(f"noise_std must be positive, got {noise_std!r}")
        entries = self._agents.setdefault(str(agent), [])
        if entries and time < entries[-1][0] - 1e-12:
            raise ContractViolation(
                f"timestamps for agent '{agent}' must be non-decreasing"
            )
        entries.append((time, position, noise_std))

    def agents(self):
        return sorted(self._agents)

    def has(self, agent):
        return str(agent) in self._agents

    def count(self, agent):
        return len(self._agents.get(str(agent), ()))

    def times(self, agent, last_k=None):
        return np.array([e[0] for e in self._entries(agent, last_k)])

    def points(self, agent, last_k=None):
        entries = self._entries(agent, last_k)
        return np.stack([e[1] for e in entries]) if entries else np.empty((0, 2))

    def noise_stds(self, agent, last_k=None):
        return np.array([e[2] for e in self._entries(agent, last_k)])

    def last(self, agent):
        entries = self._agents.get(str(agent))
        if not entries:
            return None
        t, p, _ = entries[-1]
        return t, p

    def _entries(self, agent, last_k=None):
        entries = self._agents.get(str(agent), [])
        if last_k is not None:
            return entries[-int(last_k):]
        return entries

    def to_records(self):
        records = []
        for agent in self.agents():
            entries = self._agents[agent]
            records.append(
                {
                    "agent": agent,
                    "times": [e[0] for e in entries],
                    "points": [e[1].tolist() for e in entries],
                    "noise_std": [e[2] for e in entries],
                }
            )
        return records

    @classmethod
    def from_records(cls, records):
        log = cls()
        for rec in records:
            for t, p, s in zip(rec["times"], rec["points"], rec["noise_std"]):
                log.add(rec["agent"], t, p, s)
        return log

    def to_json(self):
        return json.dumps(self.to_records())

    @classmethod
    def from_json(cls, text):
        return cls.from_records(json.loads(text))
