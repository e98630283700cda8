"""Interaction potentials and the full unnormalized joint log-density.

Two couplings: an operator-robot agreeability term (squared-distance
Gaussian, strength 1/gamma) and a robot-crowd repulsion term (product of
per-waypoint, per-pedestrian repulsions).  Both are <= 0 in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .gaussians import GaussianMixture


@dataclass(frozen=True)
class InteractionParams:
    """Coupling parameters; all strictly positive, crowd_alpha < 1."""

    gamma: float = 0.5
    crowd_alpha: float = 0.9
    crowd_lengthscale: float = 0.6
    safety_radius: float = 0.4

    def __post_init__(self):
        if not self.gamma > 0:
            raise ContractViolation(f"gamma must be positive, got {self.gamma!r}")
        if not 0 < self.crowd_alpha < 1:
            raise ContractViolation(
                f"crowd_alpha must lie in (0, 1), got {self.crowd_alpha!r}"
            )
        if not self.crowd_lengthscale > 0:
            raise ContractViolation("crowd_lengthscale must be positive")
        if not self.safety_radius > 0:
            raise ContractViolation("safety_radius must be positive")


def _check_grid(a, b):
    if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=0.0, atol=1e-9):
        raise ContractViolation("trajectories are not on the same time grid")


def agreeability_log(h, f_r, params, scope="trajectory"):
    """Log of the operator-robot agreeability potential.

    -(1 / (2 gamma)) * sum_t ||h(t) - f_r(t)||^2; zero iff the
    trajectories coincide.  scope="first-step" restricts the sum to the
    first waypoint after the current one (single-action coupling);
    the default couples whole trajectories.
    """
    _check_grid(h, f_r)
    diff = h.points - f_r.points
    if scope == "first-step":
        diff = diff[1:2] if len(h) > 1 else diff[:1]
    elif scope != "trajectory":
        raise ContractViolation(f"unknown agreeability scope {scope!r}")
    return float(-np.sum(diff**2) / (2.0 * params.gamma))


def agreeability_log_stacked(h_vec, f_vec, gamma):
    """Agreeability on stacked vectors; batched over leading axes."""
    diff = np.asarray(h_vec, dtype=float) - np.asarray(f_vec, dtype=float)
    return -np.sum(diff**2, axis=-1) / (2.0 * gamma)


def crowd_avoidance_log(f_r, crowd, params):
    """Log of the robot-crowd cooperation potential.

    sum over pedestrians and waypoints of
    log(1 - alpha * exp(-d^2 / (2 l^2))); tends to zero as every
    separation grows.
    """
    total = 0.0
    for ped in crowd:
        _check_grid(f_r, ped)
        d2 = np.sum((f_r.points - ped.points) ** 2, axis=1)
        total += float(
            np.sum(
                np.log1p(
                    -params.crowd_alpha
                    * np.exp(-d2 / (2.0 * params.crowd_lengthscale**2))
                )
            )
        )
    return total


def crowd_avoidance_log_stacked(f_vec, crowd_vecs, alpha, lengthscale):
    """Stacked-vector form of the crowd potential; batched over leading axes."""
    f = np.asarray(f_vec, dtype=float)
    pts_f = f.reshape(f.shape[:-1] + (-1, 2))
    total = 0.0
    for c_vec in crowd_vecs:
        c = np.asarray(c_vec, dtype=float)
        pts_c = c.reshape(c.shape[:-1] + (-1, 2))
        d2 = np.sum((pts_f - pts_c) ** 2, axis=-1)
        total = total + np.sum(
            np.log1p(-alpha * np.exp(-d2 / (2.0 * lengthscale**2))), axis=-1
        )
    return total


@dataclass(frozen=True)
class JointModels:
    """Predictive mixtures for every agent on one shared grid."""

    times: np.ndarray
    operator: GaussianMixture
    robot: GaussianMixture
    crowd: tuple = ()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        dim = 2 * times.shape[0]
        if self.operator.dim != dim or self.robot.dim != dim:
            raise ConfigurationError("operator/robot models do not match the time grid")
        for c in self.crowd:
            if c.dim != dim:
                raise ConfigurationError("crowd model does not match the time grid")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "crowd", tuple(self.crowd))


def joint_log_density(h, f_r, crowd, models, params):
    """Unnormalized joint log-density of operator, robot, and crowd trajectories.

    Sum of both interaction potentials and every agent's predictive
    log-density; sufficient for argmax since normalization is constant.
    """
    if len(crowd) != len(models.crowd):
        raise ConfigurationError(
            f"{len(crowd)} crowd trajectories but {len(models.crowd)} crowd models"
        )
    for traj in (h, f_r, *crowd):
        if len(traj) != models.times.shape[0] or not np.allclose(
            traj.times, models.times, rtol=0.0, atol=1e-9
        ):
            raise ContractViolation("trajectory is not on the model grid")
    total = agreeability_log(h, f_r, params)
    total += crowd_avoidance_log(f_r, crowd, params)
    total += models.operator.logpdf(h.stacked())
    total += models.robot.logpdf(f_r.stacked())
    for traj, model in zip(crowd, models.crowd):
        total += model.logpdf(traj.stacked())
    return float(total)
