"""Predictive trajectory distributions for the operator, robot, and crowd.

Each agent gets a Gaussian-process posterior over its future waypoints:
squared-exponential kernel shared by the two coordinate axes, and a
constant-velocity extrapolation of the last observation as the mean
function.  Stacked-waypoint densities interleave coordinates as
(x1, y1, x2, y2, ...), so the full covariance is kron(K_time, I2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ColdStartError, ContractViolation
from .gaussians import (
    GaussianDensity,
    GaussianMixture,
    clamp_psd,
    cov_sqrt,
    logsumexp,
    mixture_argmax,
)
from .trajectory import Trajectory

GP_JITTER = 1e-8


@dataclass(frozen=True)
class GPPrior:
    """Squared-exponential kernel hyperparameters.

    lengthscale in seconds, signal_var in square meters.
    """

    lengthscale: float = 2.0
    signal_var: float = 1.0

    def __post_init__(self):
        if not self.lengthscale > 0 or not self.signal_var > 0:
            raise ContractViolation("lengthscale and signal_var must be positive")

    def kernel(self, t1, t2):
        t1 = np.asarray(t1, dtype=float).reshape(-1, 1)
        t2 = np.asarray(t2, dtype=float).reshape(1, -1)
        return self.signal_var * np.exp(-0.5 * ((t1 - t2) / self.lengthscale) ** 2)


def constant_velocity_mean(times_obs, points_obs, query_times):
    """Extrapolate the last observation at the velocity of the last segment."""
    times_obs = np.asarray(times_obs, dtype=float)
    points_obs = np.asarray(points_obs, dtype=float)
    query_times = np.asarray(query_times, dtype=float)
    last_t = times_obs[-1]
    last_p = points_obs[-1]
    if times_obs.shape[0] >= 2 and times_obs[-1] - times_obs[-2] > 1e-12:
        vel = (points_obs[-1] - points_obs[-2]) / (times_obs[-1] - times_obs[-2])
    else:
        vel = np.zeros(2)
    return last_p[None, :] + (query_times - last_t)[:, None] * vel[None, :]


def gp_regress(times_obs, points_obs, noise_stds, prior, query_times, jitter=GP_JITTER):
    """GP regression shared across the two axes.

    Returns (mean (Q, 2), time covariance (Q, Q)); no restriction on the
    query times, so interpolation checks can use it directly.
    """
    times_obs = np.asarray(times_obs, dtype=float).reshape(-1)
    points_obs = np.asarray(points_obs, dtype=float)
    noise_stds = np.asarray(noise_stds, dtype=float).reshape(-1)
    query_times = np.asarray(query_times, dtype=float).reshape(-1)

    mean_fn_obs = constant_velocity_mean(times_obs, points_obs, times_obs)
    mean_fn_query = constant_velocity_mean(times_obs, points_obs, query_times)

    k_tt = prior.kernel(times_obs, times_obs) + np.diag(noise_stds**2)
    k_qt = prior.kernel(query_times, times_obs)
    k_qq = prior.kernel(query_times, query_times)

    chol = np.linalg.cholesky(k_tt + jitter * np.eye(times_obs.shape[0]))
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, points_obs - mean_fn_obs))
    mean = mean_fn_query + k_qt @ alpha
    v = np.linalg.solve(chol, k_qt.T)
    cov = k_qq - v.T @ v + jitter * np.eye(query_times.shape[0])
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def stacked_density(mean_xy, cov_time):
    """Stack a per-axis GP posterior into one density over (x1, y1, x2, y2, ...)."""
    mean = np.asarray(mean_xy, dtype=float).reshape(-1)
    cov = np.kron(np.asarray(cov_time, dtype=float), np.eye(2))
    return GaussianDensity(mean, cov)


def gp_posterior(log, agent, prior, query_times, jitter=GP_JITTER, last_k=None):
    """Predictive density over an agent's future waypoints.

    Query times must not precede the last observation; an agent with no
    observations raises ColdStartError so the caller can fall back to a
    prior-only model.
    """
    if not log.has(agent) or log.count(agent) == 0:
        raise ColdStartError(f"no observations for agent '{agent}'")
    query_times = np.asarray(query_times, dtype=float).reshape(-1)
    times = log.times(agent, last_k)
    if np.any(query_times < times[-1] - 1e-9):
        raise ContractViolation(
            f"query times must not precede the last observation at t={times[-1]}"
        )
    mean, cov = gp_regress(
        times, log.points(agent, last_k), log.noise_stds(agent, last_k), prior, query_times, jitter
    )
    return stacked_density(mean, cov)


def goal_conditioned_posterior(base, times, goal, goal_time, goal_std):
    """Condition a stacked-waypoint density on a pseudo-observation of one waypoint.

    goal_time must lie on the density's time grid; goal_std -> infinity
    leaves the density unchanged.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    if 2 * times.shape[0] != base.dim:
        raise ContractViolation(
            f"time grid of length {times.shape[0]} does not match density dimension {base.dim}"
        )
    goal = np.asarray(goal, dtype=float).reshape(-1)
    if goal.shape != (2,):
        raise ContractViolation("goal must be a 2-D point")
    goal_std = float(goal_std)
    if not goal_std > 0:
        raise ContractViolation("goal_std must be positive")
    if not np.isfinite(goal_std):
        return base
    matches = np.nonzero(np.isclose(times, goal_time, rtol=0.0, atol=1e-9))[0]
    if matches.size == 0:
        raise ContractViolation(f"goal_time {goal_time} is not on the trajectory grid")
    idx = int(matches[0])
    sel = slice(2 * idx, 2 * idx + 2)

    cov_block = base.cov[:, sel]
    innovation_cov = base.cov[sel, sel] + goal_std**2 * np.eye(2)
    gain = np.linalg.solve(innovation_cov, cov_block.T).T
    mean = base.mean + gain @ (goal - base.mean[sel])
    cov = base.cov - gain @ cov_block.T
    cov = clamp_psd(cov)
    return GaussianDensity(mean, cov)


def sample_trajectories(density, times, count, seed):
    """Draw trajectories from a stacked-waypoint density.

    Deterministic given the seed.  Returned log-weights are the samples'
    log-densities normalized to sum to one in linear space.
    """
    if count < 1:
        raise ContractViolation(f"count must be >= 1, got {count}")
    times = np.asarray(times, dtype=float).reshape(-1)
    if 2 * times.shape[0] != density.dim:
        raise ContractViolation("time grid does not match density dimension")
    rng = np.random.default_rng(seed)
    root = cov_sqrt(density.cov)
    z = rng.standard_normal((count, density.dim))
    draws = density.mean[None, :] + z @ root.T
    log_dens = density.logpdf(draws)
    log_weights = log_dens - logsumexp(log_dens)
    return [
        (Trajectory.from_stacked(times, draws[i]), float(log_weights[i]))
        for i in range(count)
    ]


def _kmeanspp_init(endpoints, weights, k, rng):
    """k-means++ style seeding on sample endpoints."""
    n = endpoints.shape[0]
    first = int(rng.choice(n, p=weights / weights.sum()))
    centers = [first]
    for _ in range(k - 1):
        d2 = np.min(
            np.stack(
                [np.sum((endpoints - endpoints[c]) ** 2, axis=1) for c in centers]
            ),
            axis=0,
        )
        probs = weights * d2
        total = probs.sum()
        if total <= 0:
            remaining = [i for i in range(n) if i not in centers]
            centers.append(int(rng.choice(remaining)))
            continue
        centers.append(int(rng.choice(n, p=probs / total)))
    return centers


def fit_mixture(samples, k, seed=0, max_iter=200, tol=1e-9):
    """Weighted EM over stacked waypoints; deterministic given the seed.

    Initialization is k-means++ style seeding on the sample endpoints.
    """
    if not samples:
        raise ContractViolation("sample set is empty")
    if k < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")
    if len(samples) < k:
        raise ContractViolation(f"{len(samples)} samples cannot support {k} components")
    data = np.stack([traj.stacked() for traj, _ in samples])
    log_w = np.array([lw for _, lw in samples], dtype=float)
    weights = np.exp(log_w - logsumexp(log_w))
    n, dim = data.shape

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(data[:, -2:], weights, k, rng)
    dist2 = np.stack([np.sum((data[:, -2:] - data[c, -2:]) ** 2, axis=1) for c in centers])
    resp = np.zeros((k, n))
    resp[np.argmin(dist2, axis=0), np.arange(n)] = 1.0

    spread = max(float(np.var(data)), 1e-8)
    reg = 1e-6 * spread * np.eye(dim)
    mix = None
    prev_ll = -np.inf
    for _ in range(max_iter):
        # M-step (weighted by sample weights and responsibilities).
        wr = resp * weights[None, :]
        mass = wr.sum(axis=1)
        mass = np.maximum(mass, 1e-300)
        means = (wr @ data) / mass[:, None]
        comps = []
        for j in range(k):
            centered = data - means[j]
            cov = (centered.T * wr[j]) @ centered / mass[j]
            cov = clamp_psd(cov + reg)
            comps.append(GaussianDensity(means[j], cov))
        mix = GaussianMixture(tuple(comps), np.log(mass / mass.sum()))
        # E-step.
        comp_lp = mix.component_logpdfs(data) + mix.log_weights[:, None]
        ll = float(np.sum(weights * logsumexp(comp_lp, axis=0)))
        resp = np.exp(comp_lp - logsumexp(comp_lp, axis=0)[None, :])
        if abs(ll - prev_ll) <= tol * (1.0 + abs(ll)):
            break
        prev_ll = ll
    return mix


@dataclass(frozen=True)
class OperatorStatistic:
    """A derived quantity about the operator, with provenance.

    kind is one of "goal-point", "waypoint", "full-trajectory"; value is
    a 2-D point (goal/waypoint) or a Trajectory.  source_indices are the
    operator-log entries the statistic was computed from; they must all
    reference logged observations.
    """

    kind: str
    value: object
    time: float | None = None
    std: float | None = None
    source_indices: tuple = ()

    def __post_init__(self):
        if self.kind not in ("goal-point", "waypoint", "full-trajectory"):
            raise ContractViolation(f"unknown statistic kind {self.kind!r}")
        object.__setattr__(self, "source_indices", tuple(int(i) for i in self.source_indices))


@dataclass(frozen=True)
class TrajectoryBelief:
    """A mixture over stacked waypoints tied to its time grid.

    n_observations records how many operator-log entries backed the
    belief, which is what statistic provenance is checked against.
    """

    times: np.ndarray
    mixture: GaussianMixture
    n_observations: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if 2 * times.shape[0] != self.mixture.dim:
            raise ContractViolation(
                f"grid of {times.shape[0]} waypoints does not match mixture dimension {self.mixture.dim}"
            )
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def unimodal(cls, times, density, n_observations=0):
        return cls(times, GaussianMixture.single(density), n_observations)

    @property
    def horizon(self):
        return self.times.shape[0]

    def map_trajectory(self):
        """Most probable trajectory under the belief (mixture mode)."""
        point = mixture_argmax(self.mixture)
        return Trajectory.from_stacked(self.times, point)

    def mean_trajectory(self):
        weights = np.exp(self.mixture.log_weights)
        mean = weights @ self.mixture.means()
        return Trajectory.from_stacked(self.times, mean)

    def mode_trajectories(self):
        return [
            Trajectory.from_stacked(self.times, c.mean) for c in self.mixture.components
        ]
