"""The five shared-control arbitration algorithms.

lb    action-level linear blend of operator and autonomy commands
ltb   waypoint-wise linear blend of the two model modes
ltbo  ltb after biasing the autonomy with an operator statistic
ctb   argmax of a sample-conditioned mixture over autonomy posteriors
psc   argmax of the full joint over operator, robot, and crowd

Every algorithm is a pure function of its inputs and a seed; candidate
scoring reduces in stable candidate order with ties broken by the
lowest index.

Stable diagnostics keys (always floats):
  all methods     "k_h", "k_r"
  ltb/ltbo        "operator_mode_index", "autonomy_mode_index",
                  "operator_mode_logpdf", "autonomy_mode_logpdf"
  ltbo            "operator_data_used_twice", "log_renormalization"
  ctb             "n_samples_requested", "n_samples_unique", "weight_sum",
                  "mixture_size", "argmax_logpdf"
  psc             "joint_log_density", "agreeability_term",
                  "crowd_interaction_term", "operator_logpdf",
                  "autonomy_logpdf", "crowd_logpdf_total", "n_candidates",
                  "search_budget", "refine_passes_used", "start_index",
                  "tie", "ltb_joint_log_density", "operator_mode_index",
                  "autonomy_mode_index"
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InfeasibilityError, ProvenanceError
from .gaussians import (
    GaussianDensity,
    GaussianMixture,
    clamp_psd,
    cov_factor,
    logsumexp,
    mean_shift,
    mixture_argmax,
    mixture_times_gaussian,
)
from .interaction import (
    InteractionParams,
    agreeability_log_stacked,
    crowd_avoidance_log_stacked,
)
from .prediction import OperatorStatistic, TrajectoryBelief
from .trajectory import DEFAULT_V_MAX, Trajectory

METHODS = ("lb", "ltb", "ltbo", "ctb", "psc")


@dataclass(frozen=True)
class BlendGains:
    """Arbitration gains with K_h + K_R = 1 held exactly (K_R is derived)."""

    k_h: float

    def __post_init__(self):
        k = float(self.k_h)
        if not 0.0 <= k <= 1.0:
            raise ContractViolation(f"k_h must lie in [0, 1], got {k!r}")
        object.__setattr__(self, "k_h", k)

    @property
    def k_r(self):
        return 1.0 - self.k_h


@dataclass(frozen=True)
class SharedControl:
    """A shared-control trajectory plus the extracted next actuator command.

    The trajectory's first waypoint is the current position; the command
    is the first post-current waypoint displacement divided by dt,
    speed-clamped with an explicit flag instead of silent clipping.
    """

    trajectory: Trajectory
    next_command: np.ndarray
    speed_feasible: bool = True

    def __post_init__(self):
        cmd = np.asarray(self.next_command, dtype=float).reshape(-1)
        if cmd.shape != (2,):
            raise ContractViolation("next_command must be a 2-D action")
        if not np.all(np.isfinite(cmd)):
            raise ContractViolation("next_command must be finite")
        cmd.setflags(write=False)
        object.__setattr__(self, "next_command", cmd)

    @classmethod
    def from_trajectory(cls, traj, v_max=DEFAULT_V_MAX):
        if len(traj) < 2:
            return cls(traj, np.zeros(2), True)
        dt = float(traj.times[1] - traj.times[0])
        raw = (traj.points[1] - traj.points[0]) / dt
        speed = float(np.linalg.norm(raw))
        if speed > v_max + 1e-9:
            return cls(traj, raw * (v_max / speed), False)
        return cls(traj, raw, True)

    def to_dict(self):
        return {
            "trajectory": self.trajectory.to_dict(),
            "next_command": self.next_command.tolist(),
            "speed_feasible": bool(self.speed_feasible),
        }


@dataclass(frozen=True)
class ArbitrationReport:
    """Method identifier, the resulting shared control, and diagnostics."""

    method: str
    control: SharedControl
    diagnostics: dict

    def to_json_dict(self):
        return {
            "method": self.method,
            "control": self.control.to_dict(),
            "diagnostics": {k: float(v) for k, v in sorted(self.diagnostics.items())},
        }

    def to_json(self):
        return json.dumps(self.to_json_dict())


def linear_blend(u_h, u_r, gains):
    """Action-level blend K_h * u_h + K_R * u_r."""
    u_h = np.asarray(u_h, dtype=float)
    u_r = np.asarray(u_r, dtype=float)
    return gains.k_h * u_h + gains.k_r * u_r


def blend_trajectories(a, b, gains):
    """Waypoint-wise linear blend of two trajectories on one grid."""
    if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=0.0, atol=1e-9):
        raise ContractViolation("trajectories are not on the same time grid")
    return Trajectory(a.times, gains.k_h * a.points + gains.k_r * b.points)


def default_gains(autonomy, params):
    """K_h from the trace-averaged covariance of the autonomy's top mode.

    sigma_R = tr(cov)/D for the highest-weight component, then
    K_h = sigma_R / (sigma_R + gamma), which makes the unimodal
    equivalence with the probabilistic blend exact and auditable.
    """
    top = int(np.argmax(autonomy.mixture.log_weights))
    comp = autonomy.mixture.components[top]
    sigma_r = float(np.trace(comp.cov)) / comp.dim
    return BlendGains(sigma_r / (sigma_r + params.gamma))


def _shared_grid(*beliefs):
    base = beliefs[0].times
    for b in beliefs[1:]:
        if b.times.shape != base.shape or not np.allclose(b.times, base, rtol=0.0, atol=1e-9):
            raise ContractViolation("beliefs are not on a shared time grid")
    return base


def _mode_index(mixture, x):
    return int(np.argmax(mixture.log_responsibilities(x)))


def ltb(operator, autonomy, params, gains=None, v_max=DEFAULT_V_MAX):
    """Linear trajectory blending of the two model modes."""
    times = _shared_grid(operator, autonomy)
    gains = gains if gains is not None else default_gains(autonomy, params)
    h_bar = mixture_argmax(operator.mixture)
    f_bar = mixture_argmax(autonomy.mixture)
    blended = Trajectory.from_stacked(times, gains.k_h * h_bar + gains.k_r * f_bar)
    diagnostics = {
        "k_h": gains.k_h,
        "k_r": gains.k_r,
        "operator_mode_index": _mode_index(operator.mixture, h_bar),
        "autonomy_mode_index": _mode_index(autonomy.mixture, f_bar),
        "operator_mode_logpdf": operator.mixture.logpdf(h_bar),
        "autonomy_mode_logpdf": autonomy.mixture.logpdf(f_bar),
    }
    return ArbitrationReport("ltb", SharedControl.from_trajectory(blended, v_max), diagnostics)


def _condition_on_point(mixture, point, idx, std):
    """Per-component conditioning on a 2-D pseudo-observation of waypoint idx."""
    sel = slice(2 * idx, 2 * idx + 2)
    comps = []
    log_zs = np.empty(mixture.size)
    for k, comp in enumerate(mixture.components):
        block = comp.cov[:, sel]
        innovation = comp.cov[sel, sel] + std**2 * np.eye(2)
        gain = np.linalg.solve(innovation, block.T).T
        mean = comp.mean + gain @ (point - comp.mean[sel])
        cov = clamp_psd(comp.cov - gain @ block.T)
        comps.append(GaussianDensity(mean, cov))
        diff = point - comp.mean[sel]
        chol = np.linalg.cholesky(innovation)
        y = np.linalg.solve(chol, diff)
        log_zs[k] = -0.5 * (
            2 * np.log(2 * np.pi) + 2 * np.sum(np.log(np.diag(chol))) + y @ y
        )
    raw = mixture.log_weights + log_zs
    return GaussianMixture(tuple(comps), raw), float(logsumexp(raw))


def _condition_autonomy(autonomy, statistic, params):
    """Bias the autonomy mixture with an operator statistic.

    Full-trajectory statistics reweight by the agreeability potential
    (product with an isotropic Gaussian of variance gamma); point
    statistics condition each component on a pseudo-observation.
    Returns (mixture, log_renormalization).
    """
    times = autonomy.times
    if statistic.kind == "full-trajectory":
        traj = statistic.value
        if len(traj) != times.shape[0] or not np.allclose(traj.times, times, atol=1e-9):
            raise ContractViolation("statistic trajectory is not on the autonomy grid")
        pseudo = GaussianDensity(traj.stacked(), params.gamma * np.eye(autonomy.mixture.dim))
        mixture, info = mixture_times_gaussian(autonomy.mixture, pseudo)
        return mixture, info["log_renormalization"]
    if statistic.std is None:
        raise ContractViolation("point statistics require a std")
    if not np.isfinite(statistic.std):
        return autonomy.mixture, 0.0
    when = times[-1] if statistic.time is None else statistic.time
    matches = np.nonzero(np.isclose(times, when, rtol=0.0, atol=1e-9))[0]
    if matches.size == 0:
        raise ContractViolation(f"statistic time {when} is not on the autonomy grid")
    point = np.asarray(statistic.value, dtype=float).reshape(2)
    return _condition_on_point(autonomy.mixture, point, int(matches[0]), statistic.std)


def ltbo(operator, statistic, autonomy, params, gains=None, v_max=DEFAULT_V_MAX):
    """Operator-biased linear trajectory blending.

    The autonomy is conditioned on a statistic drawn from the operator's
    logged data, then blended with the operator mode exactly as in ltb.
    The operator data therefore enters twice, which the diagnostics flag.
    """
    times = _shared_grid(operator, autonomy)
    for idx in statistic.source_indices:
        if idx < 0 or idx >= operator.n_observations:
            raise ProvenanceError(
                f"statistic references observation {idx} outside the operator log "
                f"({operator.n_observations} entries)"
            )
    gains = gains if gains is not None else default_gains(autonomy, params)
    conditioned, log_renorm = _condition_autonomy(autonomy, statistic, params)
    h_bar = mixture_argmax(operator.mixture)
    f_bar_h = mixture_argmax(conditioned)
    blended = Trajectory.from_stacked(times, gains.k_h * h_bar + gains.k_r * f_bar_h)
    diagnostics = {
        "k_h": gains.k_h,
        "k_r": gains.k_r,
        "operator_data_used_twice": 1.0,
        "log_renormalization": log_renorm,
        "operator_mode_index": _mode_index(operator.mixture, h_bar),
        "autonomy_mode_index": _mode_index(conditioned, f_bar_h),
        "operator_mode_logpdf": operator.mixture.logpdf(h_bar),
        "autonomy_mode_logpdf": conditioned.logpdf(f_bar_h),
    }
    return ArbitrationReport("ltbo", SharedControl.from_trajectory(blended, v_max), diagnostics)


def _conditioned_sum(autonomy, samples, weights, gamma):
    """The weighted mixture sum over per-sample conditioned autonomy posteriors.

    Conditioning on a sample h_b is the agreeability reweighting: each
    autonomy component is multiplied by N(. | h_b, gamma I) and the
    per-sample mixture renormalized before being scaled by w_b.
    """
    dim = autonomy.mixture.dim
    n_aut = autonomy.mixture.size
    eye = np.eye(dim)
    comps = []
    log_w = []
    shared = []
    for comp in autonomy.mixture.components:
        prec = cov_factor(comp.cov)["precision"]
        combined = prec + eye / gamma
        cov = np.linalg.solve(combined, eye)
        cov = clamp_psd(0.5 * (cov + cov.T))
        marg = comp.cov + gamma * eye
        chol = np.linalg.cholesky(marg)
        shared.append(
            {
                "combined": combined,
                "cov": GaussianDensity(comp.mean, cov).cov,  # validated, shareable
                "prec_mu": prec @ comp.mean,
                "chol": chol,
                "logdet": 2.0 * float(np.sum(np.log(np.diag(chol)))),
                "mean": comp.mean,
            }
        )
    log_z = np.empty((samples.shape[0], n_aut))
    means = []
    for n, info in enumerate(shared):
        diffs = samples - info["mean"]
        y = np.linalg.solve(info["chol"], diffs.T)
        log_z[:, n] = -0.5 * (dim * np.log(2 * np.pi) + info["logdet"] + np.sum(y * y, axis=0))
        m = np.linalg.solve(info["combined"], (samples / gamma).T + info["prec_mu"][:, None]).T
        means.append(m)
    per_sample = autonomy.mixture.log_weights[None, :] + log_z
    per_sample = per_sample - logsumexp(per_sample, axis=1)[:, None]
    for b in range(samples.shape[0]):
        for n in range(n_aut):
            comps.append(GaussianDensity(means[n][b], shared[n]["cov"]))
            log_w.append(np.log(weights[b]) + per_sample[b, n])
    return GaussianMixture(tuple(comps), np.array(log_w))


def ctb(operator, autonomy, params, n_samples, seed=0, samples=None, v_max=DEFAULT_V_MAX):
    """Conditional trajectory blending.

    Draws operator samples with their model probabilities as weights,
    merges exact duplicates before conditioning, conditions the autonomy
    on each sample, and returns the argmax of the weighted mixture sum.
    No linear arbitration step is involved.
    """
    times = _shared_grid(operator, autonomy)
    if samples is not None:
        draws = np.stack([s.stacked() for s in samples])
        n_samples = draws.shape[0]
    else:
        if n_samples < 1:
            raise ContractViolation(f"n_samples must be >= 1, got {n_samples}")
        rng = np.random.default_rng(seed)
        draws, _ = operator.mixture.sample(n_samples, rng)
    log_dens = np.atleast_1d(operator.mixture.logpdf(draws))
    weights = np.exp(log_dens - logsumexp(log_dens))

    # Duplicate samples merge weights (first-occurrence order) before conditioning.
    seen = {}
    merged = []
    for i in range(draws.shape[0]):
        key = draws[i].tobytes()
        if key in seen:
            merged[seen[key]][1] += weights[i]
        else:
            seen[key] = len(merged)
            merged.append([draws[i], weights[i]])
    uniq = np.stack([m[0] for m in merged])
    uniq_w = np.array([m[1] for m in merged])

    mixture = _conditioned_sum(autonomy, uniq, uniq_w, params.gamma)

    n_aut = autonomy.mixture.size
    lw = mixture.log_weights.reshape(uniq.shape[0], n_aut)
    starts = [int(np.argmax(lw[:, n])) * n_aut + n for n in range(n_aut)]
    order = np.argsort(-mixture.log_weights)[:16]
    start_idx = sorted(set(starts) | set(int(i) for i in order))
    start_pts = np.stack([mixture.components[i].mean for i in start_idx])
    scores = mixture.logpdf(start_pts)
    best = np.array(start_pts[int(np.argmax(scores))])
    best_val = float(np.max(scores))
    x, fx = mean_shift(mixture, best)
    if fx > best_val:
        best, best_val = x, fx

    diagnostics = {
        "n_samples_requested": float(n_samples),
        "n_samples_unique": float(uniq.shape[0]),
        "weight_sum": float(np.sum(np.exp(mixture.log_weights))),
        "mixture_size": float(mixture.size),
        "argmax_logpdf": best_val,
        "k_h": float("nan"),
        "k_r": float("nan"),
    }
    control = SharedControl.from_trajectory(Trajectory.from_stacked(times, best), v_max)
    return ArbitrationReport("ctb", control, diagnostics)


class _JointObjective:
    """The unnormalized joint log-density over stacked (h, f, crowd) vectors."""

    def __init__(self, operator, autonomy, crowd, params):
        self.op = operator.mixture
        self.aut = autonomy.mixture
        self.crowd = [c.mixture for c in crowd]
        self.params = params
        self.dim = self.op.dim
        self._precisions = {}

    def precisions(self, mixture):
        key = id(mixture)
        if key not in self._precisions:
            self._precisions[key] = [
                cov_factor(c.cov)["precision"] for c in mixture.components
            ]
        return self._precisions[key]

    def score(self, h, f, crowd_vecs):
        """Batched over leading axis when inputs are (M, D)."""
        p = self.params
        s = agreeability_log_stacked(h, f, p.gamma)
        s = s + self.op.logpdf(h) + self.aut.logpdf(f)
        for c_vec, c_mix in zip(crowd_vecs, self.crowd):
            s = s + c_mix.logpdf(c_vec)
            s = s + crowd_avoidance_log_stacked(
                f, [c_vec], p.crowd_alpha, p.crowd_lengthscale
            )
        return s

    def value(self, state):
        h, f, crowd_vecs = state
        return float(self.score(h, f, crowd_vecs))


def _mixture_block_terms(mixture, precisions, x, sel):
    """Gradient and Hessian block of log(mixture) at x for slice sel."""
    resp = np.exp(mixture.log_responsibilities(x))
    grad = np.zeros(2)
    hess = np.zeros((2, 2))
    g_total = np.zeros(2)
    for k in range(mixture.size):
        r = resp[k]
        if r <= 0.0:
            continue
        g_full = precisions[k] @ (mixture.components[k].mean - x)
        g_blk = g_full[sel]
        grad += r * g_blk
        hess += r * (-precisions[k][sel, sel] + np.outer(g_blk, g_blk))
        g_total += r * g_blk
    hess -= np.outer(g_total, g_total)
    return grad, hess


def _repulsion_block_terms(r, alpha, lengthscale):
    """Gradient/Hessian of log(1 - alpha exp(-|r|^2 / 2 l^2)) wrt r."""
    l2 = lengthscale**2
    g = float(np.exp(-float(r @ r) / (2.0 * l2)))
    denom = 1.0 - alpha * g
    coef = alpha * g / (l2 * denom)
    grad = coef * r
    hess = coef * np.eye(2) - (alpha * g / (l2**2 * denom**2)) * np.outer(r, r)
    return grad, hess


def _belief_key(belief):
    """Stable identity of a belief from its component means."""
    digest = hashlib.blake2b(
        np.ascontiguousarray(belief.mixture.means()).tobytes(), digest_size=16
    ).digest()
    return [int(x) for x in np.frombuffer(digest, dtype=np.uint64)]


def _as_entropy(seed):
    if isinstance(seed, (list, tuple)):
        return int(abs(hash(tuple(int(s) for s in seed)))) % (2**63)
    return int(seed)


def _repulsion_row(f, c_vec, alpha, lengthscale):
    """Per-waypoint repulsion terms between stacked f and one crowd vector."""
    d2 = np.sum((f.reshape(-1, 2) - c_vec.reshape(-1, 2)) ** 2, axis=1)
    return np.log1p(-alpha * np.exp(-d2 / (2.0 * lengthscale**2)))


class _RefineState:
    """Joint value split into per-term caches for cheap block updates."""

    def __init__(self, objective, h, f, crowd_vecs):
        p = objective.params
        self.obj = objective
        self.h = np.array(h)
        self.f = np.array(f)
        self.crowd = [np.array(c) for c in crowd_vecs]
        diff = (self.h - self.f).reshape(-1, 2)
        self.agree = -np.sum(diff**2, axis=1) / (2.0 * p.gamma)
        self.lp_op = float(objective.op.logpdf(self.h))
        self.lp_aut = float(objective.aut.logpdf(self.f))
        self.lp_crowd = [float(m.logpdf(c)) for c, m in zip(self.crowd, objective.crowd)]
        self.rep = [
            _repulsion_row(self.f, c, p.crowd_alpha, p.crowd_lengthscale)
            for c in self.crowd
        ]

    def value(self):
        total = self.lp_op + self.lp_aut + float(np.sum(self.agree))
        for lp, row in zip(self.lp_crowd, self.rep):
            total += lp + float(np.sum(row))
        return total

    def try_block(self, var, t, new_block):
        """Value delta if the 2-D block of `var` at waypoint t became new_block.

        Returns (delta, undo_payload); apply_block commits the payload.
        """
        p = self.obj.params
        sel = slice(2 * t, 2 * t + 2)
        if var == "h":
            vec = self.h.copy()
            vec[sel] = new_block
            lp = float(self.obj.op.logpdf(vec))
            agree_t = -float(np.sum((new_block - self.f[sel]) ** 2)) / (2.0 * p.gamma)
            delta = (lp - self.lp_op) + (agree_t - self.agree[t])
            return delta, ("h", t, vec, lp, agree_t, None)
        if var == "f":
            vec = self.f.copy()
            vec[sel] = new_block
            lp = float(self.obj.aut.logpdf(vec))
            agree_t = -float(np.sum((self.h[sel] - new_block) ** 2)) / (2.0 * p.gamma)
            delta = (lp - self.lp_aut) + (agree_t - self.agree[t])
            rep_t = []
            for i, c in enumerate(self.crowd):
                d2 = float(np.sum((new_block - c[sel]) ** 2))
                val = float(np.log1p(-p.crowd_alpha * np.exp(-d2 / (2.0 * p.crowd_lengthscale**2))))
                rep_t.append(val)
                delta += val - self.rep[i][t]
            return delta, ("f", t, vec, lp, agree_t, rep_t)
        i = var[1]
        vec = self.crowd[i].copy()
        vec[sel] = new_block
        lp = float(self.obj.crowd[i].logpdf(vec))
        d2 = float(np.sum((self.f[sel] - new_block) ** 2))
        rep_val = float(np.log1p(-p.crowd_alpha * np.exp(-d2 / (2.0 * p.crowd_lengthscale**2))))
        delta = (lp - self.lp_crowd[i]) + (rep_val - self.rep[i][t])
        return delta, (("c", i), t, vec, lp, rep_val, None)

    def apply_block(self, payload):
        var, t, vec, lp, extra, rep_t = payload
        if var == "h":
            self.h = vec
            self.lp_op = lp
            self.agree[t] = extra
        elif var == "f":
            self.f = vec
            self.lp_aut = lp
            self.agree[t] = extra
            for i, val in enumerate(rep_t):
                self.rep[i][t] = val
        else:
            i = var[1]
            self.crowd[i] = vec
            self.lp_crowd[i] = lp
            self.rep[i][t] = extra


def _refine(objective, start, passes):
    """Block-coordinate ascent over 2-D waypoint blocks.

    Each block takes a Newton step (ridged when the block Hessian is not
    negative definite) with step halving on failure; a pass with no
    measurable gain stops the loop early.
    """
    state = _RefineState(objective, *start)
    p = objective.params
    n_way = objective.dim // 2
    value = state.value()
    passes_used = 0
    variables = [("f", objective.aut), ("h", objective.op)]
    variables += [(("c", i), objective.crowd[i]) for i in range(len(state.crowd))]
    for _ in range(passes):
        passes_used += 1
        gained = 0.0
        for var, mixture in variables:
            precisions = objective.precisions(mixture)
            for t in range(n_way):
                sel = slice(2 * t, 2 * t + 2)
                if var == "f":
                    vec = state.f
                elif var == "h":
                    vec = state.h
                else:
                    vec = state.crowd[var[1]]
                grad, hess = _mixture_block_terms(mixture, precisions, vec, sel)
                if var == "f":
                    grad += (state.h[sel] - state.f[sel]) / p.gamma
                    hess -= np.eye(2) / p.gamma
                    for c_vec in state.crowd:
                        g2, h2 = _repulsion_block_terms(
                            state.f[sel] - c_vec[sel], p.crowd_alpha, p.crowd_lengthscale
                        )
                        grad += g2
                        hess += h2
                elif var == "h":
                    grad += (state.f[sel] - state.h[sel]) / p.gamma
                    hess -= np.eye(2) / p.gamma
                else:
                    g2, h2 = _repulsion_block_terms(
                        state.f[sel] - vec[sel], p.crowd_alpha, p.crowd_lengthscale
                    )
                    grad -= g2  # sign flips for the crowd side of the pair
                    hess += h2
                gnorm2 = float(grad @ grad)
                if gnorm2 < 1e-28:
                    continue
                # Ascend along the gradient with the exact step for the
                # local quadratic model (one-shot for isotropic blocks),
                # then shrink on failure.
                curvature = -float(grad @ (hess @ grad))
                step = grad * (gnorm2 / curvature) if curvature > 1e-300 else grad
                base = vec[sel].copy()
                for _halve in range(9):
                    delta, payload = state.try_block(var, t, base + step)
                    if delta > 0.0:
                        state.apply_block(payload)
                        gained += delta
                        value += delta
                        break
                    step = 0.5 * step
        if gained <= 1e-12 * (1.0 + abs(value)):
            break
    return (state.h, state.f, state.crowd), value, passes_used


def psc_map(
    operator,
    autonomy,
    crowd=(),
    params=None,
    search_budget=2000,
    seed=0,
    refine_passes=20,
    gains=None,
    v_max=DEFAULT_V_MAX,
    extra_candidates=(),
):
    """Probabilistic shared control: MAP of the joint over (h, f, crowd).

    Sample-based search: model draws plus seeded candidates (mixture
    mode means, their combinations, and the ltb trajectory, which makes
    dominance over ltb structural), then block-coordinate refinement of
    the single best candidate.  Deterministic given the seed.
    extra_candidates supplies additional stacked robot trajectories to
    score (paired with the operator mode), so callers can guarantee the
    result dominates any reference control.
    """
    times = _shared_grid(operator, autonomy, *crowd)
    params = params if params is not None else InteractionParams()
    if search_budget < 0:
        raise ContractViolation("search_budget must be >= 0")
    # Canonical crowd order (and per-belief draw streams below) make the
    # result exactly invariant to how the caller ordered the crowd.
    crowd_keys = [_belief_key(c) for c in crowd]
    order = sorted(range(len(crowd)), key=lambda i: crowd_keys[i])
    crowd = [crowd[i] for i in order]
    crowd_keys = [crowd_keys[i] for i in order]
    objective = _JointObjective(operator, autonomy, crowd, params)

    h_bar = mixture_argmax(operator.mixture)
    f_bar = mixture_argmax(autonomy.mixture)
    crowd_modes = [mixture_argmax(c.mixture) for c in crowd]
    ltb_gains = gains if gains is not None else default_gains(autonomy, params)
    ltb_vec = ltb_gains.k_h * h_bar + ltb_gains.k_r * f_bar

    seeded_h = [h_bar, h_bar]
    seeded_f = [f_bar, ltb_vec]
    for extra in extra_candidates:
        seeded_h.append(h_bar)
        seeded_f.append(np.asarray(extra, dtype=float).reshape(-1))
    for mu_h in operator.mixture.means():
        for mu_f in autonomy.mixture.means():
            seeded_h.append(mu_h)
            seeded_f.append(mu_f)

    rng = np.random.default_rng(seed)
    if search_budget > 0:
        draw_h, _ = operator.mixture.sample(search_budget, rng)
        draw_f, _ = autonomy.mixture.sample(search_budget, rng)
        draw_c = [
            c.mixture.sample(search_budget, np.random.default_rng([_as_entropy(seed), 911, *key]))[0]
            for c, key in zip(crowd, crowd_keys)
        ]
    else:
        draw_h = np.empty((0, objective.dim))
        draw_f = np.empty((0, objective.dim))
        draw_c = [np.empty((0, objective.dim)) for _ in crowd]

    all_h = np.vstack([np.stack(seeded_h), draw_h])
    all_f = np.vstack([np.stack(seeded_f), draw_f])
    n_seeded = len(seeded_h)
    all_c = [
        np.vstack([np.tile(mode, (n_seeded, 1)), draws])
        for mode, draws in zip(crowd_modes, draw_c)
    ]
    scores = np.atleast_1d(objective.score(all_h, all_f, all_c))
    if not np.any(np.isfinite(scores)):
        raise InfeasibilityError(
            "search budget exhausted without any finite-density candidate"
        )
    best_idx = int(np.argmax(scores))
    top = np.sort(scores)[::-1]
    tie = 1.0 if scores.shape[0] > 1 and abs(top[0] - top[1]) <= 1e-9 * (1.0 + abs(top[0])) else 0.0

    start = (all_h[best_idx], all_f[best_idx], [c[best_idx] for c in all_c])
    (h_opt, f_opt, c_opt), value, passes_used = _refine(objective, start, refine_passes)

    p = params
    agree = float(agreeability_log_stacked(h_opt, f_opt, p.gamma))
    crowd_term = float(
        np.sum(
            [
                crowd_avoidance_log_stacked(f_opt, [c], p.crowd_alpha, p.crowd_lengthscale)
                for c in c_opt
            ]
        )
        if c_opt
        else 0.0
    )
    crowd_lp = float(np.sum([m.logpdf(c) for c, m in zip(c_opt, objective.crowd)]) if c_opt else 0.0)
    diagnostics = {
        "joint_log_density": value,
        "agreeability_term": agree,
        "crowd_interaction_term": crowd_term,
        "operator_logpdf": float(objective.op.logpdf(h_opt)),
        "autonomy_logpdf": float(objective.aut.logpdf(f_opt)),
        "crowd_logpdf_total": crowd_lp,
        "n_candidates": float(scores.shape[0]),
        "search_budget": float(search_budget),
        "refine_passes_used": float(passes_used),
        "start_index": float(best_idx),
        "tie": tie,
        "ltb_joint_log_density": float(scores[1]),
        "operator_mode_index": float(_mode_index(objective.op, h_opt)),
        "autonomy_mode_index": float(_mode_index(objective.aut, f_opt)),
        "k_h": ltb_gains.k_h,
        "k_r": ltb_gains.k_r,
    }
    control = SharedControl.from_trajectory(Trajectory.from_stacked(times, f_opt), v_max)
    return ArbitrationReport("psc", control, diagnostics)
