"""Closed-form algebra on Gaussian densities and mixtures over waypoint vectors.

Densities here live over stacked trajectory waypoints: a path of T 2-D
waypoints is a vector of dimension D = 2T, interleaved as
(x1, y1, x2, y2, ...).  Everything is computed in log space and mixture
weights are stored as log-weights, because the normalizing-constant
ratios that drive mode selection are exponentially separated and
underflow in linear space.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, FlatDirectionError, SingularCovarianceError

LOG_2PI = float(np.log(2.0 * np.pi))

# Tolerances on stored covariances.
SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10
# Relative eigenvalue floor applied before inverting near-singular matrices.
EIG_FLOOR_RTOL = 1e-10


def logsumexp(a, axis=None):
    """Stable log(sum(exp(a))); tolerates -inf entries."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(-1)[0])
    return np.squeeze(out, axis=axis)


def clamp_psd(matrix, rel_floor=EIG_FLOOR_RTOL, abs_floor=0.0):
    """Symmetrize and clamp eigenvalues from below.

    The floor is rel_floor times the largest eigenvalue (or abs_floor if
    larger), which keeps degenerate prediction covariances invertible
    without visibly distorting well-conditioned ones.
    """
    m = np.asarray(matrix, dtype=float)
    sym = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(sym)
    floor = max(rel_floor * max(float(w[-1]), 0.0), abs_floor)
    w = np.maximum(w, floor)
    return (v * w) @ v.T


class _CovCache:
    """Per-array cache keyed by object identity, dropped when the array dies."""

    def __init__(self, compute):
        self._compute = compute
        self._data = {}

    def get(self, arr):
        key = id(arr)
        hit = self._data.get(key)
        if hit is not None:
            ref, value = hit
            if ref() is arr:
                return value
        value = self._compute(arr)
        if len(self._data) > 4096:
            self._data = {k: v for k, v in self._data.items() if v[0]() is not None}
        self._data[key] = (weakref.ref(arr), value)
        return value


def _compute_factor(cov):
    """Cholesky-based factorization; falls back to eigenvalue clamping."""
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(clamp_psd(cov, abs_floor=1e-300) + 1e-12 * np.eye(cov.shape[0]))
    lower_inv = np.linalg.solve(chol, np.eye(cov.shape[0]))
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    precision = lower_inv.T @ lower_inv
    return {"lower_inv": lower_inv, "logdet": logdet, "precision": precision}


def _compute_sqrt(cov):
    """Eigen square root; exact for singular covariances (zero directions stay zero)."""
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    w = np.maximum(w, 0.0)
    return v * np.sqrt(w)


_FACTORS = _CovCache(_compute_factor)
_SQRTS = _CovCache(_compute_sqrt)
_VALIDATED = _CovCache(lambda arr: True)
_EVAL_PACKS = {}


def _is_validated(arr):
    key = id(arr)
    hit = _VALIDATED._data.get(key)
    return hit is not None and hit[0]() is arr


def cov_factor(cov):
    """Cached (lower_inv, logdet, precision) for a covariance array."""
    return _FACTORS.get(cov)


def cov_sqrt(cov):
    """Cached eigen square root used for sampling."""
    return _SQRTS.get(cov)


def _cholesky_or_raise(cov, which):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            f"covariance of input '{which}' is not positive definite"
        ) from None


@dataclass(frozen=True)
class GaussianDensity:
    """A multivariate normal over a stacked waypoint vector.

    The covariance must be symmetric (relative tolerance 1e-12) and
    positive semi-definite (smallest eigenvalue >= -1e-10 * largest).
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = self.cov
        if isinstance(cov, np.ndarray) and not cov.flags.writeable and _is_validated(cov):
            # Already validated through a previous construction; reuse verbatim.
            if cov.shape[0] != mean.shape[0]:
                raise ContractViolation(
                    f"mean dimension {mean.shape[0]} does not match covariance {cov.shape}"
                )
            mean.setflags(write=False)
            object.__setattr__(self, "mean", mean)
            return
        cov = np.asarray(cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ContractViolation(f"covariance must be square, got shape {cov.shape}")
        if cov.shape[0] != mean.shape[0]:
            raise ContractViolation(
                f"mean dimension {mean.shape[0]} does not match covariance {cov.shape}"
            )
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ContractViolation("mean and covariance must be finite")
        scale = float(np.max(np.abs(cov))) if cov.size else 0.0
        asym = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
        if asym > SYMMETRY_RTOL * max(scale, 1e-300):
            raise ContractViolation(
                f"covariance is not symmetric: max asymmetry {asym:.3e} vs scale {scale:.3e}"
            )
        sym = 0.5 * (cov + cov.T)
        eigs = np.linalg.eigvalsh(sym)
        if eigs[0] < -PSD_RTOL * max(float(eigs[-1]), 0.0):
            raise ContractViolation(
                f"covariance is not positive semi-definite: min eigenvalue {eigs[0]:.3e}"
            )
        mean.setflags(write=False)
        sym.setflags(write=False)
        _VALIDATED.get(sym)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", sym)

    @property
    def dim(self):
        return self.mean.shape[0]

    def logpdf(self, x):
        """Log-density at a point (D,) or a batch (M, D)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dim:
            raise ContractViolation(
                f"points of dimension {pts.shape[1]} evaluated under a {self.dim}-D density"
            )
        info = cov_factor(self.cov)
        y = (pts - self.mean) @ info["lower_inv"].T
        quad = np.einsum("ij,ij->i", y, y)
        out = -0.5 * (self.dim * LOG_2PI + info["logdet"] + quad)
        return float(out[0]) if single else out


@dataclass(frozen=True)
class LogNormalizer:
    """A normalizing constant on the natural-log scale."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class GaussianMixture:
    """A finite Gaussian mixture; weights kept in log space.

    Construction normalizes the log-weights so exp(log_weights) sums
    to one.  Components may share covariance array objects, which the
    batched evaluation exploits.
    """

    components: tuple
    log_weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ContractViolation("mixture must have at least one component")
        lw = np.asarray(self.log_weights, dtype=float).reshape(-1)
        if lw.shape[0] != len(comps):
            raise ContractViolation(
                f"{len(comps)} components but {lw.shape[0]} log-weights"
            )
        dim = comps[0].dim
        for c in comps:
            if c.dim != dim:
                raise ContractViolation("mixture components must share one dimension")
        lw = lw - logsumexp(lw)
        total = float(np.sum(np.exp(lw)))
        if not np.isfinite(total) or abs(total - 1.0) > 1e-9:
            raise ContractViolation(f"mixture weights do not normalize: sum {total!r}")
        lw.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "log_weights", lw)

    @classmethod
    def single(cls, density):
        return cls((density,), np.array([0.0]))

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def size(self):
        return len(self.components)

    def means(self):
        return np.stack([c.mean for c in self.components])

    def _eval_pack(self):
        """Cached per-group factorizations for fast repeated evaluation."""
        key = id(self.log_weights)
        hit = _EVAL_PACKS.get(key)
        if hit is not None and hit[0]() is self.log_weights:
            return hit[1]
        groups = {}
        for idx, comp in enumerate(self.components):
            groups.setdefault(id(comp.cov), (comp.cov, []))[1].append(idx)
        pack = []
        for cov, idxs in groups.values():
            info = cov_factor(cov)
            means = np.stack([self.components[i].mean for i in idxs])
            z = means @ info["lower_inv"].T
            pack.append(
                {
                    "linv": info["lower_inv"],
                    "logdet": info["logdet"],
                    "idxs": np.asarray(idxs),
                    "z": z,
                    "z2": np.sum(z * z, axis=1),
                }
            )
        if len(_EVAL_PACKS) > 2048:
            dead = [k for k, v in _EVAL_PACKS.items() if v[0]() is None]
            for k in dead:
                del _EVAL_PACKS[k]
        _EVAL_PACKS[key] = (weakref.ref(self.log_weights), pack)
        return pack

    def component_logpdfs(self, x):
        """Per-component log-densities, shape (K, M); groups shared covariances."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((self.size, pts.shape[0]))
        for group in self._eval_pack():
            y = pts @ group["linv"].T
            quad = (
                np.sum(y * y, axis=1)[None, :]
                - 2.0 * group["z"] @ y.T
                + group["z2"][:, None]
            )
            out[group["idxs"], :] = -0.5 * (self.dim * LOG_2PI + group["logdet"] + quad)
        return out

    def logpdf(self, x):
        """Mixture log-density at a point (D,) or batch (M, D)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        comp = self.component_logpdfs(x)
        out = logsumexp(comp + self.log_weights[:, None], axis=0)
        return float(out) if single and np.ndim(out) == 0 else (float(out[0]) if single else out)

    def log_responsibilities(self, x):
        """Posterior component log-probabilities at a single point."""
        lp = self.component_logpdfs(np.asarray(x, dtype=float))[:, 0] + self.log_weights
        return lp - logsumexp(lp)

    def sample(self, count, rng):
        """Draw (count, D) points; deterministic given the generator state."""
        weights = np.exp(self.log_weights)
        choices = rng.choice(self.size, size=count, p=weights / weights.sum())
        z = rng.standard_normal((count, self.dim))
        out = np.empty((count, self.dim))
        for k in range(self.size):
            mask = choices == k
            if not np.any(mask):
                continue
            root = cov_sqrt(self.components[k].cov)
            out[mask] = self.components[k].mean + z[mask] @ root.T
        return out, choices


def product_of_gaussians(a, b):
    """Pointwise product of two Gaussians, renormalized.

    Returns the product density (precision = sum of input precisions,
    mean = covariance-weighted combination) and the log of the
    normalizing constant, which equals the log-density of
    N(a.mean - b.mean | 0, a.cov + b.cov) at zero.
    """
    if a.dim != b.dim:
        raise ContractViolation(f"dimension mismatch: {a.dim} vs {b.dim}")
    chol_a = _cholesky_or_raise(a.cov, "a")
    chol_b = _cholesky_or_raise(b.cov, "b")
    inv_a = np.linalg.solve(chol_a, np.eye(a.dim))
    inv_b = np.linalg.solve(chol_b, np.eye(b.dim))
    prec_a = inv_a.T @ inv_a
    prec_b = inv_b.T @ inv_b
    precision = prec_a + prec_b
    cov = np.linalg.solve(precision, np.eye(a.dim))
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (prec_a @ a.mean + prec_b @ b.mean)

    total = a.cov + b.cov
    chol_t = np.linalg.cholesky(total)
    y = np.linalg.solve(chol_t, a.mean - b.mean)
    log_z = -0.5 * (
        a.dim * LOG_2PI + 2.0 * float(np.sum(np.log(np.diag(chol_t)))) + float(y @ y)
    )
    return GaussianDensity(mean, cov), LogNormalizer(log_z)


def precision_combine(gamma, sigma_r, z_h, f_bar):
    """Precision-weighted combination of an observed point and a predicted mean.

    Returns sigma @ (z_h / gamma + inv(sigma_r) @ f_bar) with
    inv(sigma) = I/gamma + inv(sigma_r).  With scalar sigma_r this equals
    K_h z_h + K_R f_bar for K_h = sigma_r / (sigma_r + gamma).
    """
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise ContractViolation(f"gamma must be a positive scalar, got {gamma!r}")
    z_h = np.asarray(z_h, dtype=float).reshape(-1)
    f_bar = np.asarray(f_bar, dtype=float).reshape(-1)
    if z_h.shape != f_bar.shape:
        raise ContractViolation(f"vector shapes differ: {z_h.shape} vs {f_bar.shape}")
    dim = z_h.shape[0]
    sig = np.asarray(sigma_r, dtype=float)
    if sig.ndim == 0:
        sig = float(sig) * np.eye(dim)
    if sig.shape != (dim, dim):
        raise ContractViolation(f"sigma_r shape {sig.shape} does not match dimension {dim}")
    chol = _cholesky_or_raise(sig, "sigma_r")
    inv_l = np.linalg.solve(chol, np.eye(dim))
    prec_r = inv_l.T @ inv_l
    combined = prec_r + np.eye(dim) / gamma
    return np.linalg.solve(combined, z_h / gamma + prec_r @ f_bar)


def mixture_times_gaussian(mix, g):
    """Multiply every mixture component by one Gaussian and renormalize.

    Each log-weight is incremented by that component's log-normalizer
    before renormalization.  Returns (mixture, diagnostics) where
    diagnostics carries the per-component log-normalizers and the log of
    the overall renormalization constant.
    """
    new_comps = []
    log_zs = np.empty(mix.size)
    for k, comp in enumerate(mix.components):
        prod, log_z = product_of_gaussians(comp, g)
        new_comps.append(prod)
        log_zs[k] = log_z.value
    raw = mix.log_weights + log_zs
    log_renorm = logsumexp(raw)
    out = GaussianMixture(tuple(new_comps), raw)
    diagnostics = {"log_normalizers": log_zs, "log_renormalization": float(log_renorm)}
    return out, diagnostics


def mean_shift(mix, start, precisions=None, max_iter=500):
    """Monotone fixed-point ascent to a local mode of the mixture."""
    if precisions is None:
        precisions = [cov_factor(c.cov)["precision"] for c in mix.components]
    x = np.array(start, dtype=float)
    fx = mix.logpdf(x)
    for _ in range(max_iter):
        resp = np.exp(mix.log_responsibilities(x))
        lam = np.zeros((mix.dim, mix.dim))
        rhs = np.zeros(mix.dim)
        for k in range(mix.size):
            if resp[k] <= 0.0:
                continue
            lam += resp[k] * precisions[k]
            rhs += resp[k] * (precisions[k] @ mix.components[k].mean)
        try:
            nxt = np.linalg.solve(lam, rhs)
        except np.linalg.LinAlgError:
            break
        f_nxt = mix.logpdf(nxt)
        halvings = 0
        while f_nxt < fx and halvings < 40:
            nxt = 0.5 * (nxt + x)
            f_nxt = mix.logpdf(nxt)
            halvings += 1
        if f_nxt < fx:
            break
        step = float(np.max(np.abs(nxt - x)))
        gain = f_nxt - fx
        x, fx = nxt, f_nxt
        if step <= 1e-13 * (1.0 + float(np.max(np.abs(x)))) or gain <= 1e-15 * (1.0 + abs(fx)):
            break
    return x, fx


def mixture_argmax(mix, grid=None, start_limit=None):
    """Highest-density point of a mixture.

    Local ascent runs from the best candidate and from component means,
    so the result is guaranteed at least as dense as every component
    mean.  `grid` supplies extra candidate points; an explicitly empty
    grid is a contract violation.  `start_limit` caps how many of the
    highest-weighted component means seed the ascent (all of them by
    default), which large conditioned mixtures use to stay fast.
    """
    means = mix.means()
    if grid is None:
        cands = means
    else:
        grid = np.atleast_2d(np.asarray(grid, dtype=float))
        if grid.size == 0:
            raise ContractViolation("candidate set is empty")
        if grid.shape[1] != mix.dim:
            raise ContractViolation(
                f"candidates of dimension {grid.shape[1]} for a {mix.dim}-D mixture"
            )
        cands = np.vstack([grid, means])
    scores = mix.logpdf(cands)
    best_idx = int(np.argmax(scores))

    if start_limit is not None and mix.size > start_limit:
        order = np.argsort(-mix.log_weights)[:start_limit]
        start_means = means[order]
    else:
        start_means = means
    starts = np.vstack([cands[best_idx][None, :], start_means])

    precisions = [cov_factor(c.cov)["precision"] for c in mix.components]
    best_x = cands[best_idx]
    best_f = float(scores[best_idx])
    for start in starts:
        x, fx = mean_shift(mix, start, precisions)
        if fx > best_f:
            best_x, best_f = x, fx
    # The contract: never below the density at any component mean.
    mean_scores = mix.logpdf(means)
    top_mean = int(np.argmax(mean_scores))
    if mean_scores[top_mean] > best_f:
        best_x, best_f = means[top_mean], float(mean_scores[top_mean])
    return np.array(best_x, dtype=float)


def finite_difference_gradient(fn, x, step_scale=1e-4):
    """Central-difference gradient with per-coordinate step 1e-4 * (1 + |x_i|)."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        h = step_scale * (1.0 + abs(float(x[i])))
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (fn(up) - fn(dn)) / (2.0 * h)
    return grad


def finite_difference_hessian(fn, x, step_scale=1e-4):
    """Central-difference Hessian, symmetrized by construction."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    steps = step_scale * (1.0 + np.abs(x))
    hess = np.empty((n, n))
    f0 = fn(x)
    for i in range(n):
        up = x.copy()
        dn = x.copy()
        up[i] += steps[i]
        dn[i] -= steps[i]
        hess[i, i] = (fn(up) - 2.0 * f0 + fn(dn)) / steps[i] ** 2
    for i in range(n):
        for j in range(i + 1, n):
            pp = x.copy()
            pm = x.copy()
            mp = x.copy()
            mm = x.copy()
            pp[i] += steps[i]
            pp[j] += steps[j]
            pm[i] += steps[i]
            pm[j] -= steps[j]
            mp[i] -= steps[i]
            mp[j] += steps[j]
            mm[i] -= steps[i]
            mm[j] -= steps[j]
            val = (fn(pp) - fn(pm) - fn(mp) + fn(mm)) / (4.0 * steps[i] * steps[j])
            hess[i, j] = val
            hess[j, i] = val
    return hess


def laplace_approximation(log_density, mode, grad_tol=1e-6, step_scale=1e-4):
    """Local Gaussian approximation of a log-density at a mode.

    The mode must be a local maximum (finite-difference gradient norm
    below grad_tol); the covariance is the inverse of the negated,
    symmetrized finite-difference Hessian.
    """
    mode = np.asarray(mode, dtype=float).reshape(-1)
    grad = finite_difference_gradient(log_density, mode, step_scale)
    gnorm = float(np.linalg.norm(grad))
    if gnorm > grad_tol:
        raise ContractViolation(
            f"mode is not a local maximum: gradient norm {gnorm:.3e} exceeds {grad_tol:.1e}"
        )
    hess = finite_difference_hessian(log_density, mode, step_scale)
    hess = 0.5 * (hess + hess.T)
    eigs = np.linalg.eigvalsh(hess)
    scale = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    offending = [float(v) for v in eigs if v >= -1e-12 * max(scale, 1.0)]
    if offending:
        raise FlatDirectionError(
            f"Hessian is not negative definite; offending eigenvalues {offending}",
            eigenvalues=offending,
        )
    cov = np.linalg.solve(-hess, np.eye(mode.shape[0]))
    cov = clamp_psd(cov)
    return GaussianDensity(mode, cov)
