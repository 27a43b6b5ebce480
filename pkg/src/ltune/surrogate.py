"""Gaussian-process regression with an ARD squared-exponential kernel and the
Expected Improvement acquisition (maximization form)."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.special import erfc

from .sampling import lhs_sample

JITTER = 1e-8
MAX_JITTER = 1e-4
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Kernel:
    signal_variance: float
    length_scales: np.ndarray
    noise: float = 0.0
    jitter: float = JITTER
    variant: str = "squared-exponential"

    def __post_init__(self):
        ls = np.array(self.length_scales, dtype=float).reshape(-1)
        if self.signal_variance <= 0 or np.any(ls <= 0) or self.noise < 0:
            raise ValueError("kernel hyperparameters must be positive (noise nonnegative)")
        ls.setflags(write=False)
        object.__setattr__(self, "length_scales", ls)

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.atleast_2d(A) / self.length_scales
        B = np.atleast_2d(B) / self.length_scales
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return self.signal_variance * np.exp(-0.5 * np.maximum(sq, 0.0))


@dataclass
class GPModel:
    Z: np.ndarray
    s: np.ndarray
    kernel: Kernel
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float  # diagonal jitter actually used (>= kernel.jitter after escalation)

    @property
    def n(self) -> int:
        return len(self.Z)


def _factor(K: np.ndarray, noise: float, jitter: float) -> tuple[np.ndarray, float]:
    eye = np.eye(len(K))
    while True:
        try:
            return cholesky(K + (noise + jitter) * eye, lower=True), jitter
        except LinAlgError:
            jitter *= 2.0
            if jitter > MAX_JITTER:
                raise LinAlgError("kernel matrix is not positive definite even with maximal jitter") from None


def gp_fit(Z: np.ndarray, s: np.ndarray, kernel: Kernel) -> GPModel:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    s = np.asarray(s, dtype=float).reshape(-1)
    if len(Z) < 1 or len(Z) != len(s):
        raise ValueError("need matching, non-empty Z and s")
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(s))):
        raise ValueError("GP training data must be finite")
    chol, jitter = _factor(kernel(Z, Z), kernel.noise, kernel.jitter)
    alpha = cho_solve((chol, True), s)
    return GPModel(Z, s, kernel, chol, alpha, jitter)


def gp_append(model: GPModel, z: np.ndarray, s_new: float) -> GPModel:
    """Add one observation by extending the Cholesky factor (O(n^2)); falls back to
    a full refit when the extension is numerically unsafe."""
    z = np.asarray(z, dtype=float).reshape(1, -1)
    Z = np.vstack([model.Z, z])
    s = np.append(model.s, float(s_new))
    k = model.kernel(model.Z, z)[:, 0]
    kss = model.kernel.signal_variance + model.kernel.noise + model.jitter
    c = solve_triangular(model.chol, k, lower=True)
    d2 = kss - c @ c
    if d2 <= model.jitter:
        return gp_fit(Z, s, model.kernel)
    n = model.n
    chol = np.zeros((n + 1, n + 1))
    chol[:n, :n] = model.chol
    chol[n, :n] = c
    chol[n, n] = math.sqrt(d2)
    alpha = cho_solve((chol, True), s)
    return GPModel(Z, s, model.kernel, chol, alpha, model.jitter)


def gp_posterior_batch(model: GPModel, Zq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Zq = np.atleast_2d(np.asarray(Zq, dtype=float))
    if Zq.shape[1] != model.Z.shape[1]:
        raise ValueError(f"query points have {Zq.shape[1]} dims, model has {model.Z.shape[1]}")
    Ks = model.kernel(Zq, model.Z)
    mu = Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True)
    var = model.kernel.signal_variance - (v * v).sum(axis=0)
    return mu, np.sqrt(np.maximum(var, 0.0))


def gp_posterior(model: GPModel, z: np.ndarray) -> tuple[float, float]:
    """Posterior mean and standard deviation at a single point (prior mean 0)."""
    z = np.asarray(z, dtype=float)
    if z.shape != (model.Z.shape[1],):
        raise ValueError(f"expected a point of shape ({model.Z.shape[1]},), got {z.shape}")
    mu, sigma = gp_posterior_batch(model, z[None, :])
    return float(mu[0]), float(sigma[0])


def log_marginal_likelihood(Z: np.ndarray, s: np.ndarray, kernel: Kernel) -> float:
    try:
        chol, _ = _factor(kernel(Z, Z), kernel.noise, kernel.jitter)
    except LinAlgError:
        return -np.inf
    alpha = cho_solve((chol, True), s)
    return float(-0.5 * s @ alpha - np.log(np.diag(chol)).sum() - 0.5 * len(s) * math.log(2 * math.pi))


def fit_kernel(Z: np.ndarray, s: np.ndarray, *, noise: float = 1e-6, iterations: int = 20,
               max_points: int = 256, seed=0, bounds=(1e-2, 1e1)) -> Kernel:
    """Signal variance from the sample variance of ``s``, ARD length scales from
    the per-dimension median pairwise distance, refined by a bounded
    multiplicative coordinate search on the log marginal likelihood.

    The search runs on at most ``max_points`` rows (seeded subsample)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    s = np.asarray(s, dtype=float).reshape(-1)
    if len(Z) > max_points:
        idx = np.sort(np.random.default_rng(seed).choice(len(Z), max_points, replace=False))
        Z, s = Z[idx], s[idx]
    var = float(np.var(s)) if len(s) > 1 else 0.0
    var = var if var > 0 else 1.0
    lo, hi = bounds
    if len(Z) > 1:
        diffs = np.abs(Z[:, None, :] - Z[None, :, :])
        iu = np.triu_indices(len(Z), k=1)
        med = np.median(diffs[iu], axis=0)
    else:
        med = np.ones(Z.shape[1])
    ls = np.clip(np.where(med > 0, med, 1.0), lo, hi)
    kernel = Kernel(var, ls, noise)
    if len(Z) < 3:
        return kernel
    best = log_marginal_likelihood(Z, s, kernel)
    factor = 2.0
    for _ in range(iterations):
        improved = False
        for j in range(Z.shape[1]):
            for mult in (factor, 1.0 / factor):
                trial = kernel.length_scales.copy()
                trial[j] = np.clip(trial[j] * mult, lo, hi)
                if trial[j] == kernel.length_scales[j]:
                    continue
                cand = replace(kernel, length_scales=trial)
                value = log_marginal_likelihood(Z, s, cand)
                if value > best:
                    best, kernel, improved = value, cand, True
                    break
        if not improved:
            factor = math.sqrt(factor)
            if factor < 1.01:
                break
    return kernel


# --- acquisition -------------------------------------------------------------

def normal_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):  # x*x = inf for huge |x|; exp(-inf) = 0 is right
        return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass(frozen=True)
class AcquisitionParams:
    f_best: float
    xi: float = 0.01

    def __post_init__(self):
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")


def expected_improvement(mu, sigma, params: AcquisitionParams):
    """EI = (mu - f_best - xi) * Phi(gamma) + sigma * phi(gamma), gamma = improvement / sigma.

    Where sigma == 0 the value is max(0, mu - f_best - xi). Works elementwise on arrays."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    imp = mu - params.f_best - params.xi
    safe = np.where(sigma > 0, sigma, 1.0)
    with np.errstate(over="ignore"):  # subnormal sigma sends gamma to +-inf, which is the right limit
        gamma = imp / safe
    ei = np.where(sigma > 0, imp * normal_cdf(gamma) + sigma * normal_pdf(gamma), np.maximum(imp, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def propose(model: GPModel, params: AcquisitionParams, Q: int = 2048, seed=0) -> tuple[np.ndarray, float]:
    """Best of ``Q`` LHS candidates over the unit cube by EI; ties go to the lowest index."""
    if Q < 1:
        raise ValueError("Q must be at least 1")
    cand = lhs_sample(model.Z.shape[1], Q, seed).matrix
    mu, sigma = gp_posterior_batch(model, cand)
    ei = expected_improvement(mu, sigma, params)
    best = int(np.argmax(np.atleast_1d(ei)))
    z_next = np.array(cand[best])
    return z_next, expected_improvement(*gp_posterior(model, z_next), params)
