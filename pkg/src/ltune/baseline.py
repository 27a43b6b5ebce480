"""Top-k tuning baseline: rank knobs by LASSO coefficient magnitude, then run
BO over the selected knobs only with every other knob pinned at its default."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import predictor
from .domain import Dataset, NormalizationSpec, denormalize_config, normalize_config
from .tuner import ScoreProfile, TuneOptions, TuneResult, _initial_design, _int_seed, bayes_opt

STANDARDIZED_TOL = 1e-6


@dataclass
class LassoFit:
    coefficients: np.ndarray
    lam: float
    intercept: float
    iterations_used: int
    objective_trace: list[float] = field(default_factory=list)  # objective after each sweep


def soft_threshold(x, lam: float):
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def lasso_objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    r = y - X @ beta
    return float(r @ r / (2 * len(y)) + lam * np.abs(beta).sum())


def standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale columns to unit (population) variance. Constant columns
    become all-zero columns, which lasso_fit accepts and leaves at coefficient 0."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return (X - mean) / scale, mean, scale


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which every coefficient is zero."""
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(X.T @ (y - y.mean()))) / len(y))


def _check_standardized(X: np.ndarray) -> None:
    mean = X.mean(axis=0)
    var = X.var(axis=0)
    zero = np.all(X == 0.0, axis=0)
    bad = ~zero & ((np.abs(mean) > STANDARDIZED_TOL) | (np.abs(var - 1.0) > STANDARDIZED_TOL))
    if np.any(bad):
        cols = [int(j) for j in np.flatnonzero(bad)[:5]]
        raise ValueError(f"columns {cols} are not standardized (mean 0, variance 1)")


def lasso_fit(X: np.ndarray, y: np.ndarray, lam: float, max_iter: int = 1000, tol: float = 1e-8) -> LassoFit:
    """Cyclic coordinate descent on (1/2n)||y - X b||^2 + lam*||b||_1.

    ``X`` must have standardized columns; ``y`` is centered internally and its
    mean returned as the intercept."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"inconsistent shapes X{X.shape} y{y.shape}")
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    _check_standardized(X)
    intercept = float(y.mean())
    yc = y - intercept
    col_sq = (X * X).sum(axis=0) / n
    beta = np.zeros(d)
    resid = yc.copy()
    trace = [lasso_objective(X, yc, beta, lam)]
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = X[:, j] @ resid / n + col_sq[j] * old
            new = float(soft_threshold(rho, lam)) / col_sq[j]
            if new != old:
                resid -= X[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        trace.append(lasso_objective(X, yc, beta, lam))
        if max_change < tol:
            break
    return LassoFit(beta, float(lam), intercept, sweeps, trace)


def top_k(fit: LassoFit, k: int) -> list[int]:
    """Indices of the ``k`` largest |coefficients|; ties go to the lower index."""
    coef = np.asarray(fit.coefficients)
    if not 1 <= k <= len(coef):
        raise ValueError(f"k must lie in [1, {len(coef)}], got {k}")
    return sorted(range(len(coef)), key=lambda j: (-abs(float(coef[j])), j))[:k]


def rank_parameters(ds: Dataset, profile: ScoreProfile, lam_fraction: float = 0.01) -> LassoFit:
    """LASSO of per-row profile scores on standardized normalized configurations,
    with lambda = lam_fraction * lambda_max."""
    profile.check_schema(ds.schema)
    spec = NormalizationSpec.from_dataset(ds)
    X, _, _ = standardize(normalize_config(ds.space, spec, ds.configs))
    y = profile.score_normalized(spec.normalize_metrics(ds.metrics), spec)
    return lasso_fit(X, y, lam_fraction * lambda_max(X, y))


def subspace_tune(ds: Dataset, indices, iterations: int = 300, seed: int = 0,
                  profile: ScoreProfile = ScoreProfile(), opts: TuneOptions | None = None) -> TuneResult:
    """BO over the normalized subcube of the selected knobs; the rest stay at defaults.

    The objective is the profile score of a config-to-metric predictor fitted on
    ``ds``. The GP starts from the training rows projected onto the subspace
    (at most ``opts.init_design_max``), each scored by that same predictor at its
    pinned full configuration."""
    start = time.perf_counter()
    profile.check_schema(ds.schema)
    indices = [int(j) for j in indices]
    if not indices or len(set(indices)) != len(indices) or not all(0 <= j < ds.space.d for j in indices):
        raise ValueError("indices must be distinct valid parameter positions")
    opts = replace(opts or TuneOptions(), iterations=iterations, seed=seed, use_augmentation=False,
                   use_latent=False)
    ss = np.random.SeedSequence(seed)
    pred_ss, init_ss, bo_ss = ss.spawn(3)

    spec = NormalizationSpec.from_dataset(ds)
    X_u = normalize_config(ds.space, spec, ds.configs)
    Y_u = spec.normalize_metrics(ds.metrics)
    model = predictor.fit(X_u, Y_u, predictor.PredictorConfig(
        hidden_widths=opts.predictor_hidden_widths, epochs=opts.predictor_epochs, seed=_int_seed(pred_ss)))
    pinned = normalize_config(ds.space, spec, ds.space.default_config())

    def full(v: np.ndarray) -> np.ndarray:
        x = pinned.copy()
        x[indices] = v
        return x

    def objective(v):
        return float(profile.score_normalized(predictor.predict(model, full(v))[None, :], spec)[0])

    idx = _initial_design(len(ds), opts.init_design_max, init_ss)
    V0 = X_u[idx][:, indices]
    s0 = np.array([objective(v) for v in V0])
    V_all, s_all, trace = bayes_opt(objective, V0, s0, iterations=iterations, xi=opts.xi,
                                    candidates=opts.candidates, seed_seq=bo_ss,
                                    refit_every=opts.kernel_refit_every)
    best = int(np.argmax(s_all))
    v_star = np.array(V_all[best])
    conf = denormalize_config(ds.space, spec, full(v_star))
    predicted = spec.denormalize_metrics(np.clip(predictor.predict(model, full(v_star)), 0.0, 1.0))
    result = TuneResult(
        best_config=conf,
        best_latent=v_star,
        best_score=float(s_all[best]),
        predicted_metrics=predicted,
        decoded_metrics=None,
        score_trace=trace,
        options=opts,
        profile=profile,
        extras={"rows_used": len(ds), "subspace": [ds.space.names[j] for j in indices],
                "subspace_indices": indices, "from_initial_design": bool(best < len(idx))},
        models={"predictor": model},
    )
    result.wall_time = time.perf_counter() - start
    return result
