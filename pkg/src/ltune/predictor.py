"""Gated-attention regressor: a per-feature sigmoid gate multiplied into the
inputs, then a fully connected softplus network with a linear multi-output head.

The same model type serves two roles that never share an instance: labelling
LHS-sampled configurations during augmentation, and standing in for the
benchmark inside the latent-space optimization loop.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .domain import AUGMENTED, Dataset, NormalizationSpec, normalize_config
from .sampling import lhs_configs


@dataclass(frozen=True)
class PredictorConfig:
    hidden_widths: tuple[int, ...] = (128, 64)
    gate_enabled: bool = True
    learning_rate: float = 1e-3
    epochs: int = 300
    batch_size: int = 64
    seed: int = 0
    validation_fraction: float = 0.2
    patience: int = 30
    clip_norm: float = 5.0
    gate_penalty: float = 1e-3  # weight of mean(gate) in the loss; pushes unused gates shut

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if any(w <= 0 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate, epochs and batch_size must be positive")
        if not 0.0 < self.validation_fraction < 0.5:
            raise ValueError("validation_fraction must lie in (0, 0.5)")
        if self.patience <= 0 or self.gate_penalty < 0:
            raise ValueError("patience must be positive and gate_penalty nonnegative")


@dataclass
class PredictorModel:
    input_dim: int
    output_dim: int
    config: PredictorConfig
    params: nn.ParamVector
    training_report: dict = field(default_factory=dict)

    @property
    def acts(self) -> list[str]:
        return ["softplus"] * len(self.config.hidden_widths) + ["linear"]

    @property
    def gate(self) -> np.ndarray:
        if not self.config.gate_enabled:
            return np.ones(self.input_dim)
        return nn.sigmoid(self.params["gate"])


@dataclass(frozen=True)
class EvalReport:
    r2: tuple[float, ...]
    mse: tuple[float, ...]


def _layout(p: int, e: int, cfg: PredictorConfig):
    layout = [("gate", (p,))] if cfg.gate_enabled else []
    return layout + nn.mlp_layout("", (p, *cfg.hidden_widths, e))


def init_model(p: int, e: int, cfg: PredictorConfig, rng: np.random.Generator) -> PredictorModel:
    params = nn.ParamVector(_layout(p, e, cfg))
    nn.init_mlp(params, "", (p, *cfg.hidden_widths, e), rng)
    return PredictorModel(p, e, cfg, params)


def _forward(model: PredictorModel, X: np.ndarray):
    if model.config.gate_enabled:
        g = nn.sigmoid(model.params["gate"])
        out, cache = nn.mlp_forward(model.params, "", model.acts, X * g)
        return out, cache, g
    out, cache = nn.mlp_forward(model.params, "", model.acts, X)
    return out, cache, None


def loss(model: PredictorModel, X: np.ndarray, Y: np.ndarray) -> float:
    out, _, g = _forward(model, X)
    value = float(np.mean((out - Y) ** 2))
    if g is not None:
        value += model.config.gate_penalty * float(np.mean(g))
    return value


def loss_and_grad(model: PredictorModel, X: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """Training loss (MSE over all outputs plus the gate penalty) and its gradient
    with respect to ``model.params.flat``."""
    out, cache, g = _forward(model, X)
    resid = out - Y
    value = float(np.mean(resid ** 2))
    grads = model.params.zeros_like()
    dx = nn.mlp_backward(model.params, grads, "", model.acts, cache, 2.0 * resid / resid.size)
    if g is not None:
        pen = model.config.gate_penalty
        value += pen * float(np.mean(g))
        dg = (dx * X).sum(axis=0) + pen / g.size
        grads["gate"][...] = dg * g * (1.0 - g)
    return value, grads.flat


def _check_xy(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or len(X) != len(Y):
        raise ValueError(f"inconsistent shapes X{X.shape} Y{Y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("inputs contain NaN or infinite values")
    return X, Y


def fit(X: np.ndarray, Y: np.ndarray, cfg: PredictorConfig = PredictorConfig()) -> PredictorModel:
    """Train on unit-scaled inputs/targets; keeps the weights with the best
    validation loss (early stopping with ``cfg.patience``)."""
    X, Y = _check_xy(X, Y)
    n = len(X)
    if n < 2:
        raise ValueError(f"need at least 2 rows to fit, got {n}")
    rng = np.random.default_rng(cfg.seed)
    model = init_model(X.shape[1], Y.shape[1], cfg, rng)

    perm = rng.permutation(n)
    n_val = int(round(n * cfg.validation_fraction)) if n >= 10 else 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    Xt, Yt = X[train_idx], Y[train_idx]
    Xv, Yv = (X[val_idx], Y[val_idx]) if n_val else (Xt, Yt)

    initial_train = loss(model, Xt, Yt)
    best = {"val": loss(model, Xv, Yv), "flat": model.params.flat.copy(), "epoch": -1}
    history = []

    def after_epoch(epoch: int) -> bool:
        val = loss(model, Xv, Yv)
        history.append(val)
        if val < best["val"]:
            best.update(val=val, flat=model.params.flat.copy(), epoch=epoch)
        return epoch - best["epoch"] >= cfg.patience

    try:
        nn.run_epochs(
            model.params,
            lambda idx: loss_and_grad(model, Xt[idx], Yt[idx]),
            len(Xt),
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            clip_norm=cfg.clip_norm,
            rng=rng,
            after_epoch=after_epoch,
        )
    except FloatingPointError as exc:
        raise RuntimeError(f"predictor training failed: {exc}") from None
    model.params.flat[...] = best["flat"]
    model.training_report = {
        "initial_train_loss": initial_train,
        "train_loss": loss(model, Xt, Yt),
        "val_loss": best["val"],
        "best_epoch": best["epoch"],
        "epochs_run": len(history),
        "n_train": len(Xt),
        "n_val": n_val,
    }
    return model


def predict(model: PredictorModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return predict(model, X[None, :])[0]
    if X.shape[1] != model.input_dim:
        raise ValueError(f"expected {model.input_dim} input columns, got {X.shape[1]}")
    if len(X) == 0:
        return np.zeros((0, model.output_dim))
    # one row at a time: BLAS picks different summation orders for different
    # batch shapes, and predictions must not depend on batch composition
    return np.vstack([_forward(model, X[i:i + 1])[0] for i in range(len(X))])


def evaluate(model: PredictorModel, X_hold: np.ndarray, Y_hold: np.ndarray) -> EvalReport:
    """Per-metric R^2 and MSE on normalized holdout targets."""
    X_hold, Y_hold = _check_xy(X_hold, Y_hold)
    if len(X_hold) == 0:
        raise ValueError("holdout set is empty")
    pred = predict(model, X_hold)
    return r2_mse(Y_hold, pred)


def r2_mse(Y: np.ndarray, pred: np.ndarray) -> EvalReport:
    sse = ((Y - pred) ** 2).sum(axis=0)
    sst = ((Y - Y.mean(axis=0)) ** 2).sum(axis=0)
    if np.any(sst == 0):
        cols = [int(i) for i in np.flatnonzero(sst == 0)]
        raise ValueError(f"R^2 undefined: zero-variance target column(s) {cols}")
    return EvalReport(tuple(float(v) for v in 1.0 - sse / sst), tuple(float(v) for v in sse / len(Y)))


def augment_with_model(ds: Dataset, cfg: PredictorConfig, M: int, seed) -> tuple[Dataset, PredictorModel | None]:
    """Fit a predictor on the measured rows of ``ds`` and append ``M`` LHS
    configurations labelled by it."""
    measured = ds.measured()
    if measured.N < 2:
        raise ValueError("augmentation needs at least 2 measured rows")
    if M <= 0:
        return ds, None
    spec = NormalizationSpec.from_dataset(measured)
    X = normalize_config(ds.space, spec, measured.configs)
    Y = spec.normalize_metrics(measured.metrics)
    model = fit(X, Y, cfg)
    confs = lhs_configs(ds.space, spec, M, seed)
    # labels stay inside the observed metric range; extrapolated values could
    # break positivity of physical metrics
    y_u = np.clip(predict(model, normalize_config(ds.space, spec, confs)), 0.0, 1.0)
    return ds.extend(confs, spec.denormalize_metrics(y_u), AUGMENTED), model


def augment(ds: Dataset, cfg: PredictorConfig, M: int, seed) -> Dataset:
    return augment_with_model(ds, cfg, M, seed)[0]


def save_model(model: PredictorModel, path) -> None:
    meta = {"input_dim": model.input_dim, "output_dim": model.output_dim,
            "config": asdict(model.config), "training_report": model.training_report}
    nn.save_checkpoint(path, "predictor", model.params, meta)


def load_model(path) -> PredictorModel:
    params, meta = nn.load_checkpoint(path, "predictor")
    cfg = PredictorConfig(**meta["config"])
    return PredictorModel(meta["input_dim"], meta["output_dim"], cfg, params, meta["training_report"])
