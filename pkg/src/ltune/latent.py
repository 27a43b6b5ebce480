"""Autoencoder over concatenated (configuration, metric) vectors.

Encoder and decoder are mirrored softplus networks ending in sigmoid layers,
so latents live in [0, 1]^l and reconstructions in [0, 1]^t.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn


@dataclass(frozen=True)
class AeConfig:
    latent_dim: int = 32
    hidden_widths: tuple[int, ...] = (96, 64)
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 64
    seed: int = 0
    clip_norm: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.latent_dim <= 0 or any(w <= 0 for w in self.hidden_widths):
            raise ValueError("latent_dim and hidden widths must be positive")
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate, epochs and batch_size must be positive")


@dataclass
class AutoencoderModel:
    t: int
    l: int
    config: AeConfig
    params: nn.ParamVector
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    epoch_losses: list[float] = field(default_factory=list)  # mean batch loss per epoch

    @property
    def encoder_sizes(self) -> tuple[int, ...]:
        return (self.t, *self.config.hidden_widths, self.l)

    @property
    def decoder_sizes(self) -> tuple[int, ...]:
        return (self.l, *reversed(self.config.hidden_widths), self.t)

    @property
    def acts(self) -> list[str]:
        return ["softplus"] * len(self.config.hidden_widths) + ["sigmoid"]


def init_autoencoder(t: int, cfg: AeConfig, rng: np.random.Generator) -> AutoencoderModel:
    if cfg.latent_dim >= t:
        raise ValueError(f"latent_dim {cfg.latent_dim} must be smaller than input width {t}")
    model = AutoencoderModel(t, cfg.latent_dim, cfg, nn.ParamVector([]))
    layout = nn.mlp_layout("enc.", model.encoder_sizes) + nn.mlp_layout("dec.", model.decoder_sizes)
    model.params = nn.ParamVector(layout)
    nn.init_mlp(model.params, "enc.", model.encoder_sizes, rng)
    nn.init_mlp(model.params, "dec.", model.decoder_sizes, rng)
    return model


def _reconstruct(model: AutoencoderModel, X: np.ndarray):
    z, enc_cache = nn.mlp_forward(model.params, "enc.", model.acts, X)
    xhat, dec_cache = nn.mlp_forward(model.params, "dec.", model.acts, z)
    return xhat, enc_cache, dec_cache


def _loss(model: AutoencoderModel, X: np.ndarray) -> float:
    xhat, _, _ = _reconstruct(model, X)
    return float(np.sum((X - xhat) ** 2) / len(X))


def loss_and_grad(model: AutoencoderModel, X: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared Euclidean reconstruction error over the rows of ``X`` and its
    gradient with respect to ``model.params.flat``."""
    xhat, enc_cache, dec_cache = _reconstruct(model, X)
    resid = xhat - X
    value = float(np.sum(resid ** 2) / len(X))
    grads = model.params.zeros_like()
    dz = nn.mlp_backward(model.params, grads, "dec.", model.acts, dec_cache, 2.0 * resid / len(X))
    nn.mlp_backward(model.params, grads, "enc.", model.acts, enc_cache, dz)
    return value, grads.flat


def train_autoencoder(inputs: np.ndarray, cfg: AeConfig = AeConfig()) -> AutoencoderModel:
    X = np.asarray(inputs, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("need a 2-D input matrix with at least 2 rows")
    if np.any(X < 0.0) or np.any(X > 1.0) or not np.all(np.isfinite(X)):
        raise ValueError("autoencoder inputs must lie in [0, 1]")
    rng = np.random.default_rng(cfg.seed)
    model = init_autoencoder(X.shape[1], cfg, rng)
    model.initial_loss = _loss(model, X)
    running = []

    def step(idx):
        value, grad = loss_and_grad(model, X[idx])
        running.append(value * len(idx))
        return value, grad

    def after_epoch(epoch: int) -> bool:
        model.epoch_losses.append(sum(running) / len(X))
        running.clear()
        return False

    try:
        nn.run_epochs(
            model.params,
            step,
            len(X),
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            clip_norm=cfg.clip_norm,
            rng=rng,
            after_epoch=after_epoch,
        )
    except FloatingPointError as exc:
        raise RuntimeError(f"autoencoder training failed: {exc}") from None
    model.final_loss = _loss(model, X)
    return model


def _rowwise(fn, X: np.ndarray, width: int) -> np.ndarray:
    # per-row evaluation keeps results independent of batch shape (see predictor.predict)
    if len(X) == 0:
        return np.zeros((0, width))
    return np.vstack([fn(X[i:i + 1]) for i in range(len(X))])


def encode(model: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.t:
        raise ValueError(f"expected inputs of width {model.t}, got {x.shape[-1]}")
    if x.ndim == 1:
        return encode(model, x[None, :])[0]
    return _rowwise(lambda r: nn.mlp_forward(model.params, "enc.", model.acts, r)[0], x, model.l)


def decode(model: AutoencoderModel, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != model.l:
        raise ValueError(f"expected latents of width {model.l}, got {z.shape[-1]}")
    if np.any(z < 0.0) or np.any(z > 1.0) or not np.all(np.isfinite(z)):
        raise ValueError("latent components must lie in [0, 1]")
    if z.ndim == 1:
        return decode(model, z[None, :])[0]
    return _rowwise(lambda r: nn.mlp_forward(model.params, "dec.", model.acts, r)[0], z, model.t)


def reconstruction_loss(model: AutoencoderModel, inputs: np.ndarray) -> float:
    """Mean over rows of the squared Euclidean reconstruction error."""
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    if X.size == 0:
        raise ValueError("reconstruction loss of an empty input set is undefined")
    return squared_error_mean(X, decode(model, encode(model, X)))


def squared_error_mean(X: np.ndarray, Xhat: np.ndarray) -> float:
    X, Xhat = np.atleast_2d(X), np.atleast_2d(Xhat)
    return float(np.sum((X - Xhat) ** 2) / len(X))


def save_model(model: AutoencoderModel, path) -> None:
    meta = {"t": model.t, "l": model.l, "config": asdict(model.config),
            "initial_loss": model.initial_loss, "final_loss": model.final_loss,
            "epoch_losses": model.epoch_losses}
    nn.save_checkpoint(path, "autoencoder", model.params, meta)


def load_model(path) -> AutoencoderModel:
    params, meta = nn.load_checkpoint(path, "autoencoder")
    return AutoencoderModel(meta["t"], meta["l"], AeConfig(**meta["config"]), params,
                            meta["initial_loss"], meta["final_loss"], meta["epoch_losses"])
