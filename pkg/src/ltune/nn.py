"""Small dense-network toolkit in float64 numpy: flat parameter storage,
hand-written backprop, Adam with global-norm clipping.

Both the metric predictor and the autoencoder are built from these pieces.
"""
from __future__ import annotations

import json
from typing import Callable, Sequence

import numpy as np


def sigmoid(z):
    # tanh form: several times faster than scipy's expit on small blocks
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "softplus":
        return softplus(z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "softplus":
        return sigmoid(z)
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


class ParamVector:
    """Named array views into one contiguous float64 vector."""

    def __init__(self, layout: Sequence[tuple[str, tuple[int, ...]]], flat: np.ndarray | None = None):
        self.layout = [(name, tuple(shape)) for name, shape in layout]
        sizes = [int(np.prod(shape)) for _, shape in self.layout]
        total = int(sum(sizes))
        if flat is None:
            flat = np.zeros(total)
        if flat.shape != (total,):
            raise ValueError(f"flat vector has shape {flat.shape}, expected ({total},)")
        self.flat = flat
        self._views = {}
        start = 0
        for (name, shape), size in zip(self.layout, sizes):
            self._views[name] = flat[start:start + size].reshape(shape)
            start += size

    def __getitem__(self, name: str) -> np.ndarray:
        return self._views[name]

    def __contains__(self, name: str) -> bool:
        return name in self._views

    def zeros_like(self) -> "ParamVector":
        return ParamVector(self.layout, np.zeros_like(self.flat))

    def copy(self) -> "ParamVector":
        return ParamVector(self.layout, self.flat.copy())


def mlp_layout(prefix: str, sizes: Sequence[int]) -> list[tuple[str, tuple[int, ...]]]:
    layout = []
    for i in range(len(sizes) - 1):
        layout.append((f"{prefix}W{i}", (sizes[i], sizes[i + 1])))
        layout.append((f"{prefix}b{i}", (sizes[i + 1],)))
    return layout


def init_mlp(pv: ParamVector, prefix: str, sizes: Sequence[int], rng: np.random.Generator) -> None:
    """Uniform init with variance 1/fan_in; biases start at zero."""
    for i in range(len(sizes) - 1):
        limit = np.sqrt(3.0 / sizes[i])
        pv[f"{prefix}W{i}"][...] = rng.uniform(-limit, limit, size=(sizes[i], sizes[i + 1]))
        pv[f"{prefix}b{i}"][...] = 0.0


def mlp_forward(pv: ParamVector, prefix: str, acts: Sequence[str], x: np.ndarray):
    cache = []
    a = x
    for i, act in enumerate(acts):
        z = a @ pv[f"{prefix}W{i}"] + pv[f"{prefix}b{i}"]
        out = _act(act, z)
        cache.append((a, z, out))
        a = out
    return a, cache


def mlp_backward(pv: ParamVector, grads: ParamVector, prefix: str, acts: Sequence[str],
                 cache, dout: np.ndarray) -> np.ndarray:
    """Accumulate parameter gradients into ``grads`` and return d(loss)/d(input)."""
    delta = dout
    for i in reversed(range(len(acts))):
        a_in, z, out = cache[i]
        dz = delta * _act_grad(acts[i], z, out)
        grads[f"{prefix}W{i}"][...] += a_in.T @ dz
        grads[f"{prefix}b{i}"][...] += dz.sum(axis=0)
        delta = dz @ pv[f"{prefix}W{i}"].T
    return delta


def clip_by_norm(g: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.sqrt(g @ g))
    if max_norm > 0 and norm > max_norm:
        return g * (max_norm / norm)
    return g


class Adam:
    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        lr_t = self.lr * np.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        params -= lr_t * self.m / (np.sqrt(self.v) + self.eps)


def run_epochs(
    params: ParamVector,
    loss_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    n: int,
    *,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    clip_norm: float,
    rng: np.random.Generator,
    after_epoch: Callable[[int], bool] | None = None,
) -> None:
    """Shuffled mini-batch Adam. ``loss_and_grad(idx)`` returns the batch loss and
    its flat gradient; ``after_epoch(epoch)`` may return True to stop early."""
    opt = Adam(params.flat.size, lr=learning_rate)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grad = loss_and_grad(idx)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise FloatingPointError(f"training diverged at epoch {epoch} (loss={loss})")
            opt.step(params.flat, clip_by_norm(grad, clip_norm))
        if after_epoch is not None and after_epoch(epoch):
            break


CHECKPOINT_VERSION = 1


def save_checkpoint(path, kind: str, params: ParamVector, meta: dict) -> None:
    """Write layout + weights + JSON metadata to an ``.npz`` archive."""
    names = np.array([name for name, _ in params.layout])
    shapes = np.array(json.dumps([list(shape) for _, shape in params.layout]))
    with open(path, "wb") as fh:
        np.savez(
            fh,
            version=np.array(CHECKPOINT_VERSION),
            kind=np.array(kind),
            names=names,
            shapes=shapes,
            flat=params.flat,
            meta=np.array(json.dumps(meta, sort_keys=True)),
        )


def load_checkpoint(path, kind: str) -> tuple[ParamVector, dict]:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        if str(data["kind"]) != kind:
            raise ValueError(f"{path}: checkpoint holds a {data['kind']} model, not {kind}")
        names = [str(n) for n in data["names"]]
        shapes = [tuple(s) for s in json.loads(str(data["shapes"]))]
        flat = np.array(data["flat"], dtype=float)
        meta = json.loads(str(data["meta"]))
    return ParamVector(list(zip(names, shapes)), flat), meta
