"""Shared oracles for the test suite."""
import numpy as np


def central_difference(f, flat: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of ``f()`` with respect to ``flat`` (mutated in place)."""
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        up = f()
        flat[i] = old - step
        down = f()
        flat[i] = old
        grad[i] = (up - down) / (2 * step)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def predictor_gradient_error(n_instances: int, seed: int, max_width: int = 12, max_out: int = 4) -> float:
    """Worst relative gradient error of the gated regressor loss over random small instances."""
    from ltune import predictor

    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_instances):
        p, e, n = int(rng.integers(1, max_width + 1)), int(rng.integers(1, max_out + 1)), int(rng.integers(2, 9))
        widths = tuple(int(w) for w in rng.integers(1, 6, size=rng.integers(1, 3)))
        cfg = predictor.PredictorConfig(hidden_widths=widths, gate_enabled=bool(i % 4), gate_penalty=0.1)
        model = predictor.init_model(p, e, cfg, rng)
        model.params.flat[...] = rng.normal(scale=0.7, size=model.params.flat.size)
        X, Y = rng.random((n, p)), rng.random((n, e))
        _, grad = predictor.loss_and_grad(model, X, Y)
        numeric = central_difference(lambda: predictor.loss(model, X, Y), model.params.flat)
        worst = max(worst, relative_error(grad, numeric))
    return worst


def autoencoder_gradient_error(n_instances: int, seed: int, max_t: int = 12, max_l: int = 4) -> float:
    """Worst relative gradient error of the reconstruction loss over random small instances."""
    from ltune import latent

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        t = int(rng.integers(2, max_t + 1))
        l = int(rng.integers(1, min(max_l, t - 1) + 1))
        cfg = latent.AeConfig(latent_dim=l, hidden_widths=tuple(int(w) for w in rng.integers(1, 6, 2)))
        model = latent.init_autoencoder(t, cfg, rng)
        model.params.flat[...] = rng.normal(scale=0.7, size=model.params.flat.size)
        X = rng.random((int(rng.integers(1, 7)), t))
        _, grad = latent.loss_and_grad(model, X)
        numeric = central_difference(lambda: latent._loss(model, X), model.params.flat)
        worst = max(worst, relative_error(grad, numeric))
    return worst
