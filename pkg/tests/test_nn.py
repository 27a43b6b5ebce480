import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import expit

from helpers import central_difference, relative_error
from ltune import nn


@given(st.floats(-700, 700))
def test_sigmoid_matches_expit(z):
    assert abs(nn.sigmoid(z) - expit(z)) <= 1e-15


@given(st.floats(-700, 700))
def test_softplus_matches_logaddexp(z):
    assert nn.softplus(z) == pytest.approx(np.logaddexp(0.0, z), rel=1e-14, abs=1e-300)


def test_activations_are_finite_at_extremes():
    z = np.array([-1e6, -50.0, 0.0, 50.0, 1e6])
    assert np.all(np.isfinite(nn.sigmoid(z))) and np.all(np.isfinite(nn.softplus(z)))
    assert nn.sigmoid(np.array([-1e6]))[0] == 0.0 and nn.softplus(np.array([1e6]))[0] == 1e6


def test_param_vector_views_share_storage():
    pv = nn.ParamVector([("a", (2, 3)), ("b", (4,))])
    pv["a"][1, 2] = 5.0
    pv["b"][0] = 7.0
    assert pv.flat[5] == 5.0 and pv.flat[6] == 7.0
    clone = pv.copy()
    clone["b"][0] = 1.0
    assert pv["b"][0] == 7.0
    assert not pv.zeros_like().flat.any()


def test_mlp_backward_matches_finite_differences():
    rng = np.random.default_rng(0)
    sizes, acts = (5, 7, 3), ["softplus", "sigmoid"]
    pv = nn.ParamVector(nn.mlp_layout("m.", sizes))
    nn.init_mlp(pv, "m.", sizes, rng)
    x = rng.random((6, 5))
    target = rng.random((6, 3))

    def loss():
        out, _ = nn.mlp_forward(pv, "m.", acts, x)
        return float(np.sum((out - target) ** 2))

    out, cache = nn.mlp_forward(pv, "m.", acts, x)
    grads = pv.zeros_like()
    dx = nn.mlp_backward(pv, grads, "m.", acts, cache, 2 * (out - target))
    assert relative_error(grads.flat, central_difference(loss, pv.flat)) < 1e-7

    def loss_x():
        out, _ = nn.mlp_forward(pv, "m.", acts, x)
        return float(np.sum((out - target) ** 2))

    assert relative_error(dx.ravel(), central_difference(loss_x, x.ravel())) < 1e-7


def test_clip_by_norm():
    g = np.array([3.0, 4.0])
    np.testing.assert_allclose(nn.clip_by_norm(g, 1.0), [0.6, 0.8])
    assert nn.clip_by_norm(g, 10.0) is g


def test_adam_matches_reference_update():
    opt = nn.Adam(2, lr=0.1)
    params = np.array([1.0, -1.0])
    grads = [np.array([0.5, -2.0]), np.array([0.1, 0.3])]
    m = v = np.zeros(2)
    ref = params.copy()
    for t, g in enumerate(grads, start=1):
        opt.step(params, g)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(params, ref, rtol=1e-6)


def test_run_epochs_reports_divergence():
    pv = nn.ParamVector([("w", (1,))])
    with pytest.raises(FloatingPointError):
        nn.run_epochs(pv, lambda idx: (float("nan"), np.zeros(1)), 4, epochs=1, batch_size=2,
                      learning_rate=0.1, clip_norm=1.0, rng=np.random.default_rng(0))


def test_checkpoint_round_trip(tmp_path):
    pv = nn.ParamVector([("w", (3, 2)), ("b", (2,))], np.random.default_rng(1).normal(size=8))
    path = tmp_path / "m.npz"
    nn.save_checkpoint(path, "thing", pv, {"note": "x"})
    loaded, meta = nn.load_checkpoint(path, "thing")
    assert loaded.layout == pv.layout and meta == {"note": "x"}
    assert loaded.flat.tobytes() == pv.flat.tobytes()
    with pytest.raises(ValueError, match="not other"):
        nn.load_checkpoint(path, "other")
