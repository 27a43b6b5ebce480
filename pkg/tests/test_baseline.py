import numpy as np
import pytest
from hypothesis import given, strategies as st

from ltune import baseline
from ltune.domain import ROCKSDB_SCHEMA, Dataset, ParameterSpace, ParameterSpec
from ltune.tuner import TuneOptions

QUICK = TuneOptions(iterations=10, candidates=256, predictor_epochs=40, predictor_hidden_widths=(16,))


def standardized_problem(seed, n=200, d=10, support=(1, 4, 7), noise=0.1):
    rng = np.random.default_rng(seed)
    X, _, _ = baseline.standardize(rng.normal(size=(n, d)))
    beta = np.zeros(d)
    beta[list(support)] = rng.choice([-1, 1], len(support)) * rng.uniform(1, 2, len(support))
    return X, X @ beta + noise * rng.normal(size=n) + 3.0, beta


def test_lambda_max_gives_all_zeros():
    X, y, _ = standardized_problem(0)
    lam = baseline.lambda_max(X, y)
    assert np.all(baseline.lasso_fit(X, y, lam).coefficients == 0.0)
    assert np.all(baseline.lasso_fit(X, y, 2 * lam).coefficients == 0.0)
    assert np.any(baseline.lasso_fit(X, y, 0.9 * lam).coefficients != 0.0)


@pytest.mark.parametrize("lam", [0.0, 0.05, 0.3, 1.0])
def test_orthonormal_design_matches_soft_threshold(lam):
    # columns of sqrt(n) * Q are centered with X^T X / n = I, where the LASSO
    # solution is the soft-thresholded least-squares coefficient
    n, d = 64, 6
    rng = np.random.default_rng(1)
    A = rng.normal(size=(n, d))
    A -= A.mean(0)
    Q, _ = np.linalg.qr(A)
    X = np.sqrt(n) * Q
    y = rng.normal(size=n)
    ols = X.T @ (y - y.mean()) / n
    fit = baseline.lasso_fit(X, y, lam)
    np.testing.assert_allclose(fit.coefficients, baseline.soft_threshold(ols, lam), atol=1e-10)
    assert fit.intercept == pytest.approx(y.mean(), abs=1e-15)


def test_zero_penalty_matches_least_squares():
    X, y, _ = standardized_problem(2)
    fit = baseline.lasso_fit(X, y, 0.0, max_iter=10_000, tol=1e-12)
    ols = np.linalg.lstsq(X, y - y.mean(), rcond=None)[0]
    np.testing.assert_allclose(fit.coefficients, ols, atol=1e-6)


@given(seed=st.integers(0, 10_000), frac=st.floats(0.001, 1.0))
def test_objective_never_increases(seed, frac):
    X, y, _ = standardized_problem(seed, n=60, d=8)
    fit = baseline.lasso_fit(X, y, frac * baseline.lambda_max(X, y))
    trace = np.array(fit.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12 * (1 + np.abs(trace[:-1])))


def test_constant_columns_are_allowed_and_zero():
    X, y, _ = standardized_problem(3)
    X = np.column_stack([X, np.zeros(len(X))])
    assert baseline.lasso_fit(X, y, 0.01).coefficients[-1] == 0.0
    Xs, _, scale = baseline.standardize(np.column_stack([np.ones(5), np.arange(5.0)]))
    assert np.all(Xs[:, 0] == 0.0) and scale[0] == 1.0


def test_rejects_unstandardized_input():
    X, y, _ = standardized_problem(4)
    with pytest.raises(ValueError, match="not standardized"):
        baseline.lasso_fit(X * 2.0, y, 0.1)
    with pytest.raises(ValueError):
        baseline.lasso_fit(X, y, -0.1)
    with pytest.raises(ValueError):
        baseline.lasso_fit(X, y[:-1], 0.1)


def test_top_k_examples_and_ties():
    fit = baseline.LassoFit(np.array([0.5, -2.0, 0.0, 2.0, -0.5]), 0.1, 0.0, 1)
    assert baseline.top_k(fit, 1) == [1]
    assert baseline.top_k(fit, 2) == [1, 3]
    assert baseline.top_k(fit, 4) == [1, 3, 0, 4]
    assert baseline.top_k(fit, 5) == [1, 3, 0, 4, 2]
    assert baseline.top_k(baseline.LassoFit(np.array([0.5, -2.0, 0.1]), 0.1, 0.0, 1), 2) == [1, 0]
    assert baseline.top_k(baseline.LassoFit(np.zeros(3), 0.1, 0.0, 1), 2) == [0, 1]
    for k in (0, 6):
        with pytest.raises(ValueError):
            baseline.top_k(fit, k)


def test_recovers_planted_support():
    scores = []
    for seed in range(10):
        X, y, beta = standardized_problem(seed, n=300, d=30, support=(2, 5, 11, 19, 23), noise=0.5)
        fit = baseline.lasso_fit(X, y, 0.01 * baseline.lambda_max(X, y))
        found, planted = set(baseline.top_k(fit, 5)), set(np.flatnonzero(beta))
        scores.append(len(found & planted) / len(found | planted))
    assert np.mean(scores) >= 0.9


def linear_space(d):
    return ParameterSpace(tuple(ParameterSpec(f"k{j}", "continuous", 0.0, 10.0, default=5.0) for j in range(d)))


def planted_dataset(d=12, n=300, seed=0):
    """TIME falls as k3 grows, RATE grows with k7 and k9; nothing else matters."""
    rng = np.random.default_rng(seed)
    conf = rng.uniform(0, 10, (n, d))
    metrics = np.column_stack([
        100.0 - 6.0 * conf[:, 3],
        1000.0 + 50.0 * conf[:, 7] + 40.0 * conf[:, 9],
        3.0 + 0.01 * rng.random(n),
        1.1 + 0.01 * rng.random(n),
    ])
    return Dataset(linear_space(d), ROCKSDB_SCHEMA, conf, metrics)


def test_rank_parameters_finds_planted_knobs():
    fit = baseline.rank_parameters(planted_dataset(), baseline.ScoreProfile())
    assert set(baseline.top_k(fit, 3)) == {3, 7, 9}


@pytest.fixture(scope="module")
def planted():
    return planted_dataset(d=10, n=200)


def test_subspace_tune_pins_other_knobs(planted):
    result = baseline.subspace_tune(planted, [3, 7], iterations=10, seed=1, opts=QUICK)
    others = [j for j in range(10) if j not in (3, 7)]
    assert np.all(result.best_config[others] == 5.0)
    assert result.extras["subspace"] == ["k3", "k7"]
    assert len(result.best_latent) == 2
    assert planted.space.is_valid(result.best_config)


def test_subspace_tune_moves_selected_knobs_the_right_way(planted):
    opts = TuneOptions(candidates=256, predictor_epochs=300)
    result = baseline.subspace_tune(planted, [3, 7, 9], iterations=20, seed=2, opts=opts)
    assert result.best_config[3] > 7.0 and result.best_config[7] > 7.0 and result.best_config[9] > 7.0


def test_full_subspace_runs(small_dataset):
    result = baseline.subspace_tune(small_dataset, [0, 1, 2], iterations=5, seed=0, opts=QUICK)
    assert small_dataset.space.is_valid(result.best_config)


def test_different_k_give_different_configs(planted):
    fit = baseline.rank_parameters(planted, baseline.ScoreProfile())
    configs = [baseline.subspace_tune(planted, baseline.top_k(fit, k), iterations=8, seed=0, opts=QUICK).best_config
               for k in (1, 2, 3)]
    assert not np.array_equal(configs[0], configs[1]) and not np.array_equal(configs[1], configs[2])


def test_subspace_index_validation(planted):
    for bad in ([], [0, 0], [10]):
        with pytest.raises(ValueError):
            baseline.subspace_tune(planted, bad, iterations=2, opts=QUICK)


def test_top_k_sizes_from_the_study_give_different_configs():
    from ltune.benchtarget import generate_dataset, make_profile
    ds = generate_dataset(make_profile("readheavy"), 300, 1)
    fit = baseline.rank_parameters(ds, baseline.ScoreProfile())
    configs = [baseline.subspace_tune(ds, baseline.top_k(fit, k), iterations=5, seed=0, opts=QUICK).best_config
               for k in (5, 10, 15)]
    for i in range(3):
        for j in range(i + 1, 3):
            assert not np.array_equal(configs[i], configs[j])
