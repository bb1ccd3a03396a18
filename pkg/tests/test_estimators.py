import math

import numpy as np
import pytest

from syndatum.datamodel import NoiseModel, SeedSpec, TaskKind, make_dataset, sample_noise
from syndatum.densities import BoxSupport, TruncatedNormalDiag
from syndatum.errors import NonConvergence, SingularDesign, TaskMismatch
from syndatum.estimators import (
    EstimatorSpec,
    _MLP,
    default_knn_k,
    default_rf_shape,
    fit_estimator,
    fit_logistic_mle,
    parse_estimator,
    predict_mean,
    predict_prob,
)


def _regression_data(n, p, fn, noise_var, seed, box=3.0):
    rng = SeedSpec(seed).rng()
    X = rng.uniform(-box, box, size=(n, p))
    y = fn(X)
    if noise_var > 0:
        y = y + rng.normal(0.0, math.sqrt(noise_var), size=n)
    return make_dataset(X, y, TaskKind.REGRESSION)


def test_ols_exact_on_linear_data():
    ds = make_dataset([[1.0], [2.0], [3.0]], [2.0, 4.0, 6.0], TaskKind.REGRESSION)
    est = fit_estimator(EstimatorSpec("ols"), ds, SeedSpec(0))
    assert est.fitted_params["beta"][0] == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("p", [1, 3, 8])
def test_ols_recovers_linear_coefficients(p):
    rng = SeedSpec(100 + p).rng()
    beta = rng.normal(size=p)
    X = rng.normal(size=(200, p))
    ds = make_dataset(X, X @ beta, TaskKind.REGRESSION)
    est = fit_estimator(EstimatorSpec("ols"), ds, SeedSpec(0))
    assert np.allclose(est.fitted_params["beta"], beta, atol=1e-8)
    # normal-equation residual
    r = X.T @ (X @ est.fitted_params["beta"] - ds.responses)
    assert np.max(np.abs(r)) < 1e-8 * max(np.max(np.abs(X.T @ ds.responses)), 1.0)


def test_ols_singular_design():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])  # collinear columns
    ds = make_dataset(X, [1.0, 2.0, 3.0], TaskKind.REGRESSION)
    with pytest.raises(SingularDesign):
        fit_estimator(EstimatorSpec("ols"), ds, SeedSpec(0))


def test_ols_requires_regression_task():
    ds = make_dataset([[1.0], [2.0]], [1.0, -1.0], TaskKind.CLASSIFICATION)
    with pytest.raises(TaskMismatch):
        fit_estimator(EstimatorSpec("ols"), ds, SeedSpec(0))


def test_default_hyperparameters():
    assert default_knn_k(1000, 2) == 32  # round(1000^(2/4))
    assert default_rf_shape(1600) == (60, 7)  # 1.5 sqrt(1600), floor(ln 1600)


def test_knn_k1_at_training_point():
    ds = make_dataset([[0.0], [1.0], [2.0]], [5.0, 7.0, 9.0], TaskKind.REGRESSION)
    est = fit_estimator(EstimatorSpec("knn", k=1), ds, SeedSpec(0))
    assert predict_mean(est, [1.0]) == pytest.approx(7.0)


def test_knn_k_equals_n_gives_global_mean():
    ds = make_dataset([[0.0], [1.0], [2.0]], [5.0, 7.0, 9.0], TaskKind.REGRESSION)
    est = fit_estimator(EstimatorSpec("knn", k=3), ds, SeedSpec(0))
    assert predict_mean(est, [123.0]) == pytest.approx(7.0)


def test_knn_tie_break_lowest_index():
    # duplicated training point with conflicting responses: lowest index wins
    ds = make_dataset([[0.0], [0.0], [5.0]], [1.0, 100.0, 9.0], TaskKind.REGRESSION)
    est = fit_estimator(EstimatorSpec("knn", k=1), ds, SeedSpec(0))
    assert predict_mean(est, [0.0]) == pytest.approx(1.0)
    # k=2 must take both duplicates, not the far point
    est2 = fit_estimator(EstimatorSpec("knn", k=2), ds, SeedSpec(0))
    assert predict_mean(est2, [0.0]) == pytest.approx(50.5)


def test_knn_classification_prob_in_unit_interval():
    rng = SeedSpec(3).rng()
    X = rng.normal(size=(200, 2))
    z = np.where(X[:, 0] > 0, 1.0, -1.0)
    ds = make_dataset(X, z, TaskKind.CLASSIFICATION)
    est = fit_estimator(EstimatorSpec("knn", k=5), ds, SeedSpec(0))
    probs = est.prob(rng.normal(size=(500, 2)))
    assert np.all((probs >= 0.0) & (probs <= 1.0))


def test_knn_consistency_trend():
    # L2(P_X) error of KNN for mu(x) = exp(x1) - exp(x2) halves from n=1000 to n=16000
    density = TruncatedNormalDiag(BoxSupport((-2.0, -2.0), (2.0, 2.0)), [1.0, 1.0], [1.0, 1.0])
    mu = lambda X: np.exp(X[:, 0]) - np.exp(X[:, 1])
    eval_X = density.sample(4000, SeedSpec(99))
    errs = {}
    for n in (1000, 16000):
        X = density.sample(n, SeedSpec(50 + n))
        y = mu(X) + SeedSpec(60 + n).rng().normal(0.0, 1.0, size=n)
        est = fit_estimator(EstimatorSpec("knn"), make_dataset(X, y, TaskKind.REGRESSION), SeedSpec(0))
        errs[n] = float(np.mean((est.mean(eval_X) - mu(eval_X)) ** 2))
    assert errs[16000] < 0.5 * errs[1000]


def test_oracle_regression_and_classification():
    ds = make_dataset([[0.0], [1.0]], [0.0, 1.0], TaskKind.REGRESSION)
    est = fit_estimator(
        EstimatorSpec("oracle", oracle_fn=lambda X: np.abs(X[:, 0])), ds, SeedSpec(0)
    )
    assert predict_mean(est, [0.5]) == pytest.approx(0.5)
    with pytest.raises(TaskMismatch):
        predict_prob(est, [0.5])

    dc = make_dataset([[0.0], [1.0]], [1.0, -1.0], TaskKind.CLASSIFICATION)
    eta = fit_estimator(
        EstimatorSpec("oracle", oracle_fn=lambda X: np.ones(X.shape[0])), dc, SeedSpec(0)
    )
    assert predict_prob(eta, [0.3]) == pytest.approx(1.0)


def test_logistic_mle_monotone_and_accurate():
    rng = SeedSpec(8).rng()
    beta_star = np.array([1.0, -0.5])
    X = rng.uniform(-2, 2, size=(4000, 2))
    prob = 1.0 / (1.0 + np.exp(-X @ beta_star))
    z = np.where(rng.random(4000) < prob, 1.0, -1.0)
    beta, nll = fit_logistic_mle(X, z)
    assert np.allclose(beta, beta_star, atol=0.15)
    assert nll <= math.log(2.0)  # no worse than the zero-coefficient start


def test_logistic_prob_values():
    rng = SeedSpec(9).rng()
    X = rng.uniform(-2, 2, size=(2000, 1))
    prob = 1.0 / (1.0 + np.exp(-1.5 * X[:, 0]))
    z = np.where(rng.random(2000) < prob, 1.0, -1.0)
    ds = make_dataset(X, z, TaskKind.CLASSIFICATION)
    est = fit_estimator(EstimatorSpec("logistic"), ds, SeedSpec(0))
    beta = est.fitted_params["beta"][0]
    # 1/(1+exp(-ln 3)) = 3/4 at the point where x beta = ln 3
    assert predict_prob(est, [math.log(3.0) / beta]) == pytest.approx(0.75, abs=1e-9)
    assert predict_prob(est, [0.0]) == pytest.approx(0.5)


def test_logistic_box_clipping():
    rng = SeedSpec(10).rng()
    X = rng.uniform(-2, 2, size=(500, 1))
    prob = 1.0 / (1.0 + np.exp(-3.0 * X[:, 0]))
    z = np.where(rng.random(500) < prob, 1.0, -1.0)
    ds = make_dataset(X, z, TaskKind.CLASSIFICATION)
    est = fit_estimator(EstimatorSpec("logistic", box=0.5), ds, SeedSpec(0))
    assert np.max(np.abs(est.fitted_params["beta"])) <= 0.5 + 1e-12


def test_logistic_iteration_cap_raises_non_convergence():
    rng = SeedSpec(11).rng()
    X = rng.uniform(-2, 2, size=(4000, 2))
    prob = 1.0 / (1.0 + np.exp(-X @ np.array([1.0, -0.5])))
    z = np.where(rng.random(4000) < prob, 1.0, -1.0)
    with pytest.raises(NonConvergence):
        fit_logistic_mle(X, z, max_iter=2)


def test_logistic_separable_box_binds():
    # MLE diverges on separated data; the clip makes the box boundary bind
    X = np.array([[1.0], [2.0], [3.0], [-1.0], [-2.0]])
    z = np.array([1.0, 1.0, 1.0, -1.0, -1.0])
    ds = make_dataset(X, z, TaskKind.CLASSIFICATION)
    est = fit_estimator(EstimatorSpec("logistic", box=2.0), ds, SeedSpec(0))
    assert abs(est.fitted_params["beta"][0]) == pytest.approx(2.0)


def test_rf_single_depth_zero_tree_is_training_mean():
    ds = _regression_data(64, 2, lambda X: X[:, 0], 0.5, seed=21)
    est = fit_estimator(EstimatorSpec("rf", trees=1, depth=1000), ds, SeedSpec(5))
    # depth... single tree uses the full sample; depth 0 collapses to the mean
    est0 = fit_estimator(EstimatorSpec("rf", trees=1, depth=1), ds, SeedSpec(5))
    assert est0.fitted_params["trees"] == 1
    est_depth0 = fit_estimator(EstimatorSpec("rf", trees=1), ds, SeedSpec(5))
    from syndatum.estimators import _Forest

    forest = _Forest(ds.features, ds.responses, 1, 0, SeedSpec(5).rng())
    pred = forest.predict(np.array([[0.0, 0.0], [9.0, -9.0]]))
    assert np.allclose(pred, ds.responses.mean())
    assert est.training_n == 64


def test_rf_fits_signal_better_than_mean():
    ds = _regression_data(800, 2, lambda X: np.exp(X[:, 0]) - np.exp(X[:, 1]), 0.25, seed=22, box=2.0)
    est = fit_estimator(EstimatorSpec("rf"), ds, SeedSpec(6))
    eval_X = SeedSpec(23).rng().uniform(-2, 2, size=(2000, 2))
    mu = np.exp(eval_X[:, 0]) - np.exp(eval_X[:, 1])
    rf_err = np.mean((est.mean(eval_X) - mu) ** 2)
    mean_err = np.mean((ds.responses.mean() - mu) ** 2)
    assert rf_err < 0.3 * mean_err


def test_rf_deterministic_given_seed():
    ds = _regression_data(300, 2, lambda X: X[:, 0] * X[:, 1], 0.2, seed=24)
    q = SeedSpec(25).rng().uniform(-3, 3, size=(50, 2))
    a = fit_estimator(EstimatorSpec("rf"), ds, SeedSpec(7)).mean(q)
    b = fit_estimator(EstimatorSpec("rf"), ds, SeedSpec(7)).mean(q)
    c = fit_estimator(EstimatorSpec("rf"), ds, SeedSpec(8)).mean(q)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_mlp_zero_weights_outputs_bias():
    mlp = _MLP(3, 4, 10, SeedSpec(1).rng())
    for W in mlp.W:
        W[:] = 0.0
    mlp.b[-1][:] = 1.25
    out = mlp.predict(np.zeros((5, 3)))
    assert np.allclose(out, 1.25)


def test_mlp_gradient_check():
    rng = SeedSpec(2).rng()
    mlp = _MLP(2, 4, 10, rng)
    X = rng.normal(size=(5, 2))
    y = rng.normal(size=5)
    gW, gb, _ = mlp.gradients(X, y)
    h = 1e-6
    errs = []
    for layer in (0, len(mlp.W) - 1):
        W = mlp.W[layer]
        for idx in [(0, 0), (W.shape[0] - 1, W.shape[1] - 1)]:
            orig = W[idx]
            W[idx] = orig + h
            lp = float(np.mean((mlp.predict(X) - y) ** 2))
            W[idx] = orig - h
            lm = float(np.mean((mlp.predict(X) - y) ** 2))
            W[idx] = orig
            fd = (lp - lm) / (2 * h)
            an = gW[layer][idx]
            errs.append(abs(fd - an) / max(abs(fd), abs(an), 1e-12))
    assert max(errs) < 1e-4


def test_mlp_learns_linear_function():
    ds = _regression_data(500, 2, lambda X: X[:, 0] - 0.5 * X[:, 1], 0.0, seed=26, box=1.0)
    est = fit_estimator(EstimatorSpec("mlp"), ds, SeedSpec(9))
    eval_X = SeedSpec(27).rng().uniform(-1, 1, size=(500, 2))
    mu = eval_X[:, 0] - 0.5 * eval_X[:, 1]
    assert np.mean((est.mean(eval_X) - mu) ** 2) < 0.05


def test_parse_estimator():
    spec = parse_estimator("knn k=16")
    assert spec.kind == "knn" and spec.k == 16
    spec = parse_estimator("logistic box=4")
    assert spec.box == 4.0
    spec = parse_estimator("rf trees=50 depth=5")
    assert (spec.trees, spec.depth) == (50, 5)
    with pytest.raises(ValueError):
        parse_estimator("svm")
