"""Classifier fitting, shrinkage, prediction, and cross-validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import scalar_plda_scores

from poiskit.count_matrix import CountMatrix, LabeledDataset
from poiskit.errors import ValidationError
from poiskit.plda import (
    PldaModel,
    cross_validate,
    default_rho_grid,
    fit,
    predict,
    read_model,
    shrunken_ratios,
    soft_threshold,
    stratified_folds,
    write_model,
)


def make_dataset(values, labels, K=None):
    values = np.asarray(values, dtype=float)
    n, p = values.shape
    m = CountMatrix(values, tuple(f"s{i}" for i in range(n)), tuple(f"f{j}" for j in range(p)))
    labels = np.asarray(labels)
    return LabeledDataset(m, labels, K or labels.max())


def random_dataset(seed, n=12, p=30, K=3):
    rng = np.random.default_rng(seed)
    values = rng.poisson(25.0, size=(n, p)).astype(float) + rng.integers(0, 3, (n, p))
    labels = (np.arange(n) % K) + 1
    return make_dataset(values, labels, K)


def injected_model(g, d, priors, beta=1.0, rho=0.0):
    """Model assembled from known parameters; prediction needs explicit s*."""
    g = np.asarray(g, float)
    d = np.asarray(d, float)
    return PldaModel(
        g_hat=g,
        d_hat=d,
        n_hat_class_sums=np.ones_like(d),
        priors=np.asarray(priors, float),
        beta=beta,
        rho=rho,
        size_factors=None,
        alpha=1.0,
        class_names=tuple(str(k + 1) for k in range(d.shape[0])),
    )


# --- soft thresholding ---

def test_soft_threshold_examples():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(1.7, 0.0) == 1.7


@given(x=st.floats(-1e6, 1e6), t=st.floats(0, 1e6))
@settings(max_examples=200, deadline=None)
def test_soft_threshold_properties(x, t):
    s = float(soft_threshold(x, t))
    assert abs(s) <= abs(x) + 1e-12
    assert s * x >= 0.0


# --- fitting ---

def test_rho_zero_matches_posterior_mean_formula_bitwise():
    data = random_dataset(0)
    model = fit(data, rho=0.0, transform=False)
    factors = model.size_factors
    g = data.matrix.col_sums
    for k in range(1, data.K + 1):
        idx = data.class_indices(k)
        a = data.matrix.values[idx].sum(axis=0) + model.beta
        b = factors.values[idx].sum() * g + model.beta
        assert np.array_equal(model.d_hat[k - 1], a / b)


def test_zero_class_count_keeps_ratio_positive():
    values = np.array([[5.0, 0.0], [6.0, 0.0], [4.0, 3.0], [5.0, 2.0]])
    data = make_dataset(values, [1, 1, 2, 2])
    model = fit(data, rho=0.0, transform=False)
    assert np.all(model.d_hat > 0)
    # class 1 never saw feature 2: ratio is beta / (offset + beta) < 1
    idx = data.class_indices(1)
    offset = model.size_factors.values[idx].sum() * data.matrix.col_sums[1]
    assert model.d_hat[0, 1] == pytest.approx(1.0 / (offset + 1.0))


def test_huge_rho_shrinks_everything():
    data = random_dataset(1)
    model = fit(data, rho=1e9, transform=False)
    assert np.all(model.d_hat == 1.0)
    assert model.nonzero_features() == 0


def test_beta_validation():
    data = random_dataset(2)
    with pytest.raises(ValidationError):
        fit(data, beta=0.0)
    with pytest.raises(ValidationError):
        fit(data, rho=-1.0)


def test_empirical_priors():
    data = make_dataset(np.ones((5, 3)) + np.arange(15).reshape(5, 3), [1, 1, 1, 2, 2])
    model = fit(data, prior_mode="empirical", transform=False)
    assert np.allclose(model.priors, [0.6, 0.4])


def test_shrinkage_moves_toward_one_without_overshoot():
    data = random_dataset(3)
    stats_model = fit(data, rho=0.0, transform=False)
    ratio = stats_model.d_hat
    for rho in (0.1, 1.0, 10.0):
        shrunk = fit(data, rho=rho, transform=False).d_hat
        assert np.all(np.abs(shrunk - 1.0) <= np.abs(ratio - 1.0) + 1e-12)
        assert np.all((shrunk - 1.0) * (ratio - 1.0) >= -1e-15)


def test_sparsity_is_monotone_in_rho():
    data = random_dataset(4, p=60)
    grid = [0.0, 0.05, 0.2, 0.5, 1.0, 3.0, 10.0, 100.0]
    counts = [fit(data, rho=r, transform=False).nonzero_features() for r in grid]
    assert counts == sorted(counts, reverse=True)
    assert counts[0] == 60


def test_interpolation_with_one_sample_per_class():
    # with a single observation per class and a vanishing prior, the model
    # reproduces the observed counts: d * n_hat ~= x
    rng = np.random.default_rng(9)
    values = rng.poisson(40.0, size=(3, 20)).astype(float) + 1.0
    data = make_dataset(values, [1, 2, 3])
    model = fit(data, beta=1e-8, rho=0.0, transform=False)
    n_hat = model.size_factors.values[:, None] * model.g_hat[None, :]
    recon = model.d_hat * n_hat
    assert np.allclose(recon, values, rtol=1e-4)


# --- prediction ---

def test_predict_matches_scalar_oracle_hand_model():
    model = injected_model(
        g=[3.0, 5.0], d=[[0.5, 2.0], [1.5, 0.25]], priors=[0.4, 0.6]
    )
    x = np.array([7.0, 2.0])
    pred = predict(model, x, s_star=1.3)
    expected = scalar_plda_scores(x, model.g_hat, model.d_hat, model.priors, 1.3)
    assert np.allclose(pred.scores, expected, rtol=1e-12)


def test_fully_shrunken_model_ties_to_class_one():
    data = random_dataset(5)
    model = fit(data, rho=1e9, transform=False)
    pred = predict(model, data.matrix.values[0])
    assert pred.class_index == 1
    assert np.allclose(pred.scores, pred.scores[0])
    assert np.allclose(pred.posterior, 1.0 / data.K)


def test_scores_shift_invariance():
    model = injected_model(g=[1.0, 1.0], d=[[10.0, 10.0], [28.0, 28.0]], priors=[0.5, 0.5])
    pred = predict(model, [12.0, 20.0], s_star=1.0)
    shifted_posterior = np.exp(pred.scores + 123.0)
    shifted_posterior /= shifted_posterior.sum()
    assert np.allclose(shifted_posterior, pred.posterior)
    assert int(np.argmax(pred.scores + 123.0)) + 1 == pred.class_index


def test_predict_finite_scores_on_zero_heavy_input():
    data = random_dataset(6)
    model = fit(data, rho=0.5, transform=False)
    x = np.zeros(data.matrix.p)
    x[0] = 1.0
    pred = predict(model, x)
    assert np.all(np.isfinite(pred.scores))


def test_predict_validates_input():
    model = injected_model(g=[1.0], d=[[2.0], [0.5]], priors=[0.5, 0.5])
    with pytest.raises(ValidationError):
        predict(model, [1.0, 2.0], s_star=1.0)
    with pytest.raises(ValidationError):
        predict(model, [-1.0], s_star=1.0)
    with pytest.raises(ValidationError, match="s_star"):
        predict(model, [1.0])


def test_predict_applies_transform_exponent():
    data = random_dataset(7)
    model = fit(data, rho=0.0, transform=True)
    assert model.alpha < 1.0
    x = data.matrix.values[0]
    manual = predict(model, x)
    # feeding pre-transformed counts with alpha forced to 1 must agree
    clone = PldaModel(
        g_hat=model.g_hat,
        d_hat=model.d_hat,
        n_hat_class_sums=model.n_hat_class_sums,
        priors=model.priors,
        beta=model.beta,
        rho=model.rho,
        size_factors=model.size_factors,
        alpha=1.0,
        class_names=model.class_names,
        feature_ids=model.feature_ids,
    )
    direct = predict(clone, x**model.alpha)
    assert np.array_equal(manual.scores, direct.scores)


# --- shrunken ratio kernel ---

def test_shrunken_ratios_zero_rho_is_exact_division():
    rng = np.random.default_rng(10)
    a = rng.random((3, 50)) * 20 + 0.1
    b = rng.random((3, 50)) * 20 + 0.1
    assert np.array_equal(shrunken_ratios(a, b, 0.0), a / b)


# --- cross-validation ---

def test_cv_rho_zero_keeps_all_features():
    data = random_dataset(11, n=15, p=25, K=3)
    result = cross_validate(data, rho_grid=[0.0], folds=3, seed=1, transform=False)
    assert result.nonzero_features[0] == 25.0


def test_cv_huge_rho_matches_prior_only_classifier():
    data = random_dataset(12, n=12, p=25, K=3)
    result = cross_validate(data, rho_grid=[1e9], folds=3, seed=2, transform=False)
    assert result.nonzero_features[0] == 0.0
    prior_only_errors = int((data.labels != 1).sum())
    assert result.errors[0] == prior_only_errors


def test_cv_selects_smallest_rho_at_minimum():
    data = random_dataset(13, n=18, p=40, K=3)
    result = cross_validate(data, folds=3, seed=3, transform=False)
    best = result.errors.min()
    first = np.flatnonzero(result.errors == best)[0]
    assert result.selected_rho == result.rho_grid[first]


def test_cv_deterministic_given_seed():
    data = random_dataset(14, n=12, p=20, K=2)
    a = cross_validate(data, folds=4, seed=9, transform=False)
    b = cross_validate(data, folds=4, seed=9, transform=False)
    assert np.array_equal(a.errors, b.errors)
    assert a.selected_rho == b.selected_rho


def test_cv_empty_grid_rejected():
    data = random_dataset(15)
    with pytest.raises(ValidationError):
        cross_validate(data, rho_grid=[], folds=3)


def test_default_rho_grid_spans_to_full_shrinkage():
    data = random_dataset(16)
    grid = default_rho_grid(data, transform=False)
    assert grid[0] == 0.0
    assert grid.size == 30
    model = fit(data, rho=float(grid[-1]), transform=False)
    assert model.nonzero_features() == 0


def test_stratified_folds_reduce_with_warning():
    labels = np.array([1, 1, 1, 2, 2, 2])
    with pytest.warns(RuntimeWarning, match="reducing folds"):
        fold_of, effective = stratified_folds(labels, folds=5, seed=0)
    assert effective == 3
    for k in (1, 2):
        per_fold = np.bincount(fold_of[labels == k], minlength=3)
        assert np.all(per_fold == 1)


def test_stratified_folds_degenerate():
    with pytest.raises(ValidationError):
        stratified_folds(np.array([1, 2, 2, 2]), folds=2, seed=0)


# --- serialization ---

def test_model_json_round_trip(tmp_path):
    data = random_dataset(17)
    model = fit(data, rho=0.7, transform=True)
    path = tmp_path / "model.json"
    write_model(model, path)
    loaded = read_model(path)
    assert np.array_equal(loaded.d_hat, model.d_hat)
    assert np.array_equal(loaded.g_hat, model.g_hat)
    assert loaded.alpha == model.alpha
    x = data.matrix.values[3]
    assert np.array_equal(predict(loaded, x).scores, predict(model, x).scores)
