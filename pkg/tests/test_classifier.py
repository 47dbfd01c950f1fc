import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.svm import SVC

from liquidsense.errors import DegenerateInputError, InsufficientDataError
from liquidsense.predict import predict_discrete, train_classifier
from liquidsense.predict.classifier import C_GRID, cross_val_accuracy, fit_fixed_c, smo_train, stratified_folds


@pytest.mark.parametrize("C", [0.01, 1.0, 100.0])
def test_smo_matches_reference_solver(C):
    rng = np.random.default_rng(int(C * 100))
    x = np.concatenate([rng.normal(-1, 1, (30, 2)), rng.normal(1, 1, (30, 2))])
    y = np.repeat([1.0, -1.0], 30)
    w, b = smo_train(x, y, C, tol=1e-9)
    ref = SVC(kernel="linear", C=C, tol=1e-10).fit(x, y)
    # sklearn orders classes ascending, so its decision favours +1 with the opposite sign convention
    sign = 1.0 if ref.classes_[1] == 1.0 else -1.0
    np.testing.assert_allclose(w, sign * ref.coef_[0], rtol=1e-4, atol=1e-5)
    assert b == pytest.approx(sign * ref.intercept_[0], abs=1e-4)


def _separable(rng, n=10):
    x = np.concatenate([200 + rng.uniform(-1, 1, n), 400 + rng.uniform(-1, 1, n)])
    return x, np.repeat([1, 2], n)


@pytest.mark.parametrize("C", C_GRID)
def test_separable_zero_training_error(C):
    x, y = _separable(np.random.default_rng(0))
    model = fit_fixed_c(x, y, C)
    np.testing.assert_array_equal(model.predict(x), y)


def test_grid_prefers_smaller_c_on_ties():
    x, y = _separable(np.random.default_rng(1))
    assert train_classifier(x, y).C == 0.01


@pytest.mark.parametrize("k", [2, 3, 5, 10])
def test_pairwise_structure(k):
    rng = np.random.default_rng(k)
    centres = 300 + 25.0 * np.arange(k)
    x = np.repeat(centres, 6) + rng.normal(0, 1, 6 * k)
    y = np.repeat(np.arange(1, k + 1), 6)
    model = train_classifier(x, y)
    assert len(model.functions) == k * (k - 1) // 2
    assert {(fn.lower, fn.upper) for fn in model.functions} == {
        (a, b) for a in range(1, k + 1) for b in range(a + 1, k + 1)
    }
    for c, label in zip(centres, range(1, k + 1)):
        assert predict_discrete(model, c) == label


def test_noisy_ten_class_cv_accuracy():
    rng = np.random.default_rng(5)
    centres = 720 - 200 * np.linspace(0, 1, 10) - 100 * np.linspace(0, 1, 10) ** 2
    x = np.repeat(centres, 10) + rng.normal(0, 2.0, 100)
    y = np.repeat(np.arange(1, 11), 10)
    model = train_classifier(x, y)
    assert cross_val_accuracy(x, y, model.C, 5) >= 0.95


def test_equidistant_point_goes_to_lower_label():
    model = fit_fixed_c([200.0, 201.0, 300.0, 301.0], [3, 3, 7, 7], 1.0)
    mid = float(model.mean[0])
    assert abs(model.functions[0].decision(model.standardize(mid))[0]) < 1e-9
    assert predict_discrete(model, mid) == 3


def test_vote_structure():
    x = np.array([100.0, 101, 200, 201, 300, 301])
    model = fit_fixed_c(x, [1, 1, 2, 2, 3, 3], 10.0)
    # far beyond the top class, every pair involving class 3 votes for it
    assert predict_discrete(model, 10_000.0) == 3
    assert predict_discrete(model, -10_000.0) == 1


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.01, 100), b=st.floats(-1000, 1000), seed=st.integers(0, 1000))
def test_affine_rescaling_invariant(a, b, seed):
    rng = np.random.default_rng(seed)
    x = np.repeat([300.0, 330.0, 360.0], 4) + rng.normal(0, 5, 12)
    y = np.repeat([1, 2, 3], 4)
    q = rng.uniform(250, 400, 50)
    m1 = fit_fixed_c(x, y, 1.0)
    m2 = fit_fixed_c(a * x + b, y, 1.0)
    np.testing.assert_array_equal(m1.predict(q), m2.predict(a * q + b))


def test_training_errors():
    with pytest.raises(DegenerateInputError):
        train_classifier([1.0, 2.0, 3.0], [1, 1, 1])
    with pytest.raises(InsufficientDataError):
        train_classifier([1.0, 2.0, 3.0], [1, 1, 2])


def test_stratified_folds_deterministic():
    y = np.array([1, 2, 1, 2, 1, 2, 1, 2, 3, 3])
    folds = stratified_folds(y, 2)
    assert [f.tolist() for f in folds] == [[0, 1, 4, 5, 8], [2, 3, 6, 7, 9]]
    assert [f.tolist() for f in stratified_folds(y, 2)] == [f.tolist() for f in folds]


def test_near_duplicate_features_converge_quickly():
    # five near-identical estimates per class made first-order pair selection crawl
    rng = np.random.default_rng(0)
    centres = np.array([419.77, 463.0, 503.75, 541.99, 577.98, 611.19, 642.08, 670.43, 695.81, 717.94])
    x = np.repeat(centres, 5) + rng.uniform(-5e-4, 5e-4, 50)
    y = np.repeat(np.arange(10, 0, -1), 5)
    z = (x - x.mean()) / x.std()
    for C in C_GRID:
        for a, b in [(1, 4), (5, 8), (7, 9)]:
            m = (y == a) | (y == b)
            yy = np.where(y[m] == a, 1.0, -1.0)
            w, bias = smo_train(z[m][:, None], yy, C, max_iter=200)
            margins = yy * (z[m] * w[0] + bias)
            assert np.all(margins > 0)
    model = train_classifier(x, y)
    np.testing.assert_array_equal(model.predict(x), y)
