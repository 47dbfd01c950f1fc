import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import confusion_matrix, f1_score, precision_score, recall_score

from liquidsense.predict import evaluate, evaluate_continuous, evaluate_discrete


def test_continuous_example():
    r = evaluate_continuous([900.0], [800.0], 1800.0)
    assert round(100 * r.error_rates[0], 2) == 5.56
    assert round(100 * r.accuracy, 2) == 94.44
    assert "accuracy" in r.table()


def test_perfect_discrete():
    y = np.repeat(np.arange(1, 11), 3)
    r = evaluate_discrete(y, y)
    np.testing.assert_array_equal(r.confusion, 3 * np.eye(10, dtype=int))
    assert r.f_score == 1.0 and r.accuracy == 1.0


def test_degenerate_single_prediction():
    truth = np.repeat(np.arange(1, 11), 5)
    pred = np.full(50, 4)
    r = evaluate_discrete(pred, truth)
    assert r.recall[3] == 1.0 and r.precision[3] == pytest.approx(0.1)
    assert np.count_nonzero(r.recall) == 1
    assert r.f_score == pytest.approx(f1_score(truth, pred, average="weighted", zero_division=0))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(2, 6), n=st.integers(5, 60))
def test_against_reference_metrics(seed, k, n):
    rng = np.random.default_rng(seed)
    truth = rng.integers(1, k + 1, n)
    pred = np.where(rng.random(n) < 0.7, truth, rng.integers(1, k + 1, n))
    r = evaluate_discrete(pred, truth)
    labels = r.labels
    np.testing.assert_array_equal(r.confusion, confusion_matrix(truth, pred, labels=labels))
    np.testing.assert_allclose(r.precision, precision_score(truth, pred, labels=labels, average=None, zero_division=0))
    np.testing.assert_allclose(r.recall, recall_score(truth, pred, labels=labels, average=None, zero_division=0))
    assert r.f_score == pytest.approx(f1_score(truth, pred, labels=labels, average="weighted", zero_division=0))
    np.testing.assert_array_equal(r.confusion.sum(axis=1), [np.sum(truth == lb) for lb in labels])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    truth = rng.integers(1, 5, 30)
    pred = rng.integers(1, 5, 30)
    perm = rng.permutation(30)
    a, b = evaluate_discrete(pred, truth), evaluate_discrete(pred[perm], truth[perm])
    assert a.f_score == b.f_score and np.array_equal(a.confusion, b.confusion)
    lv = rng.uniform(0, 1800, 30)
    pv = rng.uniform(0, 1800, 30)
    assert evaluate_continuous(pv, lv, 1800).accuracy == pytest.approx(
        evaluate_continuous(pv[perm], lv[perm], 1800).accuracy, rel=1e-12)


def test_errors_and_dispatch():
    with pytest.raises(ValueError):
        evaluate_discrete([1, 2], [1])
    with pytest.raises(ValueError):
        evaluate([1.0], [1.0])
    assert evaluate([1, 2], [1, 2], kind="discrete").f_score == 1.0
    table = evaluate_discrete([1, 2, 2], [1, 2, 1]).table()
    assert "weighted F-score" in table and "truth\\pred" in table
