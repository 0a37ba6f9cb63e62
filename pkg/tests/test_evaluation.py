from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import roc_auc_score

from hostingtype.errors import ForestError
from hostingtype.forest import Confusion, Dataset, ForestParams, auc, evaluate, kfold_eval, metrics, roc_curve, stratified_folds


def test_metrics_example():
    p, r, f = metrics(Confusion(tp=98, fp=2, fn=3, tn=97))
    assert round(p, 2) == 98.00
    assert round(r, 2) == 97.03
    assert round(f, 2) == 2.02


def test_metrics_absent_denominator():
    p, r, f = metrics(Confusion(0, 0, 5, 5))
    assert p is None and r == 0.0 and f == 0.0


def test_confusion_from_labels_totals():
    actual = ["h", "h", "n", "n", "h"]
    pred = ["h", "n", "h", "n", "h"]
    c = Confusion.from_labels(actual, pred, "h")
    assert (c.tp, c.fp, c.fn, c.tn) == (2, 1, 1, 1)
    assert c.total == 5
    assert c.as_matrix() == [[2, 1], [1, 1]]


def test_roc_endpoints_and_indicator_score():
    labels = [True, False, True, False, False]
    pts = roc_curve([1 if v else 0 for v in labels], labels)
    assert (pts[0].fpr, pts[0].tpr) == (0.0, 0.0)
    assert (pts[-1].fpr, pts[-1].tpr) == (1.0, 1.0)
    assert auc(pts) == 1.0


@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=2, max_size=80))
def test_auc_matches_sklearn(pairs):
    scores = [s / 20 for s, _ in pairs]
    labels = [b for _, b in pairs]
    if all(labels) or not any(labels):
        with pytest.raises(ForestError):
            roc_curve(scores, labels)
        return
    pts = roc_curve(scores, labels)
    assert auc(pts) == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)
    fpr = [p.fpr for p in pts]
    tpr = [p.tpr for p in pts]
    assert fpr == sorted(fpr) and tpr == sorted(tpr)
    assert 0.0 <= auc(pts) <= 1.0


def test_evaluate_report_shape():
    rep = evaluate(["h", "n", "h", "n"], ["h", "n", "n", "n"], [0.9, 0.2, 0.4, 0.1], "h")
    d = rep.to_dict()
    assert d["n"] == 4
    assert d["roc"][0] == [0.0, 0.0, None]
    assert rep.auc == 1.0


def test_stratified_folds_balanced():
    labels = ["a"] * 53 + ["b"] * 47
    fold = stratified_folds(labels, 5, 1)
    for f in range(5):
        na = sum(1 for i, v in enumerate(labels) if v == "a" and fold[i] == f)
        assert na in (10, 11)
    assert np.array_equal(fold, stratified_folds(labels, 5, 1))


def _data(X, y):
    return Dataset.from_rows([f"x{i}" for i in range(X.shape[1])], X, y)


def test_kfold_separable():
    rng = np.random.default_rng(0)
    X = np.r_[rng.normal(0, 1, (60, 3)), rng.normal(10, 1, (60, 3))]
    y = ["n"] * 60 + ["h"] * 60
    res = kfold_eval(_data(X, y), 5, ForestParams(n_trees=10), seed=1, positive="h")
    assert res.pooled.auc == 1.0
    assert res.pooled.fpr == 0.0
    assert res.pooled.n == 120
    assert sum(r.n for r in res.folds) == 120


def test_kfold_coin_flip_auc_near_half():
    rng = np.random.default_rng(42)
    X = rng.normal(size=(400, 4))
    y = list(rng.choice(["h", "n"], size=400))
    res = kfold_eval(_data(X, y), 5, ForestParams(n_trees=30, seed=2), seed=3, positive="h")
    assert 0.4 <= res.pooled.auc <= 0.6


def test_kfold_errors_and_determinism():
    X = np.arange(20, dtype=float).reshape(10, 2)
    y = ["a"] * 7 + ["b"] * 3
    with pytest.raises(ForestError, match="fewer than k"):
        kfold_eval(_data(X, y), 5)
    with pytest.raises(ForestError):
        kfold_eval(_data(X, y), 1)
    a = kfold_eval(_data(X, y), 3, ForestParams(n_trees=5), seed=4)
    b = kfold_eval(_data(X, y), 3, ForestParams(n_trees=5), seed=4)
    assert a.pooled == b.pooled and a.scores == b.scores
