"""Confusion matrices, precision/recall/FPR, ROC/AUC and stratified k-fold CV."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import ForestError
from .dataset import Dataset
from .ensemble import ForestParams, train_forest


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_matrix(self) -> list[list[int]]:
        """Rows: actual (positive, negative); columns: predicted (positive, negative)."""
        return [[self.tp, self.fn], [self.fp, self.tn]]

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @classmethod
    def from_labels(cls, actual: Sequence[str], predicted: Sequence[str], positive: str) -> "Confusion":
        tp = fp = fn = tn = 0
        for a, p in zip(actual, predicted):
            if p == positive:
                if a == positive:
                    tp += 1
                else:
                    fp += 1
            elif a == positive:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, fn, tn)


def _pct(num: int, den: int) -> Optional[float]:
    return 100.0 * num / den if den else None


def metrics(conf: Confusion) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """(precision, recall, FPR) in percent; None where the denominator is 0."""
    return (
        _pct(conf.tp, conf.tp + conf.fp),
        _pct(conf.tp, conf.tp + conf.fn),
        _pct(conf.fp, conf.fp + conf.tn),
    )


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float


def roc_curve(scores: Sequence[float], is_positive: Sequence[bool]) -> list[RocPoint]:
    """ROC over every distinct score; a row is called positive when score >= threshold.

    The first point is (0, 0) at threshold +inf and the last is (1, 1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(is_positive, dtype=bool)
    n_pos = int(pos.sum())
    n_neg = int(pos.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ForestError("ROC needs both positive and negative rows")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    p = pos[order]
    tp = np.cumsum(p)
    fp = np.cumsum(~p)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    points = [RocPoint(0.0, 0.0, float("inf"))]
    for i in ends:
        points.append(RocPoint(fp[i] / n_neg, tp[i] / n_pos, float(s[i])))
    return points


def auc(points: Sequence[RocPoint]) -> float:
    """Trapezoid-rule area under a ROC curve."""
    area = 0.0
    for a, b in zip(points, points[1:]):
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0
    return float(area)


@dataclass(frozen=True)
class EvalReport:
    positive: str
    confusion: Confusion
    precision: Optional[float]
    recall: Optional[float]
    fpr: Optional[float]
    roc: tuple[RocPoint, ...] = ()
    auc: Optional[float] = None

    @property
    def n(self) -> int:
        return self.confusion.total

    def to_dict(self) -> dict:
        return {
            "positive": self.positive,
            "n": self.n,
            "confusion": {"tp": self.confusion.tp, "fp": self.confusion.fp, "fn": self.confusion.fn, "tn": self.confusion.tn},
            "precision": self.precision,
            "recall": self.recall,
            "fpr": self.fpr,
            "auc": self.auc,
            "roc": [[p.fpr, p.tpr, p.threshold if np.isfinite(p.threshold) else None] for p in self.roc],
        }


def evaluate(actual: Sequence[str], predicted: Sequence[str], scores: Sequence[float], positive: str) -> EvalReport:
    """Report for one evaluation set; ``scores`` are positive-class probabilities."""
    conf = Confusion.from_labels(actual, predicted, positive)
    precision, recall, fpr = metrics(conf)
    is_pos = [a == positive for a in actual]
    roc: tuple[RocPoint, ...] = ()
    area = None
    if any(is_pos) and not all(is_pos):
        roc = tuple(roc_curve(scores, is_pos))
        area = auc(roc)
    return EvalReport(positive, conf, precision, recall, fpr, roc, area)


def stratified_folds(labels: Sequence[str], k: int, seed: int) -> np.ndarray:
    """Fold index per row; each class is shuffled and dealt round-robin."""
    labels = list(labels)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5F01D]))
    fold = np.empty(len(labels), dtype=np.int64)
    for lab in sorted(set(labels)):
        idx = np.array([i for i, v in enumerate(labels) if v == lab], dtype=np.int64)
        idx = idx[rng.permutation(idx.size)]
        fold[idx] = np.arange(idx.size) % k
    return fold


@dataclass(frozen=True)
class KFoldResult:
    pooled: EvalReport
    folds: tuple[EvalReport, ...]
    fold_of_row: tuple[int, ...]
    scores: tuple[float, ...] = field(repr=False, default=())
    predicted: tuple[str, ...] = field(repr=False, default=())


def kfold_eval(
    data: Dataset,
    k: int = 5,
    params: ForestParams | None = None,
    seed: int = 0,
    positive: str | None = None,
    jobs: int = 1,
) -> KFoldResult:
    """Stratified k-fold cross-validation with pooled held-out predictions."""
    params = params or ForestParams()
    if k < 2:
        raise ForestError("k must be >= 2")
    space = data.label_space
    positive = positive if positive is not None else space[0]
    if positive not in space:
        raise ForestError(f"positive label {positive!r} not in {space}")
    for lab in space:
        c = sum(1 for v in data.labels if v == lab)
        if c < k:
            raise ForestError(f"class {lab!r} has {c} rows, fewer than k={k}")
    fold = stratified_folds(data.labels, k, seed)
    scores = np.zeros(len(data))
    predicted: list[str] = [""] * len(data)
    reports = []
    for f in range(k):
        test = np.flatnonzero(fold == f)
        train = np.flatnonzero(fold != f)
        model = train_forest(data.subset(train), replace(params, seed=_fold_seed(params.seed, f)), jobs=jobs)
        Xt = data.rows[test]
        proba = model.predict_proba_matrix(Xt)
        labels_t = model.predict_matrix(Xt)
        s = proba[:, model.labels.index(positive)]
        scores[test] = s
        for i, lab in zip(test, labels_t):
            predicted[i] = lab
        reports.append(evaluate([data.labels[i] for i in test], labels_t, s, positive))
    pooled = evaluate(data.labels, predicted, scores, positive)
    return KFoldResult(pooled, tuple(reports), tuple(int(v) for v in fold), tuple(float(v) for v in scores), tuple(predicted))


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, 0xF01D, fold]).generate_state(1)[0])
