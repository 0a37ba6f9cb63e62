"""Bootstrap-aggregated random forest built on the CART trees in ``tree``."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import ForestError, SchemaMismatchError
from .dataset import Dataset
from .tree import CompiledTree, TreeNode, TreeParams, grow_tree


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    mtry: Optional[int] = None  # None: floor(sqrt(d))
    max_depth: Optional[int] = None
    min_leaf: int = 1
    seed: int = 0

    def resolved_mtry(self, d: int) -> int:
        if self.mtry is not None:
            return max(1, min(self.mtry, d))
        return max(1, math.isqrt(d))

    def to_dict(self) -> dict:
        return asdict(self)


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index``; training order does not matter."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeNode, ...]
    schema: tuple[str, ...]
    labels: tuple[str, ...]
    params: ForestParams
    importances: tuple[float, ...]
    stage: Optional[str] = None
    oob_error: Optional[float] = None
    oob_coverage: Optional[float] = None
    _compiled: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def compiled(self) -> list[CompiledTree]:
        if not self._compiled:
            self._compiled.extend(CompiledTree(t) for t in self.trees)
        return self._compiled

    def _check_width(self, X: np.ndarray):
        if X.shape[1] != len(self.schema):
            raise SchemaMismatchError(f"row width {X.shape[1]} does not match model schema width {len(self.schema)}")

    def votes(self, X) -> np.ndarray:
        """(n_rows, n_labels) count of trees voting each label."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        self._check_width(X)
        out = np.zeros((X.shape[0], len(self.labels)), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.compiled():
            out[rows, tree.predict(X)] += 1
        return out

    def predict_proba_matrix(self, X) -> np.ndarray:
        return self.votes(X) / float(self.n_trees)

    def predict_matrix(self, X) -> list[str]:
        v = self.votes(X)
        return [self.labels[i] for i in np.argmax(v, axis=1)]

    def proba_of(self, X, label: str) -> np.ndarray:
        return self.predict_proba_matrix(X)[:, self.labels.index(label)]


def _fit_one(args):
    X, y, n_classes, tparams, seed, index = args
    rng = tree_rng(seed, index)
    n = X.shape[0]
    sample = rng.integers(0, n, size=n)
    root, imp = grow_tree(X[sample], y[sample], n_classes, tparams, rng)
    in_bag = np.zeros(n, dtype=bool)
    in_bag[sample] = True
    return root, imp, np.flatnonzero(~in_bag)


def train_forest(data: Dataset, params: ForestParams | None = None, jobs: int = 1) -> ForestModel:
    """Train a random forest; each tree sees a bootstrap sample of ``len(data)`` draws.

    ``jobs > 1`` trains trees in worker processes; the result is identical
    to sequential training.
    """
    params = params or ForestParams()
    if len(data) < 2:
        raise ForestError("need at least 2 rows to train a forest")
    if len(set(data.labels)) < 2:
        raise ForestError("training data contains a single class")
    if params.n_trees < 1:
        raise ForestError("n_trees must be >= 1")
    space = data.label_space
    X = data.rows
    y = data.encoded_labels(space)
    d = X.shape[1]
    tparams = TreeParams(params.max_depth, params.min_leaf, params.resolved_mtry(d))
    tasks = [(X, y, len(space), tparams, params.seed, i) for i in range(params.n_trees)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_one, tasks, chunksize=max(1, params.n_trees // (4 * jobs))))
    else:
        results = [_fit_one(t) for t in tasks]

    importance = np.zeros(d)
    oob_votes = np.zeros((X.shape[0], len(space)), dtype=np.int64)
    trees = []
    for root, imp, oob in results:
        trees.append(root)
        importance += imp
        if oob.size:
            pred = CompiledTree(root).predict(X[oob])
            oob_votes[oob, pred] += 1
    total = importance.sum()
    importances = importance / total if total > 0 else importance
    covered = oob_votes.sum(axis=1) > 0
    oob_error = None
    if covered.any():
        pred = np.argmax(oob_votes[covered], axis=1)
        oob_error = float(np.mean(pred != y[covered]))
    return ForestModel(
        trees=tuple(trees),
        schema=data.schema,
        labels=space,
        params=replace(params, mtry=tparams.mtry),
        importances=tuple(float(v) for v in importances),
        stage=data.stage,
        oob_error=oob_error,
        oob_coverage=float(covered.mean()),
    )


def predict_proba(model: ForestModel, row: Sequence[float]) -> dict[str, float]:
    """Fraction of trees voting for each label."""
    p = model.predict_proba_matrix(np.asarray(row, dtype=np.float64)[None, :])[0]
    return {lab: float(v) for lab, v in zip(model.labels, p)}


def predict(model: ForestModel, row: Sequence[float]) -> str:
    return model.predict_matrix(np.asarray(row, dtype=np.float64)[None, :])[0]


def ranked_importances(model: ForestModel) -> list[tuple[str, float]]:
    return sorted(zip(model.schema, model.importances), key=lambda kv: (-kv[1], kv[0]))
